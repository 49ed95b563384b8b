use std::collections::BTreeSet;

use radblock::experiment::{
    label_samples, run_experiment, track_all, ExperimentConfig, PredictorMode, TrackingDataset,
};
use radblock::io::{write_predictions, PredictionRow};
use radblock::predict::{split_sequences, Split};
use radblock::sim::generate_dataset;

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.scenario.sequences = 10;
    cfg.scenario.radar.chirps = 32;
    cfg.pipeline.fft.doppler_fft = 32;
    cfg.sweep = vec![3, 9];
    cfg
}

#[test]
fn reports_are_reproducible_across_thread_counts() {
    let mut a = small();
    a.threads = 1;
    let mut b = small();
    b.threads = 3;
    let (ra, rb) = (run_experiment(&a).unwrap(), run_experiment(&b).unwrap());
    assert_eq!(ra.sweep_csv(), rb.sweep_csv());
    assert_eq!(ra.balance_csv(), rb.balance_csv());
    assert_eq!(ra.predictions, rb.predictions);

    let dir = tempfile::tempdir().unwrap();
    ra.write(dir.path()).unwrap();
    for f in [
        "config.toml",
        "sweep.csv",
        "label_balance.csv",
        "summary.txt",
        "preds_tp3.csv",
        "preds_tp9.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn no_test_sequence_reaches_training() {
    let cfg = small();
    let sequences = generate_dataset(&cfg.scenario).unwrap();
    let tracks = track_all(&cfg.scenario, &cfg.pipeline, &sequences, 0).unwrap();
    let ds = TrackingDataset::build(&tracks, &cfg.labels, &cfg.split, cfg.k_max_cap).unwrap();
    let splits = split_sequences(sequences.len(), &cfg.split).unwrap();
    let of = |s: Split| -> BTreeSet<usize> { ds.subset(s).map(|r| r.sequence).collect() };
    let (train, test) = (of(Split::Train), of(Split::Test));
    assert!(train.is_disjoint(&test));
    assert!(train.iter().all(|i| splits[*i] == Split::Train));
    assert!(test.iter().all(|i| splits[*i] == Split::Test));

    let (x, _) = ds.xy(Split::Train, 9).unwrap();
    let test_rows: Vec<&Vec<f64>> = ds.subset(Split::Test).map(|r| &r.features).collect();
    assert!(x.iter().all(|row| !test_rows.contains(&row)));

    let report = run_experiment(&cfg).unwrap();
    for (_, preds) in &report.predictions {
        assert!(preds.iter().all(|p| splits[p.sequence_id] == Split::Test));
    }
}

#[test]
fn neural_import_scores_external_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.mode = PredictorMode::NeuralImport;
    cfg.predictions_dir = Some(dir.path().to_path_buf());

    let sequences = generate_dataset(&cfg.scenario).unwrap();
    let splits = split_sequences(sequences.len(), &cfg.split).unwrap();
    let blocked: Vec<(usize, &[bool])> = sequences
        .iter()
        .map(|s| (s.id, s.blocked.as_slice()))
        .collect();
    let samples = label_samples(&blocked, &splits, &cfg.labels);
    for &t_p in &cfg.sweep {
        // t_p = 3 gets a predictor that always says "blocked".
        let rows: Vec<PredictionRow> = samples
            .iter()
            .filter(|s| s.split == Split::Test)
            .map(|s| {
                let pred = if t_p == 3 {
                    true
                } else {
                    s.label(t_p).unwrap()
                };
                PredictionRow {
                    sequence_id: s.sequence,
                    frame: s.frame,
                    prob: f64::from(u8::from(pred)),
                    pred: u8::from(pred),
                }
            })
            .collect();
        write_predictions(&dir.path().join(format!("preds_tp{t_p}.csv")), &rows).unwrap();
    }
    let report = run_experiment(&cfg).unwrap();
    let perfect = &report.row(9).unwrap().metrics;
    assert_eq!((perfect.accuracy, perfect.f1), (Some(1.0), Some(1.0)));
    let always = &report.row(3).unwrap().metrics;
    assert_eq!(always.recall, Some(1.0));
    assert_eq!(always.confusion.tn, 0);
    assert_eq!(always.precision, Some(3.0 / 29.0));

    std::fs::remove_file(dir.path().join("preds_tp3.csv")).unwrap();
    assert!(run_experiment(&cfg).is_err());
}
