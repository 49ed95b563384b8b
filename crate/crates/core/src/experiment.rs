//! Dataset construction, k-NN evaluation and prediction-horizon sweeps.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::io::{self, PredictionRow, SampleRow};
use crate::metrics::{evaluate, fmt_metric, MetricsReport};
use crate::pipeline::{track_sequence, Detector, PipelineConfig, SequenceTracks};
use crate::predict::{
    future_label, k_max_from, sample_frames, split_sequences, stack_states, KnnConfig, KnnModel,
    LabelConfig, Split, SplitConfig,
};
use crate::sim::{generate_dataset, ScenarioConfig, Sequence};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorMode {
    /// Tracking plus k-NN, run in process.
    #[default]
    Tracking,
    /// Predictions read from files written by an external model.
    NeuralImport,
}

impl PredictorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictorMode::Tracking => "tracking",
            PredictorMode::NeuralImport => "neural-import",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario file; when set it replaces the inline `scenario` table.
    pub scenario_path: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    pub pipeline: PipelineConfig,
    pub labels: LabelConfig,
    pub split: SplitConfig,
    pub knn: KnnConfig,
    /// Upper bound on stacked tracks per feature vector.
    pub k_max_cap: usize,
    /// Prediction windows (frames) to evaluate.
    pub sweep: Vec<usize>,
    pub mode: PredictorMode,
    /// Directory with `preds_tp<N>.csv` files for [`PredictorMode::NeuralImport`].
    pub predictions_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Worker threads for per-sequence processing; 0 uses all cores.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario_path: None,
            scenario: ScenarioConfig::default(),
            pipeline: PipelineConfig::default(),
            labels: LabelConfig::default(),
            split: SplitConfig::default(),
            knn: KnnConfig::default(),
            k_max_cap: 5,
            sweep: (1..=10).collect(),
            mode: PredictorMode::Tracking,
            predictions_dir: None,
            output_dir: None,
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Loads a config file; a relative `scenario_path` is resolved against
    /// the file's directory and loaded.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&io::read_text(path)?)
            .map_err(|e| e.context(format!("parsing {}", path.display())))?;
        if let Some(p) = cfg.scenario_path.take() {
            let p = if p.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(p)
            } else {
                p
            };
            cfg.scenario = ScenarioConfig::load(&p)?;
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.pipeline.validate(&self.scenario.radar)?;
        self.labels.validate()?;
        if self.sweep.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep must list at least one t_p".into(),
            ));
        }
        for &t_p in &self.sweep {
            self.labels.check_t_p(t_p)?;
        }
        if self.knn.k.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "k must be odd, got {}",
                self.knn.k
            )));
        }
        if self.mode == PredictorMode::NeuralImport && self.predictions_dir.is_none() {
            return Err(Error::InvalidConfig(
                "neural-import mode needs predictions_dir".into(),
            ));
        }
        Ok(())
    }
}

fn worker_count(requested: usize) -> usize {
    match requested {
        0 => std::thread::available_parallelism().map_or(1, usize::from),
        n => n,
    }
}

/// Tracks every sequence, spreading sequences over `threads` workers.
/// Output order follows the input regardless of thread count.
pub fn track_all(
    scenario: &ScenarioConfig,
    pipeline: &PipelineConfig,
    sequences: &[Sequence],
    threads: usize,
) -> Result<Vec<SequenceTracks>> {
    let detector = Detector::new(&scenario.radar, pipeline)?;
    let workers = worker_count(threads).clamp(1, sequences.len().max(1));
    if workers == 1 {
        return sequences
            .iter()
            .map(|s| track_sequence(&detector, s, scenario))
            .collect();
    }
    let chunk = sequences.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = sequences
            .chunks(chunk)
            .map(|part| {
                let detector = &detector;
                scope.spawn(move || {
                    part.iter()
                        .map(|s| track_sequence(detector, s, scenario))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(sequences.len());
        for h in handles {
            out.extend(h.join().expect("tracking worker panicked")?);
        }
        Ok(out)
    })
}

/// Future labels of one frame for `t_p = 1..=horizon`.
fn future_bits(blocked: &[bool], t: usize, horizon: usize) -> Option<Vec<bool>> {
    (1..=horizon)
        .map(|t_p| future_label(blocked, t, t_p))
        .collect()
}

/// Label-only samples of a dataset (no features).
pub fn label_samples(
    blocked: &[(usize, &[bool])],
    splits: &[Split],
    labels: &LabelConfig,
) -> Vec<SampleRow> {
    let mut out = Vec::new();
    for (i, (seq, b)) in blocked.iter().enumerate() {
        for t in sample_frames(b.len(), labels) {
            if let Some(future) = future_bits(b, t, labels.horizon) {
                out.push(SampleRow {
                    sequence: *seq,
                    frame: t,
                    split: splits[i],
                    future,
                    features: Vec::new(),
                });
            }
        }
    }
    out
}

/// Stacked-track samples of every tracked sequence.
#[derive(Debug, Clone)]
pub struct TrackingDataset {
    pub k_max: usize,
    pub horizon: usize,
    pub samples: Vec<SampleRow>,
}

impl TrackingDataset {
    /// Splits sequences, fixes `k_max` from the training tracks and stacks
    /// the features of every sample frame.
    pub fn build(
        tracks: &[SequenceTracks],
        labels: &LabelConfig,
        split: &SplitConfig,
        k_max_cap: usize,
    ) -> Result<Self> {
        let splits = split_sequences(tracks.len(), split)?;
        let k_max = k_max_from(
            tracks
                .iter()
                .zip(&splits)
                .filter(|(_, s)| **s == Split::Train)
                .flat_map(|(t, _)| t.track_sets()),
            k_max_cap,
        )
        .max(1);
        let blocked: Vec<(usize, &[bool])> = tracks
            .iter()
            .map(|t| (t.sequence, t.blocked.as_slice()))
            .collect();
        let mut samples = label_samples(&blocked, &splits, labels);
        let by_seq: HashMap<usize, &SequenceTracks> =
            tracks.iter().map(|t| (t.sequence, t)).collect();
        for s in &mut samples {
            s.features = stack_states(&by_seq[&s.sequence].frames[s.frame].tracks, k_max).values;
        }
        Ok(Self {
            k_max,
            horizon: labels.horizon,
            samples,
        })
    }

    /// Reassembles a dataset from stored samples.
    pub fn from_samples(samples: Vec<SampleRow>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Data("no samples".into()))?;
        let dim = first.features.len();
        if dim == 0 || dim % 4 != 0 {
            return Err(Error::Data(format!(
                "feature length {dim} is not a positive multiple of 4"
            )));
        }
        Ok(Self {
            k_max: dim / 4,
            horizon: first.future.len(),
            samples,
        })
    }

    pub fn subset(&self, split: Split) -> impl Iterator<Item = &SampleRow> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    /// Features and labels of one split at prediction window `t_p`.
    pub fn xy(&self, split: Split, t_p: usize) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
        if t_p < 1 || t_p > self.horizon {
            return Err(Error::InvalidConfig(format!(
                "t_p = {t_p} is outside 1..={}",
                self.horizon
            )));
        }
        Ok(self
            .subset(split)
            .map(|s| (s.features.clone(), s.future[t_p - 1]))
            .unzip())
    }

    pub fn fit(&self, t_p: usize, knn: &KnnConfig) -> Result<KnnModel> {
        let (x, y) = self.xy(Split::Train, t_p)?;
        KnnModel::fit(&x, &y, knn)
    }
}

/// Predicts every sample of `split` with a fitted model.
pub fn predict_samples<'a>(
    model: &KnnModel,
    samples: impl IntoIterator<Item = &'a SampleRow>,
) -> Result<Vec<PredictionRow>> {
    samples
        .into_iter()
        .map(|s| {
            let prob = model.predict_proba(&s.features)?;
            Ok(PredictionRow {
                sequence_id: s.sequence,
                frame: s.frame,
                prob,
                pred: u8::from(prob > 0.5),
            })
        })
        .collect()
}

/// Joins predictions to sample labels by `(sequence, frame)` and evaluates.
/// Every prediction must match a sample of the given split.
pub fn evaluate_predictions(
    predictions: &[PredictionRow],
    samples: &[SampleRow],
    split: Split,
    t_p: usize,
) -> Result<MetricsReport> {
    let lookup: HashMap<(usize, usize), &SampleRow> = samples
        .iter()
        .filter(|s| s.split == split)
        .map(|s| ((s.sequence, s.frame), s))
        .collect();
    let mut preds = Vec::with_capacity(predictions.len());
    let mut labels = Vec::with_capacity(predictions.len());
    for p in predictions {
        let s = lookup.get(&(p.sequence_id, p.frame)).ok_or_else(|| {
            Error::Data(format!(
                "prediction for sequence {} frame {} has no {split} sample",
                p.sequence_id, p.frame
            ))
        })?;
        labels.push(
            s.label(t_p)
                .ok_or_else(|| Error::Data(format!("sample has no label for t_p = {t_p}")))?,
        );
        preds.push(p.pred == 1);
    }
    evaluate(&preds, &labels)
}

/// One row of the horizon sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub t_p: usize,
    pub seconds: f64,
    pub metrics: MetricsReport,
}

/// Positive-label fraction per split for one prediction window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceRow {
    pub t_p: usize,
    pub seconds: f64,
    pub samples: usize,
    pub blocked_all: f64,
    pub blocked_train: Option<f64>,
    pub blocked_test: Option<f64>,
}

pub fn label_balance(
    samples: &[SampleRow],
    t_ps: &[usize],
    frame_s: f64,
) -> Result<Vec<BalanceRow>> {
    let frac = |split: Option<Split>, t_p: usize| -> Option<f64> {
        let sel: Vec<bool> = samples
            .iter()
            .filter(|s| split.is_none_or(|sp| s.split == sp))
            .filter_map(|s| s.label(t_p))
            .collect();
        (!sel.is_empty()).then(|| sel.iter().filter(|b| **b).count() as f64 / sel.len() as f64)
    };
    t_ps.iter()
        .map(|&t_p| {
            Ok(BalanceRow {
                t_p,
                seconds: t_p as f64 * frame_s,
                samples: samples.len(),
                blocked_all: frac(None, t_p)
                    .ok_or_else(|| Error::Data(format!("no labels for t_p = {t_p}")))?,
                blocked_train: frac(Some(Split::Train), t_p),
                blocked_test: frac(Some(Split::Test), t_p),
            })
        })
        .collect()
}

/// Test-split predictions for one `t_p`.
pub type TpPredictions = (usize, Vec<PredictionRow>);

/// Everything produced by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub k_max: Option<usize>,
    pub sweep: Vec<SweepRow>,
    pub balance: Vec<BalanceRow>,
    /// Test predictions per swept `t_p` (tracking mode only).
    pub predictions: Vec<TpPredictions>,
}

impl ExperimentReport {
    pub fn row(&self, t_p: usize) -> Option<&SweepRow> {
        self.sweep.iter().find(|r| r.t_p == t_p)
    }

    pub fn sweep_csv(&self) -> String {
        let mut s = String::from(
            "t_p,seconds,accuracy,precision,recall,f1,tp,fp,tn,fn,label_positive,predicted_positive\n",
        );
        for r in &self.sweep {
            let m = &r.metrics;
            let c = m.confusion;
            writeln!(
                s,
                "{},{:.6},{},{},{},{},{},{},{},{},{},{}",
                r.t_p,
                r.seconds,
                fmt_metric(m.accuracy),
                fmt_metric(m.precision),
                fmt_metric(m.recall),
                fmt_metric(m.f1),
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                fmt_metric(m.label_positive),
                fmt_metric(m.predicted_positive)
            )
            .unwrap();
        }
        s
    }

    pub fn balance_csv(&self) -> String {
        let mut s = String::from("t_p,seconds,samples,blocked_all,blocked_train,blocked_test\n");
        for b in &self.balance {
            writeln!(
                s,
                "{},{:.6},{},{:.6},{},{}",
                b.t_p,
                b.seconds,
                b.samples,
                b.blocked_all,
                fmt_metric(b.blocked_train),
                fmt_metric(b.blocked_test)
            )
            .unwrap();
        }
        s
    }

    pub fn summary(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        writeln!(s, "mode: {}", c.mode.as_str()).unwrap();
        writeln!(
            s,
            "sequences: {} (seed {})",
            c.scenario.sequences, c.scenario.seed
        )
        .unwrap();
        writeln!(
            s,
            "split: train {} / val {} (seed {})",
            c.split.train, c.split.val, c.split.seed
        )
        .unwrap();
        if let Some(k) = self.k_max {
            writeln!(
                s,
                "k-NN: k = {}, standardize = {}, K_max = {k}",
                c.knn.k, c.knn.standardize
            )
            .unwrap();
        }
        writeln!(s).unwrap();
        writeln!(
            s,
            "{:>4} {:>7} {:>9} {:>9} {:>9} {:>9} {:>8}",
            "t_p", "seconds", "accuracy", "precision", "recall", "f1", "blocked"
        )
        .unwrap();
        for r in &self.sweep {
            let m = &r.metrics;
            let blocked = self
                .balance
                .iter()
                .find(|b| b.t_p == r.t_p)
                .map(|b| b.blocked_all);
            writeln!(
                s,
                "{:>4} {:>7.3} {:>9} {:>9} {:>9} {:>9} {:>8}",
                r.t_p,
                r.seconds,
                fmt_metric(m.accuracy),
                fmt_metric(m.precision),
                fmt_metric(m.recall),
                fmt_metric(m.f1),
                fmt_metric(blocked)
            )
            .unwrap();
        }
        s
    }

    /// Writes the resolved config, sweep table, label balance, summary and
    /// per-horizon test predictions into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::ensure_dir(dir)?;
        io::write_text(&dir.join("config.toml"), &self.config.to_toml_string())?;
        io::write_text(&dir.join("sweep.csv"), &self.sweep_csv())?;
        io::write_text(&dir.join("label_balance.csv"), &self.balance_csv())?;
        io::write_text(&dir.join("summary.txt"), &self.summary())?;
        for (t_p, rows) in &self.predictions {
            io::write_predictions(&dir.join(format!("preds_tp{t_p}.csv")), rows)?;
        }
        Ok(())
    }
}

/// Sweeps the configured horizons over an already built dataset.
pub fn sweep_tracking(
    dataset: &TrackingDataset,
    t_ps: &[usize],
    knn: &KnnConfig,
    frame_s: f64,
) -> Result<(Vec<SweepRow>, Vec<TpPredictions>)> {
    let mut rows = Vec::new();
    let mut preds = Vec::new();
    for &t_p in t_ps {
        let model = dataset
            .fit(t_p, knn)
            .map_err(|e| e.context(format!("fitting t_p = {t_p}")))?;
        let p = predict_samples(&model, dataset.subset(Split::Test))?;
        let metrics = evaluate_predictions(&p, &dataset.samples, Split::Test, t_p)?;
        rows.push(SweepRow {
            t_p,
            seconds: t_p as f64 * frame_s,
            metrics,
        });
        preds.push((t_p, p));
    }
    Ok((rows, preds))
}

/// Runs the configured experiment end to end; writes reports when an
/// output directory is configured.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let frame_s = config.scenario.radar.frame_s;
    let sequences =
        generate_dataset(&config.scenario).map_err(|e| e.context("generating scenes"))?;
    let report = match config.mode {
        PredictorMode::Tracking => {
            let tracks = track_all(
                &config.scenario,
                &config.pipeline,
                &sequences,
                config.threads,
            )
            .map_err(|e| e.context("tracking"))?;
            let dataset =
                TrackingDataset::build(&tracks, &config.labels, &config.split, config.k_max_cap)?;
            let (sweep, predictions) =
                sweep_tracking(&dataset, &config.sweep, &config.knn, frame_s)?;
            ExperimentReport {
                config: config.clone(),
                k_max: Some(dataset.k_max),
                balance: label_balance(&dataset.samples, &config.sweep, frame_s)?,
                sweep,
                predictions,
            }
        }
        PredictorMode::NeuralImport => {
            let dir = config.predictions_dir.as_ref().expect("validated");
            let splits = split_sequences(sequences.len(), &config.split)?;
            let blocked: Vec<(usize, &[bool])> = sequences
                .iter()
                .map(|s| (s.id, s.blocked.as_slice()))
                .collect();
            let samples = label_samples(&blocked, &splits, &config.labels);
            let mut sweep = Vec::new();
            for &t_p in &config.sweep {
                let path = dir.join(format!("preds_tp{t_p}.csv"));
                let preds = io::read_predictions(&path)?;
                let metrics = evaluate_predictions(&preds, &samples, Split::Test, t_p)
                    .map_err(|e| e.context(format!("evaluating {}", path.display())))?;
                sweep.push(SweepRow {
                    t_p,
                    seconds: t_p as f64 * frame_s,
                    metrics,
                });
            }
            ExperimentReport {
                config: config.clone(),
                k_max: None,
                balance: label_balance(&samples, &config.sweep, frame_s)?,
                sweep,
                predictions: Vec::new(),
            }
        }
    };
    if let Some(dir) = &config.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_samples_use_shared_frames() {
        let mut b = vec![false; 46];
        b[36..40].iter_mut().for_each(|x| *x = true);
        let s = label_samples(
            &[(4, b.as_slice())],
            &[Split::Train],
            &LabelConfig::default(),
        );
        assert_eq!(s.len(), 29);
        assert_eq!(s[0].frame, 7);
        assert_eq!(s.last().unwrap().frame, 35);
        assert!(s.iter().all(|r| r.sequence == 4 && r.future.len() == 10));
        let pos = |t_p: usize| s.iter().filter(|r| r.label(t_p) == Some(true)).count();
        assert_eq!(pos(1), 1);
        assert_eq!(pos(9), 9);
    }

    #[test]
    fn balance_is_monotone_here() {
        let mut b = vec![false; 46];
        b[36] = true;
        let s = label_samples(
            &[(0, b.as_slice())],
            &[Split::Test],
            &LabelConfig::default(),
        );
        let rows = label_balance(&s, &[1, 2, 3], 1.0 / 9.0).unwrap();
        assert!(rows
            .windows(2)
            .all(|w| w[0].blocked_all <= w[1].blocked_all));
        assert_eq!(rows[0].blocked_train, None);
    }

    #[test]
    fn unknown_prediction_rows_are_errors() {
        let samples = vec![SampleRow {
            sequence: 0,
            frame: 7,
            split: Split::Test,
            future: vec![true],
            features: vec![],
        }];
        let ok = [PredictionRow {
            sequence_id: 0,
            frame: 7,
            prob: 0.9,
            pred: 1,
        }];
        assert_eq!(
            evaluate_predictions(&ok, &samples, Split::Test, 1)
                .unwrap()
                .accuracy,
            Some(1.0)
        );
        let bad = [PredictionRow {
            sequence_id: 0,
            frame: 8,
            prob: 0.9,
            pred: 1,
        }];
        assert!(evaluate_predictions(&bad, &samples, Split::Test, 1).is_err());
        assert!(evaluate_predictions(&ok, &samples, Split::Train, 1).is_err());
    }

    #[test]
    fn config_round_trip_and_validation() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
        let bad = ExperimentConfig {
            sweep: vec![11],
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            mode: PredictorMode::NeuralImport,
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
