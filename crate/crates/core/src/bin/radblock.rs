use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use radblock::dsp::range_angle_map;
use radblock::experiment::{
    evaluate_predictions, label_samples, predict_samples, run_experiment, track_all,
    ExperimentConfig, TrackingDataset,
};
use radblock::io::{self, Header, RaWindowRow};
use radblock::metrics::{fmt_metric, MetricsReport};
use radblock::pipeline::Detector;
use radblock::predict::{sample_frames, split_sequences, KnnConfig, KnnModel, Split};
use radblock::sim::{generate_dataset, Sequence};
use radblock::{Error, Result};

#[derive(Parser)]
#[command(
    name = "radblock",
    version,
    about = "Radar-aided mmWave blockage prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML). Defaults are used when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set scenario.seed=4` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct Selection {
    /// Comma-separated sequence ids; all sequences when omitted.
    #[arg(long, value_delimiter = ',')]
    sequences: Vec<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes and ground truth; optionally write raw IF frames.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        select: Selection,
        /// Also write raw frames (2 MiB per frame).
        #[arg(long)]
        frames: bool,
    },
    /// Write range-velocity and range-angle maps for selected sequences.
    Process {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        select: Selection,
        /// Also write PGM previews.
        #[arg(long)]
        pgm: bool,
    },
    /// Run CFAR and clustering; writes detections.csv.
    Detect {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        select: Selection,
    },
    /// Run the full tracker; writes track_log.csv.
    Track {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        select: Selection,
    },
    /// Track every sequence and write stacked-track samples.
    BuildDataset {
        #[command(flatten)]
        common: Common,
    },
    /// Fit a k-NN model on the training split of a samples table.
    FitKnn(FitArgs),
    /// Predict one split of a samples table with a stored model.
    Predict(PredictArgs),
    /// Evaluate a predictions file against sample labels.
    Evaluate(EvalArgs),
    /// Full experiment over the configured prediction windows.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Write range-angle map windows and labels for external predictors.
    ExportRa {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        select: Selection,
    },
    /// Evaluate predictions produced from an export-ra manifest.
    ImportPreds(EvalArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, default_value_t = 9)]
    t_p: usize,
    #[arg(long, default_value_t = KnnConfig::default().k)]
    k: usize,
    #[arg(long)]
    no_standardize: bool,
    /// Output model file.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Output predictions file.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    predictions: PathBuf,
    /// Samples table or export-ra manifest holding the labels.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 9)]
    t_p: usize,
    #[arg(long, default_value = "test")]
    split: String,
    /// Output report file.
    #[arg(long, short)]
    out: PathBuf,
}

fn set_key(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override {assignment:?} is not KEY=VALUE")))?;
    let value: toml::Value = format!("v = {raw}")
        .parse::<toml::Table>()
        .map(|mut t| t.remove("v").expect("parsed key"))
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut table = root;
    for p in path {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("{key}: {p} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn resolve_config(common: &Common) -> Result<ExperimentConfig> {
    let base = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if common.overrides.is_empty() {
        base.validate()?;
        return Ok(base);
    }
    let mut table: toml::Table = base.to_toml_string().parse()?;
    for o in &common.overrides {
        set_key(&mut table, o)?;
    }
    let cfg = ExperimentConfig::from_toml_str(&table.to_string())?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    argv: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a ExperimentConfig>,
}

/// Records the command line and resolved config next to the outputs:
/// `run.toml` inside an output directory, `<file>.run.toml` beside an
/// output file.
fn write_run(
    out: &Path,
    is_dir: bool,
    command: &str,
    config: Option<&ExperimentConfig>,
) -> Result<()> {
    let path = if is_dir {
        io::ensure_dir(out)?;
        out.join("run.toml")
    } else {
        io::ensure_dir(&out_dir_of(out))?;
        let mut name = out.as_os_str().to_owned();
        name.push(".run.toml");
        PathBuf::from(name)
    };
    let record = RunRecord {
        command,
        argv: std::env::args().collect(),
        config,
    };
    let text = toml::to_string(&record)
        .map_err(|e| Error::Data(format!("serializing run record: {e}")))?;
    io::write_text(&path, &text)
}

fn out_dir_of(file: &Path) -> PathBuf {
    file.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn select<'a>(sequences: &'a [Sequence], sel: &Selection) -> Result<Vec<&'a Sequence>> {
    if sel.sequences.is_empty() {
        return Ok(sequences.iter().collect());
    }
    sel.sequences
        .iter()
        .map(|&i| {
            sequences
                .get(i)
                .ok_or_else(|| Error::InvalidConfig(format!("sequence {i} does not exist")))
        })
        .collect()
}

fn parse_split(s: &str) -> Result<Split> {
    s.parse()
}

fn metrics_text(m: &MetricsReport, t_p: usize, frame_s: Option<f64>) -> String {
    let c = m.confusion;
    let mut s = format!("t_p={t_p}\n");
    if let Some(f) = frame_s {
        s.push_str(&format!("seconds={:.6}\n", t_p as f64 * f));
    }
    s.push_str(&format!(
        "samples={}\naccuracy={}\nprecision={}\nrecall={}\nf1={}\ntp={}\nfp={}\ntn={}\nfn={}\nlabel_positive={}\npredicted_positive={}\n",
        c.total(),
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
    ));
    s
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            common,
            select: sel,
            frames,
        } => {
            let cfg = resolve_config(&common)?;
            write_run(&common.out, true, "simulate", Some(&cfg))?;
            let all = generate_dataset(&cfg.scenario)?;
            let chosen: Vec<Sequence> = select(&all, &sel)?.into_iter().cloned().collect();
            io::write_manifest(&common.out.join("manifest.csv"), &chosen)?;
            io::write_text(
                &common.out.join("scenario.toml"),
                &cfg.scenario.to_toml_string(),
            )?;
            if frames {
                let dir = common.out.join("frames");
                io::ensure_dir(&dir)?;
                for s in &chosen {
                    let cubes = (0..s.len())
                        .map(|k| {
                            s.synth_frame(
                                k,
                                &cfg.scenario.radar,
                                &cfg.scenario.synth,
                                cfg.scenario.seed,
                            )
                        })
                        .collect::<Result<Vec<_>>>()?;
                    io::write_frames(&dir.join(format!("seq_{:04}.bin", s.id)), &cubes)?;
                }
            }
            println!(
                "{} sequences written to {}",
                chosen.len(),
                common.out.display()
            );
        }
        Command::Process {
            common,
            select: sel,
            pgm,
        } => {
            let cfg = resolve_config(&common)?;
            write_run(&common.out, true, "process", Some(&cfg))?;
            let all = generate_dataset(&cfg.scenario)?;
            let sel = if sel.sequences.is_empty() {
                Selection { sequences: vec![0] }
            } else {
                sel
            };
            let detector = Detector::new(&cfg.scenario.radar, &cfg.pipeline)?;
            let p = detector.processor();
            for s in select(&all, &sel)? {
                let mut rv = Vec::new();
                let mut ra = Vec::new();
                for k in 0..s.len() {
                    let frame = s.synth_frame(
                        k,
                        &cfg.scenario.radar,
                        &cfg.scenario.synth,
                        cfg.scenario.seed,
                    )?;
                    let rd = p.range_doppler(&frame)?;
                    rv.push(p.range_velocity_map_fast(&rd).data);
                    ra.push(range_angle_map(&p.cube_from_range_doppler(&rd)).data);
                }
                let mut h = Header::new();
                h.insert("sequence".into(), s.id.to_string());
                io::write_map(
                    &common.out.join(format!("rv_{:04}.f32", s.id)),
                    &rv.iter().collect::<Vec<_>>(),
                    ["range", "velocity"],
                    &h,
                )?;
                io::write_map(
                    &common.out.join(format!("ra_{:04}.f32", s.id)),
                    &ra.iter().collect::<Vec<_>>(),
                    ["range", "angle"],
                    &h,
                )?;
                if pgm {
                    for (k, (a, b)) in rv.iter().zip(&ra).enumerate() {
                        io::write_pgm(&common.out.join(format!("rv_{:04}_{k:03}.pgm", s.id)), a)?;
                        io::write_pgm(&common.out.join(format!("ra_{:04}_{k:03}.pgm", s.id)), b)?;
                    }
                }
            }
        }
        Command::Detect {
            common,
            select: sel,
        } => {
            let cfg = resolve_config(&common)?;
            write_run(&common.out, true, "detect", Some(&cfg))?;
            let all = generate_dataset(&cfg.scenario)?;
            let detector = Detector::new(&cfg.scenario.radar, &cfg.pipeline)?;
            let mut rows = Vec::new();
            for s in select(&all, &sel)? {
                for k in 0..s.len() {
                    let frame = s.synth_frame(
                        k,
                        &cfg.scenario.radar,
                        &cfg.scenario.synth,
                        cfg.scenario.seed,
                    )?;
                    let out = detector.process(&frame)?;
                    rows.push((s.id, k, out.detections, out.clusters));
                }
            }
            io::write_detections(
                &common.out.join("detections.csv"),
                rows.iter().map(|(s, k, d, c)| (*s, *k, d.as_slice(), *c)),
            )?;
        }
        Command::Track {
            common,
            select: sel,
        } => {
            let cfg = resolve_config(&common)?;
            write_run(&common.out, true, "track", Some(&cfg))?;
            let all = generate_dataset(&cfg.scenario)?;
            let chosen: Vec<Sequence> = select(&all, &sel)?.into_iter().cloned().collect();
            let tracks = track_all(&cfg.scenario, &cfg.pipeline, &chosen, cfg.threads)?;
            io::write_track_log(&common.out.join("track_log.csv"), &tracks)?;
        }
        Command::BuildDataset { common } => {
            let cfg = resolve_config(&common)?;
            write_run(&common.out, true, "build-dataset", Some(&cfg))?;
            let all = generate_dataset(&cfg.scenario)?;
            let tracks = track_all(&cfg.scenario, &cfg.pipeline, &all, cfg.threads)?;
            let ds = TrackingDataset::build(&tracks, &cfg.labels, &cfg.split, cfg.k_max_cap)?;
            io::write_samples(&common.out.join("samples.csv"), &ds.samples)?;
            println!("{} samples, K_max = {}", ds.samples.len(), ds.k_max);
        }
        Command::FitKnn(args) => {
            write_run(&args.out, false, "fit-knn", None)?;
            let ds = TrackingDataset::from_samples(io::read_samples(&args.samples)?)?;
            let knn = KnnConfig {
                k: args.k,
                standardize: !args.no_standardize,
            };
            let model: KnnModel = ds.fit(args.t_p, &knn)?;
            io::write_knn_model(&args.out, &model, args.t_p)?;
        }
        Command::Predict(args) => {
            write_run(&args.out, false, "predict", None)?;
            let (model, _) = io::read_knn_model(&args.model)?;
            let split = parse_split(&args.split)?;
            let samples = io::read_samples(&args.samples)?;
            let rows = predict_samples(&model, samples.iter().filter(|s| s.split == split))?;
            io::write_predictions(&args.out, &rows)?;
        }
        Command::Evaluate(args) | Command::ImportPreds(args) => {
            write_run(&args.out, false, "evaluate", None)?;
            let preds = io::read_predictions(&args.predictions)?;
            let samples = io::read_samples(&args.labels)?;
            let m = evaluate_predictions(&preds, &samples, parse_split(&args.split)?, args.t_p)?;
            let text = metrics_text(&m, args.t_p, None);
            io::write_text(&args.out, &text)?;
            print!("{text}");
        }
        Command::Sweep { common } => {
            let mut cfg = resolve_config(&common)?;
            cfg.output_dir = Some(common.out.clone());
            write_run(&common.out, true, "sweep", Some(&cfg))?;
            let report = run_experiment(&cfg)?;
            print!("{}", report.summary());
        }
        Command::ExportRa {
            common,
            select: sel,
        } => {
            let cfg = resolve_config(&common)?;
            write_run(&common.out, true, "export-ra", Some(&cfg))?;
            export_ra(&cfg, &common.out, &sel)?;
        }
    }
    Ok(())
}

/// One map file per sequence holding every frame's range-angle map, plus a
/// manifest with one row per `t_o`-frame window ending at a sample frame.
fn export_ra(cfg: &ExperimentConfig, out: &Path, sel: &Selection) -> Result<()> {
    let all = generate_dataset(&cfg.scenario)?;
    let splits = split_sequences(all.len(), &cfg.split)?;
    let detector = Detector::new(&cfg.scenario.radar, &cfg.pipeline)?;
    let p = detector.processor();
    let mut rows = Vec::new();
    for s in select(&all, sel)? {
        let mut maps = Vec::with_capacity(s.len());
        for k in 0..s.len() {
            let frame = s.synth_frame(
                k,
                &cfg.scenario.radar,
                &cfg.scenario.synth,
                cfg.scenario.seed,
            )?;
            let rd = p.range_doppler(&frame)?;
            maps.push(range_angle_map(&p.cube_from_range_doppler(&rd)).data);
        }
        let name = format!("ra_{:04}.f32", s.id);
        let mut h = Header::new();
        h.insert("sequence".into(), s.id.to_string());
        h.insert("normalization".into(), "none".into());
        io::write_map(
            &out.join(&name),
            &maps.iter().collect::<Vec<_>>(),
            ["range", "angle"],
            &h,
        )?;
        let samples = label_samples(
            &[(s.id, s.blocked.as_slice())],
            &[splits[s.id]],
            &cfg.labels,
        );
        debug_assert_eq!(samples.len(), sample_frames(s.len(), &cfg.labels).len());
        for sample in samples {
            rows.push(RaWindowRow {
                first_map: sample.frame + 1 - cfg.labels.t_o,
                window: cfg.labels.t_o,
                map_file: name.clone(),
                sample,
            });
        }
    }
    io::write_ra_manifest(&out.join("windows.csv"), &rows)?;
    println!("{} windows written to {}", rows.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
