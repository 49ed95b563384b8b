use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::{Detection, ObjectMeasurement};
use crate::pipeline::SequenceTracks;
use crate::predict::{KnnModel, Split, Standardizer};
use crate::sim::Sequence;
use crate::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn parse_bit(s: &str) -> Result<bool> {
    match s.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(Error::Data(format!("expected 0/1, got {other:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Data(format!("bad {what} value {s:?}")))
}

/// Per-frame ground truth: blockage and object states encoded as
/// `id:x:y:vx:vy` joined by `;`.
pub fn write_manifest(path: &Path, sequences: &[Sequence]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "sequence_id",
        "frame",
        "global_frame",
        "blocked",
        "blocker",
        "objects",
    ])?;
    for s in sequences {
        for (k, states) in s.truth.iter().enumerate() {
            let objects = states
                .iter()
                .map(|o| {
                    format!(
                        "{}:{:.4}:{:.4}:{:.4}:{:.4}",
                        o.id, o.position[0], o.position[1], o.velocity[0], o.velocity[1]
                    )
                })
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                s.id.to_string(),
                k.to_string(),
                (s.start_frame + k as u64).to_string(),
                bit(s.blocked[k]).to_string(),
                s.blocker.clone(),
                objects,
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// CFAR detections and extracted measurements per frame.
pub fn write_detections<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = (usize, usize, &'a [Detection], usize)>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "sequence_id",
        "frame",
        "range_bin",
        "velocity_bin",
        "magnitude",
        "clusters",
    ])?;
    for (seq, frame, dets, clusters) in rows {
        for d in dets {
            w.write_record([
                seq.to_string(),
                frame.to_string(),
                d.range_bin.to_string(),
                d.velocity_bin.to_string(),
                format!("{:.6e}", d.magnitude),
                clusters.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn fmt_measurement(m: Option<&ObjectMeasurement>) -> [String; 3] {
    match m {
        Some(m) => [
            format!("{:.6}", m.rho),
            format!("{:.6}", m.v),
            format!("{:.6}", m.theta),
        ],
        None => Default::default(),
    }
}

/// One row per live track per frame: state, covariance diagonal, counters
/// and the associated measurement (empty when the track coasted).
pub fn write_track_log(path: &Path, sequences: &[SequenceTracks]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "sequence_id",
        "frame",
        "track_id",
        "x",
        "y",
        "vx",
        "vy",
        "p_x",
        "p_y",
        "p_vx",
        "p_vy",
        "misses",
        "age",
        "hits",
        "meas_rho",
        "meas_v",
        "meas_theta",
    ])?;
    for s in sequences {
        for (k, f) in s.frames.iter().enumerate() {
            for t in &f.tracks {
                let m = f
                    .associations
                    .iter()
                    .find(|(id, _)| *id == t.id)
                    .map(|(_, mi)| &f.measurements[*mi]);
                let mut rec = vec![s.sequence.to_string(), k.to_string(), t.id.to_string()];
                rec.extend(t.mean.iter().map(|v| format!("{v:.6}")));
                rec.extend((0..4).map(|i| format!("{:.6e}", t.covariance[(i, i)])));
                rec.extend([t.misses.to_string(), t.age.to_string(), t.hits.to_string()]);
                rec.extend(fmt_measurement(m));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One sample: identity, split, future labels for `t_p = 1..=horizon` and
/// the stacked track features (empty for map-window manifests).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub sequence: usize,
    pub frame: usize,
    pub split: Split,
    pub future: Vec<bool>,
    pub features: Vec<f64>,
}

impl SampleRow {
    /// Label at prediction window `t_p` (1-based).
    pub fn label(&self, t_p: usize) -> Option<bool> {
        t_p.checked_sub(1).and_then(|i| self.future.get(i).copied())
    }
}

fn sample_header(horizon: usize, dim: usize) -> Vec<String> {
    let mut h = vec!["sequence_id".to_string(), "frame".into(), "split".into()];
    h.extend((1..=horizon).map(|t| format!("label_tp{t}")));
    h.extend((0..dim).map(|i| format!("f{i}")));
    h
}

fn sample_record(r: &SampleRow) -> Vec<String> {
    let mut rec = vec![
        r.sequence.to_string(),
        r.frame.to_string(),
        r.split.to_string(),
    ];
    rec.extend(r.future.iter().map(|b| bit(*b).to_string()));
    rec.extend(r.features.iter().map(|v| format!("{v}")));
    rec
}

fn check_row_shape(r: &SampleRow, horizon: usize, dim: usize) -> Result<()> {
    if r.future.len() != horizon || r.features.len() != dim {
        return Err(Error::ShapeMismatch {
            expected: format!("{horizon} labels and {dim} features"),
            actual: format!(
                "{} labels and {} features",
                r.future.len(),
                r.features.len()
            ),
        });
    }
    Ok(())
}

pub fn write_samples(path: &Path, rows: &[SampleRow]) -> Result<()> {
    let horizon = rows.first().map_or(0, |r| r.future.len());
    let dim = rows.first().map_or(0, |r| r.features.len());
    let mut w = writer(path)?;
    w.write_record(sample_header(horizon, dim))?;
    for r in rows {
        check_row_shape(r, horizon, dim)?;
        w.write_record(sample_record(r))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a samples table. Columns are located by name, so map-window
/// manifests (no feature columns, extra file columns) parse as well.
pub fn read_samples(path: &Path) -> Result<Vec<SampleRow>> {
    let mut r = reader(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("{}: missing column {name}", path.display())))
    };
    let (c_seq, c_frame, c_split) = (col("sequence_id")?, col("frame")?, col("split")?);
    let indexed = |prefix: &str| -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = headers
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.strip_prefix(prefix)?.parse().ok().map(|n| (n, i)))
            .collect();
        v.sort();
        v
    };
    let labels = indexed("label_tp");
    let feats = indexed("f");
    if labels.iter().enumerate().any(|(i, (n, _))| *n != i + 1) {
        return Err(Error::Data(format!(
            "{}: label columns must be label_tp1..",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(SampleRow {
            sequence: parse_num(&rec[c_seq], "sequence_id")?,
            frame: parse_num(&rec[c_frame], "frame")?,
            split: rec[c_split].parse()?,
            future: labels
                .iter()
                .map(|(_, i)| parse_bit(&rec[*i]))
                .collect::<Result<_>>()?,
            features: feats
                .iter()
                .map(|(_, i)| parse_num(&rec[*i], "feature"))
                .collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

/// Rows of the map-window manifest consumed by external predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct RaWindowRow {
    pub sample: SampleRow,
    /// Map file of the sequence, relative to the manifest.
    pub map_file: String,
    /// First map index of the window inside `map_file`.
    pub first_map: usize,
    pub window: usize,
}

pub fn write_ra_manifest(path: &Path, rows: &[RaWindowRow]) -> Result<()> {
    let horizon = rows.first().map_or(0, |r| r.sample.future.len());
    let mut w = writer(path)?;
    let mut header = sample_header(horizon, 0);
    header.extend(["map_file".into(), "first_map".into(), "window".into()]);
    w.write_record(&header)?;
    for r in rows {
        check_row_shape(&r.sample, horizon, 0)?;
        let mut rec = sample_record(&r.sample);
        rec.extend([
            r.map_file.clone(),
            r.first_map.to_string(),
            r.window.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One prediction: probability and thresholded decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub sequence_id: usize,
    pub frame: usize,
    pub prob: f64,
    pub pred: u8,
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["sequence_id", "frame", "prob", "pred"])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut r = reader(path)?;
    let rows: Vec<PredictionRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    if let Some(bad) = rows.iter().find(|p| p.pred > 1) {
        return Err(Error::Data(format!(
            "pred must be 0 or 1, got {}",
            bad.pred
        )));
    }
    Ok(rows)
}

/// Stores the raw training matrix with the scaler and `k` in `#` comment
/// lines ahead of the table.
pub fn write_knn_model(path: &Path, model: &KnnModel, t_p: usize) -> Result<()> {
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let s = model.standardizer();
    let mut text = format!(
        "# k={}\n# dim={}\n# t_p={t_p}\n# mean={}\n# scale={}\n",
        model.k(),
        model.dim(),
        join(&s.mean),
        join(&s.scale)
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string()];
    header.extend((0..model.dim()).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for (row, label) in model.raw_rows().iter().zip(model.labels()) {
        let mut rec = vec![bit(*label).to_string()];
        rec.extend(row.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    let body = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    super::write_text(path, &text)
}

/// Returns the model and the prediction window it was trained for.
pub fn read_knn_model(path: &Path) -> Result<(KnnModel, usize)> {
    let text = super::read_text(path)?;
    let meta = |key: &str| -> Result<&str> {
        text.lines()
            .filter_map(|l| l.strip_prefix("# "))
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| Error::Data(format!("{}: missing {key} metadata", path.display())))
    };
    let floats = |s: &str| -> Result<Vec<f64>> {
        s.split_whitespace()
            .map(|v| parse_num(v, "scaler"))
            .collect()
    };
    let k: usize = parse_num(meta("k")?, "k")?;
    let dim: usize = parse_num(meta("dim")?, "dim")?;
    let t_p: usize = parse_num(meta("t_p")?, "t_p")?;
    let standardizer = Standardizer {
        mean: floats(meta("mean")?)?,
        scale: floats(meta("scale")?)?,
    };
    if standardizer.mean.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: standardizer.mean.len(),
        });
    }
    let mut r = reader(path)?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        labels.push(parse_bit(&rec[0])?);
        features.push(
            rec.iter()
                .skip(1)
                .map(|v| parse_num(v, "feature"))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok((
        KnnModel::from_parts(k, standardizer, &features, &labels)?,
        t_p,
    ))
}
