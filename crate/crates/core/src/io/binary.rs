use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use num_complex::Complex64;

use crate::sim::RadarFrameCube;
use crate::{Error, Result};

/// Ordered `key=value` metadata.
pub type Header = BTreeMap<String, String>;

fn header_path(data: &Path) -> PathBuf {
    data.with_extension("hdr")
}

pub fn write_header(data_path: &Path, header: &Header) -> Result<()> {
    let path = header_path(data_path);
    let text: String = header.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    super::write_text(&path, &text)
}

pub fn read_header(data_path: &Path) -> Result<Header> {
    let path = header_path(data_path);
    let text = super::read_text(&path)?;
    let mut h = Header::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Data(format!("{}:{}: expected key=value", path.display(), n + 1))
        })?;
        h.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(h)
}

fn header_usize(h: &Header, key: &str) -> Result<usize> {
    h.get(key)
        .ok_or_else(|| Error::Data(format!("header is missing {key}")))?
        .parse()
        .map_err(|_| Error::Data(format!("header field {key} is not an integer")))
}

fn write_f32s(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for v in values {
        w.write_all(&(v as f32).to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_f32s(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() != 4 * expected {
        return Err(Error::ShapeMismatch {
            expected: format!("{} bytes", 4 * expected),
            actual: format!("{} bytes in {}", bytes.len(), path.display()),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Writes frames as interleaved complex `f32`, frame-major then
/// antenna, sample, chirp.
pub fn write_frames(path: &Path, frames: &[RadarFrameCube]) -> Result<()> {
    let (m, s, l) = frames.first().map_or((0, 0, 0), |f| f.samples.dim());
    if let Some(bad) = frames.iter().find(|f| f.samples.dim() != (m, s, l)) {
        return Err(Error::ShapeMismatch {
            expected: format!("({m}, {s}, {l})"),
            actual: format!("{:?}", bad.samples.dim()),
        });
    }
    write_f32s(
        path,
        frames
            .iter()
            .flat_map(|f| f.samples.iter().flat_map(|c| [c.re, c.im])),
    )?;
    let mut h = Header::new();
    h.insert("dtype".into(), "complex64le".into());
    h.insert("layout".into(), "frame,antenna,sample,chirp".into());
    h.insert("frames".into(), frames.len().to_string());
    h.insert("antennas".into(), m.to_string());
    h.insert("samples".into(), s.to_string());
    h.insert("chirps".into(), l.to_string());
    h.insert(
        "frame_index".into(),
        frames
            .iter()
            .map(|f| f.frame.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    write_header(path, &h)
}

pub fn read_frames(path: &Path) -> Result<Vec<RadarFrameCube>> {
    let h = read_header(path)?;
    let (n, m, s, l) = (
        header_usize(&h, "frames")?,
        header_usize(&h, "antennas")?,
        header_usize(&h, "samples")?,
        header_usize(&h, "chirps")?,
    );
    let index: Vec<u64> = match h.get("frame_index").map(String::as_str) {
        None | Some("") => (0..n as u64).collect(),
        Some(list) => list
            .split(',')
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Data(format!("bad frame index {v:?}")))
            })
            .collect::<Result<_>>()?,
    };
    if index.len() != n {
        return Err(Error::Data(format!(
            "{} frame indices for {n} frames",
            index.len()
        )));
    }
    let per = m * s * l;
    let raw = read_f32s(path, 2 * n * per)?;
    Ok(raw
        .chunks_exact(2 * per)
        .zip(index)
        .map(|(chunk, frame)| {
            let data: Vec<Complex64> = chunk
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0] as f64, c[1] as f64))
                .collect();
            RadarFrameCube {
                samples: Array3::from_shape_vec((m, s, l), data).expect("length checked"),
                frame,
            }
        })
        .collect())
}

/// Writes a stack of equally shaped maps as `f32`, map-major, row-major.
pub fn write_map(
    path: &Path,
    maps: &[&Array2<f64>],
    axes: [&str; 2],
    extra: &Header,
) -> Result<()> {
    let (r, c) = maps.first().map_or((0, 0), |m| m.dim());
    if let Some(bad) = maps.iter().find(|m| m.dim() != (r, c)) {
        return Err(Error::ShapeMismatch {
            expected: format!("({r}, {c})"),
            actual: format!("{:?}", bad.dim()),
        });
    }
    write_f32s(path, maps.iter().flat_map(|m| m.iter().copied()))?;
    let mut h = extra.clone();
    h.insert("dtype".into(), "f32le".into());
    h.insert("layout".into(), format!("map,{},{}", axes[0], axes[1]));
    h.insert("maps".into(), maps.len().to_string());
    h.insert("rows".into(), r.to_string());
    h.insert("cols".into(), c.to_string());
    write_header(path, &h)
}

pub fn read_map(path: &Path) -> Result<Vec<Array2<f64>>> {
    let h = read_header(path)?;
    let (n, r, c) = (
        header_usize(&h, "maps")?,
        header_usize(&h, "rows")?,
        header_usize(&h, "cols")?,
    );
    let raw = read_f32s(path, n * r * c)?;
    Ok(raw
        .chunks_exact((r * c).max(1))
        .take(n)
        .map(|chunk| {
            Array2::from_shape_vec((r, c), chunk.iter().map(|v| *v as f64).collect())
                .expect("length checked")
        })
        .collect())
}

/// 8-bit greyscale preview with log-magnitude scaling.
pub fn write_pgm(path: &Path, map: &Array2<f64>) -> Result<()> {
    let (rows, cols) = map.dim();
    let logs: Vec<f64> = map.iter().map(|v| (v.max(0.0) + 1e-12).log10()).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    bytes.extend(logs.iter().map(|v| ((v - lo) / span * 255.0).round() as u8));
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
