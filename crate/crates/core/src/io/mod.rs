//! On-disk formats used by the CLI.
//!
//! Binary arrays are little-endian `f32` with a plain-text `key=value`
//! header sidecar (`<name>.hdr`) describing shape and layout. Tables are CSV
//! with a header row.

mod binary;
mod tables;

pub use binary::{
    read_frames, read_header, read_map, write_frames, write_header, write_map, write_pgm, Header,
};
pub use tables::{
    read_knn_model, read_predictions, read_samples, write_detections, write_knn_model,
    write_manifest, write_predictions, write_ra_manifest, write_samples, write_track_log,
    PredictionRow, RaWindowRow, SampleRow,
};

use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Creates `dir` and its parents.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
