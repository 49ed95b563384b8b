//! Detection on the range-velocity map: CA-CFAR, DBSCAN grouping and
//! per-object measurement extraction.

mod cfar;
mod dbscan;
mod measurement;

pub use cfar::{cfar_2d, CfarConfig, CfarOutput, Detection};
pub use dbscan::{cluster_detections, dbscan, Cluster, DbscanConfig};
pub use measurement::{extract_measurement, ObjectMeasurement};
