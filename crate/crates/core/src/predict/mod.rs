//! Supervised blockage prediction from tracked object states.

mod features;
mod knn;
mod labels;
mod split;

pub use features::{k_max_from, stack_states, TrackFeatureVector};
pub use knn::{KnnConfig, KnnModel, Standardizer};
pub use labels::{future_label, sample_frames, LabelConfig, LabeledSample};
pub use split::{split_counts, split_sequences, Split, SplitConfig};
