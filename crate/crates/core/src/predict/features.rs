use crate::tracking::TrackState;

/// Zero-padded concatenation of up to `k_max` track states.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackFeatureVector {
    pub values: Vec<f64>,
    pub k_max: usize,
}

/// Stacks `[x, y, v_x, v_y]` of the `k_max` nearest tracks in ascending
/// range order (ties by track id) and pads with zeros to `4 * k_max`.
pub fn stack_states(tracks: &[TrackState], k_max: usize) -> TrackFeatureVector {
    let mut order: Vec<&TrackState> = tracks.iter().collect();
    order.sort_by(|a, b| a.range().total_cmp(&b.range()).then(a.id.cmp(&b.id)));
    let mut values = vec![0.0; 4 * k_max];
    for (slot, t) in order.into_iter().take(k_max).enumerate() {
        values[4 * slot..4 * slot + 4].copy_from_slice(t.mean.as_slice());
    }
    TrackFeatureVector { values, k_max }
}

/// Largest simultaneous track count over the given frames, capped.
pub fn k_max_from<'a>(frames: impl IntoIterator<Item = &'a [TrackState]>, cap: usize) -> usize {
    frames
        .into_iter()
        .map(<[TrackState]>::len)
        .max()
        .unwrap_or(0)
        .min(cap)
}
