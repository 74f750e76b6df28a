use std::collections::BTreeMap;

use super::rng::{stream, CounterRng};
use super::FeatureSet;
use crate::{Error, Result};

/// Seeded split stratified by label.
///
/// Each label group (in ascending label order) is shuffled by one shared
/// generator and contributes `round(len · val_fraction)` samples to the
/// validation side. Both halves keep the original sample order.
pub fn split(set: &FeatureSet, val_fraction: f64, seed: u64) -> Result<(FeatureSet, FeatureSet)> {
    if !(val_fraction > 0.0 && val_fraction <= 0.5) {
        return Err(Error::param(format!(
            "validation fraction must be in (0, 0.5], got {val_fraction}"
        )));
    }
    let mut groups: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &y) in set.labels().iter().enumerate() {
        groups.entry(y).or_default().push(i);
    }
    let mut rng = CounterRng::new(seed, stream::SPLIT);
    let mut val_idx = Vec::new();
    let mut train_idx = Vec::new();
    for members in groups.values_mut() {
        rng.shuffle(members);
        let n_val = (members.len() as f64 * val_fraction).round() as usize;
        val_idx.extend_from_slice(&members[..n_val]);
        train_idx.extend_from_slice(&members[n_val..]);
    }
    if val_idx.is_empty() {
        return Err(Error::param(format!(
            "validation fraction {val_fraction} leaves no validation samples out of {}",
            set.len()
        )));
    }
    val_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((set.subset(&train_idx), set.subset(&val_idx)))
}
