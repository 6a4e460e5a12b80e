use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::rng::stream_rng;
use crate::data::slices::Phase;
use crate::error::{Error, Result};

/// Train/valid/test proportions of the 319-volume reference dataset
/// (113/103/103).
pub const REFERENCE_FRACTIONS: [f64; 3] = [113.0 / 319.0, 103.0 / 319.0, 103.0 / 319.0];

/// Volume-level assignment to phases.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit<I> {
    pub train: Vec<I>,
    pub valid: Vec<I>,
    pub test: Vec<I>,
}

impl<I> DatasetSplit<I> {
    pub fn get(&self, phase: Phase) -> &[I] {
        match phase {
            Phase::Train => &self.train,
            Phase::Valid => &self.valid,
            Phase::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.valid.len(), self.test.len())
    }

    pub fn iter(&self) -> impl Iterator<Item = (Phase, &I)> {
        Phase::ALL.into_iter().flat_map(move |p| self.get(p).iter().map(move |i| (p, i)))
    }
}

/// Largest-remainder apportionment of `n` items over `fractions`.
pub fn apportion(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let total: f64 = fractions.iter().sum();
    let exact: Vec<f64> = fractions.iter().map(|f| f / total * n as f64).collect();
    let mut counts = [0usize; 3];
    for i in 0..3 {
        // Guard against 112.99999 style float error.
        counts[i] = (exact[i] + 1e-9).floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Shuffles whole volumes with `seed` and cuts them into train/valid/test.
pub fn split_dataset<I: Clone>(items: &[I], fractions: [f64; 3], seed: u64) -> Result<DatasetSplit<I>> {
    if items.len() < Phase::ALL.len() {
        return Err(Error::InvalidInput(format!(
            "{} volumes cannot fill {} phases",
            items.len(),
            Phase::ALL.len()
        )));
    }
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!("split fractions {fractions:?} must be non-negative and sum to 1")));
    }
    let [a, b, _] = apportion(items.len(), fractions);
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut stream_rng(seed, "split"));
    let pick = |r: &[usize]| r.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit { train: pick(&order[..a]), valid: pick(&order[a..a + b]), test: pick(&order[a + b..]) })
}
