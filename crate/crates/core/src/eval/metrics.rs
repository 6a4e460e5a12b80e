use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default binarization threshold; a probability equal to it is foreground.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Pixel counts of a binary segmentation against ground truth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        ConfusionCounts { tp: self.tp + o.tp, fp: self.fp + o.fp, tn: self.tn + o.tn, fn_: self.fn_ + o.fn_ }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Binarizes `pred` at `threshold` (inclusive) and counts against `gt`,
/// whose nonzero entries are foreground.
pub fn confusion_counts<T: Scalar>(pred: &[T], gt: &[T], threshold: f64) -> Result<ConfusionCounts> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch { expected: gt.len(), got: pred.len() });
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let t = T::lit(threshold);
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.iter().zip(gt) {
        match (p >= t, g != T::zero()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Which ratios had a zero denominator and were reported as 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricFlags {
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

impl MetricFlags {
    pub fn any(&self) -> bool {
        self.precision_undefined || self.recall_undefined || self.f1_undefined
    }

    /// `;`-separated names, empty when nothing is flagged.
    pub fn describe(&self) -> String {
        let mut v = Vec::new();
        if self.precision_undefined {
            v.push("precision_undefined");
        }
        if self.recall_undefined {
            v.push("recall_undefined");
        }
        if self.f1_undefined {
            v.push("f1_undefined");
        }
        v.join(";")
    }
}

impl std::ops::BitOr for MetricFlags {
    type Output = Self;

    fn bitor(self, o: Self) -> Self {
        MetricFlags {
            precision_undefined: self.precision_undefined || o.precision_undefined,
            recall_undefined: self.recall_undefined || o.recall_undefined,
            f1_undefined: self.f1_undefined || o.f1_undefined,
        }
    }
}

/// Ratios in [0, 1].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flags: MetricFlags,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metrics_from_counts(c: &ConfusionCounts) -> Metrics {
    let (precision, p_flag) = ratio(c.tp, c.tp + c.fp);
    let (recall, r_flag) = ratio(c.tp, c.tp + c.fn_);
    let (f1, f_flag) = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    Metrics {
        precision,
        recall,
        f1,
        flags: MetricFlags { precision_undefined: p_flag, recall_undefined: r_flag, f1_undefined: f_flag },
    }
}
