use serde::{Deserialize, Serialize};

use crate::data::slices::SliceSample;
use crate::error::{Error, Result};
use crate::eval::metrics::{confusion_counts, metrics_from_counts, ConfusionCounts, MetricFlags, Metrics};
use crate::network::Model;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::training::trainer::{eval_view, stack_batch};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Pool pixel counts over every slice, then take ratios.
    #[default]
    Micro,
    /// Ratios per slice, then their mean.
    Macro,
}

impl Averaging {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "micro" => Some(Averaging::Micro),
            "macro" => Some(Averaging::Macro),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Averaging::Micro => "micro",
            Averaging::Macro => "macro",
        }
    }
}

/// Metrics of one selection of slices plus the pooled counts behind them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub counts: ConfusionCounts,
    pub slices: usize,
}

/// Scores `(prediction, ground truth)` pairs.
pub fn evaluate_pairs<'a, T: Scalar + 'a>(
    pairs: impl IntoIterator<Item = (&'a Tensor<T>, &'a Tensor<T>)>,
    threshold: f64,
    averaging: Averaging,
) -> Result<Evaluation> {
    let per_slice: Vec<ConfusionCounts> = pairs
        .into_iter()
        .map(|(p, g)| {
            if p.numel() != g.numel() {
                return Err(Error::Shape(format!("prediction {:?} vs mask {:?}", p.shape(), g.shape())));
            }
            confusion_counts(p.data(), g.data(), threshold)
        })
        .collect::<Result<_>>()?;
    if per_slice.is_empty() {
        return Err(Error::EmptyDataset("no slices selected for evaluation".into()));
    }
    let counts: ConfusionCounts = per_slice.iter().copied().sum();
    let metrics = match averaging {
        Averaging::Micro => metrics_from_counts(&counts),
        Averaging::Macro => {
            let all: Vec<Metrics> = per_slice.iter().map(metrics_from_counts).collect();
            let n = all.len() as f64;
            Metrics {
                precision: all.iter().map(|m| m.precision).sum::<f64>() / n,
                recall: all.iter().map(|m| m.recall).sum::<f64>() / n,
                f1: all.iter().map(|m| m.f1).sum::<f64>() / n,
                flags: all.iter().fold(MetricFlags::default(), |a, m| a | m.flags),
            }
        }
    };
    Ok(Evaluation { metrics, counts, slices: per_slice.len() })
}

/// Second-network probabilities for each sample, `1×H×W`.
pub fn predict_masks<T: Scalar>(model: &Model<T>, samples: &[SliceSample<T>], batch: usize) -> Result<Vec<Tensor<T>>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch.max(1)) {
        let views: Vec<_> = chunk.iter().map(eval_view).collect();
        let (x, _) = stack_batch(&views, model.config().in_channels)?;
        let (_, m2) = model.predict_batch(&x)?;
        for i in 0..chunk.len() {
            let item = m2.batch_item(i);
            let shape = item.shape()[1..].to_vec();
            out.push(item.reshape(&shape)?);
        }
    }
    Ok(out)
}

/// Scores the second mask of `model` on `samples`.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    samples: &[SliceSample<T>],
    threshold: f64,
    averaging: Averaging,
) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset("no slices selected for evaluation".into()));
    }
    let preds = predict_masks(model, samples, 8)?;
    evaluate_pairs(preds.iter().zip(samples.iter().map(|s| &s.mask)), threshold, averaging)
}
