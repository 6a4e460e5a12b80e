use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Probabilities are clamped to `[PRED_CLAMP, 1 - PRED_CLAMP]`.
pub const PRED_CLAMP: f64 = 1e-7;
/// Additive smoothing in numerator and denominator of the Dice ratio.
pub const DICE_SMOOTH: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub bce: f64,
    pub dice: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { bce: 1.0, dice: 1.0 }
    }
}

/// Per-sample terms of the loss, before weighting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossTerms {
    pub bce: f64,
    pub dice: f64,
}

fn check<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(usize, usize)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!("prediction {:?} vs target {:?}", pred.shape(), target.shape())));
    }
    if pred.rank() == 0 || pred.numel() == 0 {
        return Err(Error::Shape(format!("loss needs a non-empty batch, got {:?}", pred.shape())));
    }
    if let Some(v) = target.data().iter().find(|&&v| v != T::zero() && v != T::one()) {
        return Err(Error::InvalidInput(format!("target entries must be 0 or 1, found {v:?}")));
    }
    let n = pred.shape()[0];
    Ok((n, pred.numel() / n))
}

/// BCE and Dice terms of each batch item.
pub fn loss_terms<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Vec<LossTerms>> {
    let (n, m) = check(pred, target)?;
    let (lo, hi) = (T::lit(PRED_CLAMP), T::lit(1.0 - PRED_CLAMP));
    let smooth = DICE_SMOOTH;
    Ok((0..n)
        .map(|b| {
            let (p, g) = (&pred.data()[b * m..(b + 1) * m], &target.data()[b * m..(b + 1) * m]);
            let (mut bce, mut inter, mut sp, mut sg) = (0.0f64, 0.0, 0.0, 0.0);
            for (&p, &g) in p.iter().zip(g) {
                // Comparisons keep NaN, unlike `max`/`min`.
                let p = if p < lo { lo } else if p > hi { hi } else { p }.as_f64();
                let g = g.as_f64();
                bce -= g * p.ln() + (1.0 - g) * (1.0 - p).ln();
                inter += p * g;
                sp += p;
                sg += g;
            }
            LossTerms { bce: bce / m as f64, dice: 1.0 - (2.0 * inter + smooth) / (sp + sg + smooth) }
        })
        .collect())
}

/// `w_bce·BCE + w_dice·(1 − soft Dice)`, averaged over the leading batch axis.
/// Targets are constants; the gradient flows to `pred` only.
pub fn bce_dice_loss<T: Scalar>(pred: &Var<T>, target: &Tensor<T>, weights: LossWeights) -> Result<Var<T>> {
    let terms = loss_terms(pred.value(), target)?;
    let n = terms.len();
    let value = terms.iter().map(|t| weights.bce * t.bce + weights.dice * t.dice).sum::<f64>() / n as f64;
    let target = target.clone();
    Ok(Var::from_op(
        Tensor::scalar(T::lit(value)),
        vec![pred.clone()],
        Box::new(move |g, parents, _| {
            let pred = parents[0];
            let m = pred.numel() / n;
            let upstream = g.data()[0].as_f64();
            let mut grad = Vec::with_capacity(pred.numel());
            for b in 0..n {
                let (p, t) = (&pred.data()[b * m..(b + 1) * m], &target.data()[b * m..(b + 1) * m]);
                let clamped = |v: T| v.as_f64().clamp(PRED_CLAMP, 1.0 - PRED_CLAMP);
                let (mut inter, mut s) = (0.0f64, DICE_SMOOTH);
                for (&p, &g) in p.iter().zip(t) {
                    let p = clamped(p);
                    inter += p * g.as_f64();
                    s += p + g.as_f64();
                }
                let num = 2.0 * inter + DICE_SMOOTH;
                let scale = upstream / n as f64;
                for (&pv, &gv) in p.iter().zip(t) {
                    let raw = pv.as_f64();
                    // Zero slope outside the clamp window.
                    if raw < PRED_CLAMP || raw > 1.0 - PRED_CLAMP {
                        grad.push(T::zero());
                        continue;
                    }
                    let gv = gv.as_f64();
                    let d_bce = (-gv / raw + (1.0 - gv) / (1.0 - raw)) / m as f64;
                    let d_dice = -(2.0 * gv * s - num) / (s * s);
                    grad.push(T::lit(scale * (weights.bce * d_bce + weights.dice * d_dice)));
                }
            }
            vec![Some(Tensor::new(pred.shape(), grad).unwrap())]
        }),
    ))
}
