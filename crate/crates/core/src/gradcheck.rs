//! Central finite-difference checks of reverse-mode gradients.
//!
//! The numerical side only evaluates forward passes on perturbed copies of
//! the input, so it shares nothing with the backward closures it checks.

use crate::autograd::Var;
use crate::tensor::Tensor;

/// Outcome of comparing analytic and numeric gradients coordinate by coordinate.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub passed: usize,
    pub worst_relative_error: f64,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl GradCheckReport {
    pub fn pass_fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.passed as f64 / self.checked as f64
        }
    }
}

/// Relative error with a floor on the denominator so coordinates where both
/// gradients vanish compare as equal.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / scale
}

/// Checks `d f(x) / dx` for a scalar-valued `f` against central differences
/// with the given step.
pub fn check_gradient<F>(x: &Tensor<f64>, f: F, step: f64, tolerance: f64) -> GradCheckReport
where
    F: Fn(&Var<f64>) -> Var<f64>,
{
    let input = Var::leaf(x.clone(), true);
    let out = f(&input);
    assert_eq!(out.value().numel(), 1, "checked function must be scalar");
    let grads = out.backward();
    let analytic: Vec<f64> = grads
        .get(&input)
        .map(|g| g.data().to_vec())
        .unwrap_or_else(|| vec![0.0; x.numel()]);

    let eval = |t: Tensor<f64>| f(&Var::constant(t)).value().data()[0];
    let mut numeric = Vec::with_capacity(x.numel());
    let mut passed = 0;
    let mut worst: f64 = 0.0;
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data_mut()[i] += step;
        let mut minus = x.clone();
        minus.data_mut()[i] -= step;
        let n = (eval(plus) - eval(minus)) / (2.0 * step);
        let rel = relative_error(analytic[i], n);
        worst = worst.max(rel);
        if rel <= tolerance {
            passed += 1;
        }
        numeric.push(n);
    }
    GradCheckReport { checked: x.numel(), passed, worst_relative_error: worst, analytic, numeric }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn pseudo(shape: &[usize], seed: f64) -> Tensor<f64> {
        Tensor::from_fn(shape, |i| ((i as f64 + seed) * 0.7137).sin())
    }

    fn all_pass(r: &GradCheckReport) {
        assert_eq!(r.passed, r.checked, "worst relative error {}", r.worst_relative_error);
    }

    #[test]
    fn conv_and_pool_gradients() {
        let w = Var::constant(pseudo(&[3, 2, 3, 3], 4.0));
        let b = Var::constant(pseudo(&[3], 9.0));
        let weights = pseudo(&[2, 3, 3, 3], 1.0);
        let r = check_gradient(&pseudo(&[2, 2, 6, 6], 0.0), |x| x.conv2d(&w, Some(&b), 2, 2).avg_pool2x2().dot_const(&weights), 1e-4, 1e-6);
        all_pass(&r);
    }

    #[test]
    fn batch_norm_training_gradient() {
        let gamma = Var::constant(pseudo(&[3], 2.0).map(|v| v + 1.5));
        let beta = Var::constant(pseudo(&[3], 5.0));
        let weights = pseudo(&[2, 3, 2, 2], 7.0);
        let r = check_gradient(&pseudo(&[2, 3, 2, 2], 0.5), |x| x.batch_norm_train(&gamma, &beta, 1e-5).0.dot_const(&weights), 1e-5, 1e-5);
        all_pass(&r);
    }

    #[test]
    fn attention_style_ops_gradient() {
        let weights = pseudo(&[1, 4, 4, 4], 3.0);
        let r = check_gradient(
            &pseudo(&[1, 4, 4, 4], 1.0),
            |x| {
                let m = Var::concat(&[x.channel_mean(), x.channel_max()], 1).channel_mean().sigmoid();
                let gate = x.global_avg_pool().softmax(1).reshape(&[1, 4, 1, 1]);
                x.mul_bcast(&m).mul_bcast(&gate).cos().dot_const(&weights)
            },
            1e-5,
            1e-5,
        );
        all_pass(&r);
    }

    #[test]
    fn upsample_linear_and_narrow_gradient() {
        let w = Var::constant(pseudo(&[5, 3], 2.0));
        let weights = pseudo(&[2, 2, 6, 4], 8.0);
        let r = check_gradient(
            &pseudo(&[2, 3, 3, 2], 0.0),
            |x| {
                let up = x.upsample_bilinear(6, 4).narrow(1, 1, 2);
                let lin = x.global_avg_pool().linear(&w, None).relu().sum();
                up.dot_const(&weights).add(&lin)
            },
            1e-5,
            1e-5,
        );
        all_pass(&r);
    }
}
