use rand::Rng;

use crate::scalar::Scalar;

/// CT intensity divisor.
pub const INTENSITY_SCALE: f64 = 2048.0;
pub const SHIFT_RANGE: (f64, f64) = (-0.25, 0.25);
pub const SCALE_RANGE: (f64, f64) = (0.75, 1.25);
pub const LITERAL_SCALE_RANGE: (f64, f64) = (-1.25, 1.25);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalizeMode {
    /// Random shift then scale, drawn once per image.
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NormalizeConfig {
    /// Draw the scale from (-1.25, 1.25) instead of (0.75, 1.25).
    pub literal_scale_range: bool,
}

/// `x/2048`, then in training `(x + u)·s`, then clip to [-1, 1].
pub fn normalize_intensity<T: Scalar, R: Rng + ?Sized>(
    img: &mut [T],
    mode: NormalizeMode,
    cfg: &NormalizeConfig,
    rng: &mut R,
) {
    let (shift, scale) = match mode {
        NormalizeMode::Eval => (0.0, 1.0),
        NormalizeMode::Train => {
            let shift = rng.gen_range(SHIFT_RANGE.0..SHIFT_RANGE.1);
            let (lo, hi) = if cfg.literal_scale_range { LITERAL_SCALE_RANGE } else { SCALE_RANGE };
            (shift, rng.gen_range(lo..hi))
        }
    };
    let (inv, shift, scale) = (T::lit(1.0 / INTENSITY_SCALE), T::lit(shift), T::lit(scale));
    let (lo, hi) = (-T::one(), T::one());
    for v in img.iter_mut() {
        let x = (*v * inv + shift) * scale;
        *v = x.max(lo).min(hi);
    }
}
