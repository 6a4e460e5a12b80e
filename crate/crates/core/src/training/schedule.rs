use crate::error::{Error, Result};
use crate::training::config::TrainConfig;

/// Learning rate for `epoch`: linear warmup from `lr_start` to `lr_peak` at
/// the warmup end, then exponential decay landing on `lr_final` at the last
/// epoch. The three anchors are returned exactly.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> Result<f64> {
    if epoch >= cfg.epochs {
        return Err(Error::InvalidInput(format!("epoch {epoch} outside 0..{}", cfg.epochs)));
    }
    let w = cfg.warmup_end();
    let last = cfg.epochs - 1;
    Ok(if epoch == 0 {
        cfg.lr_start
    } else if epoch < w {
        cfg.lr_start + (cfg.lr_peak - cfg.lr_start) * epoch as f64 / w as f64
    } else if epoch == w {
        cfg.lr_peak
    } else if epoch == last {
        cfg.lr_final
    } else {
        let t = (epoch - w) as f64 / (last - w) as f64;
        cfg.lr_peak * (cfg.lr_final / cfg.lr_peak).powf(t)
    })
}

/// Rates for every epoch of the run.
pub fn lr_schedule(cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    (0..cfg.epochs).map(|e| lr_at(e, cfg)).collect()
}
