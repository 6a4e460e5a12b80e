use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ParamKind, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction over the trainable entries of a store.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub cfg: AdamConfig,
    step: u64,
    m: Vec<Option<Tensor<T>>>,
    v: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig, store: &ParamStore<T>) -> Self {
        let zeros = |k: ParamKind, t: &Tensor<T>| (k == ParamKind::Trainable).then(|| Tensor::zeros(t.shape()));
        let m: Vec<_> = store.entries().iter().map(|e| zeros(e.kind, &e.value)).collect();
        Adam { cfg, step: 0, v: m.clone(), m }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. `grads` is in store order; missing gradients
    /// count as zero.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[Option<Tensor<T>>], lr: f64) -> Result<()> {
        if grads.len() != store.len() || self.m.len() != store.len() {
            return Err(Error::DimensionMismatch { expected: store.len(), got: grads.len() });
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powf(self.step as f64);
        let c2 = 1.0 - beta2.powf(self.step as f64);
        let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(eps));
        let (k1, k2) = (T::one() - b1, T::one() - b2);
        let step_size = T::lit(lr / c1);
        let inv_c2 = T::lit(1.0 / c2);
        for (i, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let (Some(m), Some(v)) = (self.m[i].as_mut(), self.v[i].as_mut()) else { continue };
            let p = store.get_mut(id);
            let g = grads[i].as_ref();
            let pd = p.data_mut();
            for j in 0..pd.len() {
                let gj = g.map_or(T::zero(), |g| g.data()[j]);
                let mj = b1 * m.data()[j] + k1 * gj;
                let vj = b2 * v.data()[j] + k2 * gj * gj;
                m.data_mut()[j] = mj;
                v.data_mut()[j] = vj;
                let u = step_size * mj / ((vj * inv_c2).sqrt() + eps);
                if u != T::zero() {
                    pd[j] = pd[j] - u;
                }
            }
        }
        Ok(())
    }

    /// Serializes moments and step count as little-endian bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.m.len() as u64).to_le_bytes());
        for (m, v) in self.m.iter().zip(&self.v) {
            match (m, v) {
                (Some(m), Some(v)) => {
                    out.extend_from_slice(&(m.numel() as u64).to_le_bytes());
                    for x in m.data().iter().chain(v.data()) {
                        x.write_le(&mut out);
                    }
                }
                _ => out.extend_from_slice(&u64::MAX.to_le_bytes()),
            }
        }
        out
    }

    /// Inverse of [`Adam::to_bytes`], checked against the store layout.
    pub fn from_bytes(cfg: AdamConfig, store: &ParamStore<T>, bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::Checkpoint(format!("optimizer state: {m}"));
        let mut pos = 0usize;
        let u64_at = |pos: &mut usize| -> Result<u64> {
            let b = bytes.get(*pos..*pos + 8).ok_or_else(|| corrupt("truncated"))?;
            *pos += 8;
            Ok(u64::from_le_bytes(b.try_into().unwrap()))
        };
        let step = u64_at(&mut pos)?;
        if u64_at(&mut pos)? as usize != store.len() {
            return Err(corrupt("parameter count differs from the model"));
        }
        let mut adam = Adam::new(cfg, store);
        adam.step = step;
        for (i, e) in store.entries().iter().enumerate() {
            let n = u64_at(&mut pos)?;
            let trainable = e.kind == ParamKind::Trainable;
            if n == u64::MAX {
                if trainable {
                    return Err(corrupt(&format!("no moments for `{}`", e.name)));
                }
                continue;
            }
            if !trainable || n as usize != e.value.numel() {
                return Err(corrupt(&format!("moment size mismatch for `{}`", e.name)));
            }
            let n = n as usize;
            let need = 2 * n * T::BYTES;
            let chunk = bytes.get(pos..pos + need).ok_or_else(|| corrupt("truncated"))?;
            pos += need;
            let vals: Vec<T> = chunk.chunks_exact(T::BYTES).map(T::read_le).collect();
            adam.m[i] = Some(Tensor::new(e.value.shape(), vals[..n].to_vec())?);
            adam.v[i] = Some(Tensor::new(e.value.shape(), vals[n..].to_vec())?);
        }
        if pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(adam)
    }
}
