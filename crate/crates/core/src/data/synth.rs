//! Spine phantoms: a vertical stack of bony ellipsoids inside a soft-tissue
//! body, with exact binary masks.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::rng::stream_rng;
use crate::data::volume::Volume;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const HU_MIN: f64 = -1024.0;
pub const HU_MAX: f64 = 3072.0;
const AIR_HU: f64 = -1000.0;
const TISSUE_HU: f64 = 40.0;
const DISC_HU: f64 = 90.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Array extent, standard axis order (sagittal, coronal, axial normals).
    pub dims: [usize; 3],
    /// Candidate axial spacings in mm.
    pub axial_spacings: Vec<f64>,
    /// Range of the shared in-plane spacing in mm.
    pub inplane_spacing: (f64, f64),
    pub vertebrae: (usize, usize),
    /// Largest lean of the spine axis away from vertical, per in-plane axis.
    pub max_lean_deg: f64,
    /// Range of the per-volume scanner gain applied to HU values.
    pub gain: (f64, f64),
    /// Largest per-volume HU offset.
    pub max_offset_hu: f64,
    pub noise_hu: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dims: [48, 48, 64],
            axial_spacings: vec![1.0, 1.25],
            inplane_spacing: (0.8, 1.25),
            vertebrae: (5, 7),
            max_lean_deg: 10.0,
            gain: (0.85, 1.15),
            max_offset_hu: 40.0,
            noise_hu: 25.0,
        }
    }
}

struct Ellipsoid {
    centre: [f64; 3],
    radii: [f64; 3],
}

impl Ellipsoid {
    fn level(&self, p: [f64; 3]) -> f64 {
        (0..3).map(|a| ((p[a] - self.centre[a]) / self.radii[a]).powi(2)).sum()
    }
}

/// One phantom pair from its own generator stream.
pub fn make_phantom(cfg: &SynthConfig, seed: u64, index: usize) -> Result<(Volume<f32>, Volume<f32>)> {
    let [nx, ny, nz] = cfg.dims;
    if nx < 8 || ny < 8 || nz < 16 {
        return Err(Error::Config(format!("phantom extent {:?} is too small", cfg.dims)));
    }
    let mut rng = stream_rng(seed, &format!("phantom-{index}"));
    let (fx, fy, fz) = (nx as f64, ny as f64, nz as f64);
    let sz = if cfg.axial_spacings.is_empty() {
        1.0
    } else {
        cfg.axial_spacings[rng.gen_range(0..cfg.axial_spacings.len())]
    };
    let sxy = draw(&mut rng, cfg.inplane_spacing) as f32 as f64;
    let lean = cfg.max_lean_deg.abs().to_radians();
    let (lean_x, lean_y) = (draw(&mut rng, (-lean, lean)).tan(), draw(&mut rng, (-lean, lean)).tan());
    let gain = draw(&mut rng, cfg.gain);
    let offset = draw(&mut rng, (-cfg.max_offset_hu.abs(), cfg.max_offset_hu.abs()));

    let body = Ellipsoid {
        centre: [fx / 2.0 + rng.gen_range(-0.04..0.04) * fx, fy / 2.0 + rng.gen_range(-0.04..0.04) * fy, 0.0],
        radii: [fx * rng.gen_range(0.40..0.46), fy * rng.gen_range(0.36..0.44), f64::INFINITY],
    };
    let k = rng.gen_range(cfg.vertebrae.0..=cfg.vertebrae.1.max(cfg.vertebrae.0));
    let pitch = fz / k as f64;
    let (cx, cy) = (body.centre[0] + rng.gen_range(-0.05..0.05) * fx, body.centre[1] + fy * rng.gen_range(0.05..0.12));
    let curve = rng.gen_range(-0.08..0.08) * fx;
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let verts: Vec<(Ellipsoid, f64)> = (0..k)
        .map(|i| {
            let z = (i as f64 + 0.5) * pitch;
            let bend = curve * (std::f64::consts::PI * z / fz + phase).sin();
            let dz = z - fz / 2.0;
            let e = Ellipsoid {
                centre: [cx + bend + lean_x * dz, cy + lean_y * dz + rng.gen_range(-0.02..0.02) * fy, z],
                radii: [
                    fx * rng.gen_range(0.15..0.19),
                    fy * rng.gen_range(0.13..0.17),
                    pitch * rng.gen_range(0.36..0.44),
                ],
            };
            (e, rng.gen_range(700.0..1300.0))
        })
        .collect();

    let noise = Normal::new(0.0, cfg.noise_hu.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let n = nx * ny * nz;
    let mut img = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let p = [x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5];
                let in_body = (0..2).map(|a| ((p[a] - body.centre[a]) / body.radii[a]).powi(2)).sum::<f64>() <= 1.0;
                let mut hu = if in_body { TISSUE_HU } else { AIR_HU };
                let mut fg = 0.0f32;
                for (e, bone) in &verts {
                    let l = e.level(p);
                    if l <= 1.0 {
                        // Brighter cortical shell.
                        hu = bone + if l > 0.6 { 400.0 } else { 0.0 };
                        fg = 1.0;
                    } else if in_body && l <= 1.6 && (p[2] - e.centre[2]).abs() > e.radii[2] {
                        hu = hu.max(DISC_HU);
                    }
                }
                hu = gain * hu + offset + noise.sample(&mut rng);
                img.push(hu.clamp(HU_MIN, HU_MAX) as f32);
                mask.push(fg);
            }
        }
    }
    let spacing = [sxy, sxy, sz];
    Ok((
        Volume::standard(Tensor::new(&cfg.dims, img)?, spacing)?,
        Volume::standard(Tensor::new(&cfg.dims, mask)?, spacing)?,
    ))
}

fn draw(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// `n` phantom image/mask pairs, deterministic per seed.
pub fn make_synthetic_dataset(n: usize, seed: u64) -> Result<Vec<(Volume<f32>, Volume<f32>)>> {
    make_synthetic_dataset_with(&SynthConfig::default(), n, seed)
}

pub fn make_synthetic_dataset_with(cfg: &SynthConfig, n: usize, seed: u64) -> Result<Vec<(Volume<f32>, Volume<f32>)>> {
    if n == 0 {
        return Err(Error::InvalidInput("at least one phantom is required".into()));
    }
    (0..n).map(|i| make_phantom(cfg, seed, i)).collect()
}

/// Identifier used for phantom `i` on disk.
pub fn phantom_id(i: usize) -> String {
    format!("phantom_{i:04}")
}
