//! On-disk slice cache: one flat little-endian `f32` file per slice
//! (image then mask) plus `index.json`.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::slices::{Phase, SliceSample};
use crate::data::volume::Plane;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const INDEX_FILE: &str = "index.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub volume_id: String,
    pub plane: Plane,
    pub slice_index: usize,
    pub phase: Phase,
    pub file: String,
    pub height: usize,
    pub width: usize,
}

#[derive(Clone, Debug)]
pub struct SliceCache {
    root: PathBuf,
    entries: Vec<CacheEntry>,
}

impl SliceCache {
    /// Writes `samples` under `root`, replacing any existing index.
    pub fn write<T: Scalar>(root: &Path, samples: &[SliceSample<T>]) -> Result<Self> {
        fs::create_dir_all(root.join("slices"))?;
        let mut entries = Vec::with_capacity(samples.len());
        for s in samples {
            let (h, w) = (s.image.shape()[0], s.image.shape()[1]);
            let file = format!("slices/{}_{}_{:04}.bin", s.volume_id, s.plane, s.slice_index);
            let mut out = BufWriter::new(fs::File::create(root.join(&file))?);
            for &v in s.image.data().iter().chain(s.mask.data()) {
                out.write_all(&(v.as_f64() as f32).to_le_bytes())?;
            }
            out.flush()?;
            entries.push(CacheEntry {
                volume_id: s.volume_id.clone(),
                plane: s.plane,
                slice_index: s.slice_index,
                phase: s.phase,
                file,
                height: h,
                width: w,
            });
        }
        fs::write(root.join(INDEX_FILE), serde_json::to_vec_pretty(&entries)?)?;
        Ok(SliceCache { root: root.to_path_buf(), entries })
    }

    pub fn open(root: &Path) -> Result<Self> {
        let index = root.join(INDEX_FILE);
        if !index.exists() {
            return Err(Error::MissingFile(index));
        }
        let entries = serde_json::from_slice(&fs::read(&index)?)?;
        Ok(SliceCache { root: root.to_path_buf(), entries })
    }

    pub fn entries(&self) -> &[CacheEntry] {
        &self.entries
    }

    pub fn select(&self, plane: Plane, phase: Phase) -> Vec<&CacheEntry> {
        self.entries.iter().filter(|e| e.plane == plane && e.phase == phase).collect()
    }

    pub fn load<T: Scalar>(&self, e: &CacheEntry) -> Result<SliceSample<T>> {
        let path = self.root.join(&e.file);
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        let n = e.height * e.width;
        let mut bytes = Vec::with_capacity(8 * n);
        BufReader::new(fs::File::open(&path)?).read_to_end(&mut bytes)?;
        if bytes.len() != 8 * n {
            return Err(Error::InvalidInput(format!("{} holds {} bytes, expected {}", path.display(), bytes.len(), 8 * n)));
        }
        let vals: Vec<T> = bytes
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        let (img, mask) = vals.split_at(n);
        Ok(SliceSample {
            image: Tensor::new(&[e.height, e.width], img.to_vec())?,
            mask: Tensor::new(&[e.height, e.width], mask.to_vec())?,
            plane: e.plane,
            volume_id: e.volume_id.clone(),
            slice_index: e.slice_index,
            phase: e.phase,
        })
    }

    pub fn load_all<T: Scalar>(&self, plane: Plane, phase: Phase) -> Result<Vec<SliceSample<T>>> {
        self.select(plane, phase).into_iter().map(|e| self.load(e)).collect()
    }
}
