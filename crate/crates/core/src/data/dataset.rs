//! Dataset directories laid out as `<root>/{images,masks}/<id>.nii.gz`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::io::{load_volume, save_volume};
use crate::data::resample::{resample_to_unit_spacing, Interpolation};
use crate::data::slices::{extract_slices, Phase, SliceOptions, SliceSample};
use crate::data::volume::{Plane, Volume};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const VOLUME_EXT: &str = ".nii.gz";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetEntry {
    pub id: String,
    pub image: PathBuf,
    pub mask: PathBuf,
}

/// Pairs every image with its mask, sorted by id.
pub fn scan_dataset(root: &Path) -> Result<Vec<DatasetEntry>> {
    let images = root.join("images");
    if !images.is_dir() {
        return Err(Error::MissingFile(images));
    }
    let mut out = Vec::new();
    for e in fs::read_dir(&images)? {
        let name = e?.file_name().to_string_lossy().into_owned();
        let Some(id) = name.strip_suffix(VOLUME_EXT) else { continue };
        let mask = root.join("masks").join(&name);
        if !mask.exists() {
            return Err(Error::MissingFile(mask));
        }
        out.push(DatasetEntry { id: id.to_string(), image: images.join(&name), mask });
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset(format!("no *{VOLUME_EXT} images under {}", images.display())));
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

pub fn write_dataset<T: Scalar>(root: &Path, items: &[(String, Volume<T>, Volume<T>)]) -> Result<Vec<DatasetEntry>> {
    fs::create_dir_all(root.join("images"))?;
    fs::create_dir_all(root.join("masks"))?;
    items
        .iter()
        .map(|(id, img, mask)| {
            let e = DatasetEntry {
                id: id.clone(),
                image: root.join("images").join(format!("{id}{VOLUME_EXT}")),
                mask: root.join("masks").join(format!("{id}{VOLUME_EXT}")),
            };
            save_volume(img, &e.image)?;
            save_volume(mask, &e.mask)?;
            Ok(e)
        })
        .collect()
}

/// Unit-spacing resample (linear image, nearest mask) then slicing.
pub fn prepare_slices<T: Scalar>(
    image: &Volume<T>,
    mask: &Volume<T>,
    plane: Plane,
    volume_id: &str,
    phase: Phase,
    opts: &SliceOptions,
) -> Result<Vec<SliceSample<T>>> {
    if !image.same_grid(mask) {
        return Err(Error::Shape(format!(
            "image {:?} and mask {:?} volumes do not share a grid",
            image.dims(),
            mask.dims()
        )));
    }
    let image = resample_to_unit_spacing(image, Interpolation::Linear)?;
    let mask = resample_to_unit_spacing(mask, Interpolation::Nearest)?;
    extract_slices(&image, &mask, plane, volume_id, phase, opts)
}

pub fn load_pair<T: Scalar>(e: &DatasetEntry) -> Result<(Volume<T>, Volume<T>)> {
    Ok((load_volume(&e.image)?, load_volume(&e.mask)?))
}
