//! CT ingestion, resampling, slicing, normalization, augmentation and
//! synthetic phantoms.

pub mod augment;
pub mod cache;
pub mod dataset;
pub mod io;
pub mod normalize;
pub mod resample;
pub mod rng;
pub mod slices;
pub mod split;
pub mod synth;
pub mod volume;

pub use augment::{apply_record, augment, draw_record, replay_on_mask, AugOp, AugSet, AugmentRecord, AugmentationConfig};
pub use cache::{CacheEntry, SliceCache};
pub use dataset::{load_pair, prepare_slices, scan_dataset, write_dataset, DatasetEntry};
pub use io::{load_volume, save_volume};
pub use normalize::{normalize_intensity, NormalizeConfig, NormalizeMode};
pub use resample::{resample_to_dims, resample_to_unit_spacing, Interpolation};
pub use rng::{sample_rng, stream_rng};
pub use slices::{extract_slices, stack_slices, Phase, SliceOptions, SliceSample};
pub use split::{split_dataset, DatasetSplit, REFERENCE_FRACTIONS};
pub use synth::{make_synthetic_dataset, make_synthetic_dataset_with, SynthConfig};
pub use volume::{Plane, Volume};
