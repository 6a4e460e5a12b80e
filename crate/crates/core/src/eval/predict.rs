use crate::data::resample::{resample_to_dims, resample_to_unit_spacing, Interpolation};
use crate::data::slices::{stack_slices, Phase, SliceOptions};
use crate::data::volume::{Plane, Volume};
use crate::error::Result;
use crate::eval::evaluate::predict_masks;
use crate::network::Model;
use crate::ops::resize_nearest_plane;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Segments every slice of `image` along `plane` and returns a binary mask
/// on the input grid.
pub fn predict_volume<T: Scalar>(model: &Model<T>, image: &Volume<T>, plane: Plane, threshold: f64) -> Result<Volume<T>> {
    let unit = resample_to_unit_spacing(image, Interpolation::Linear)?;
    let ones = unit.with_data(Tensor::ones(&unit.dims()), unit.spacing())?;
    let opts = SliceOptions { size: Some(model.config().input_size), keep_empty: true };
    let slices = crate::data::slices::extract_slices(&unit, &ones, plane, "predict", Phase::Test, &opts)?;
    let probs = predict_masks(model, &slices, 8)?;

    let dims = unit.dims();
    let normal = unit.axis_of(plane);
    let (ra, ca) = match normal {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (oh, ow) = model.config().input_size;
    let t = T::lit(threshold);
    let planes: Vec<Tensor<T>> = probs
        .iter()
        .map(|p| {
            let bin: Vec<T> = p.data().iter().map(|&v| if v >= t { T::one() } else { T::zero() }).collect();
            Tensor::new(&[dims[ra], dims[ca]], resize_nearest_plane(&bin, oh, ow, dims[ra], dims[ca]))
        })
        .collect::<Result<_>>()?;
    let mask = unit.with_data(stack_slices(&planes, dims, normal)?, unit.spacing())?;
    let back = resample_to_dims(&mask, image.dims(), Interpolation::Nearest)?;
    back.with_data(back.data().clone(), image.spacing())
}
