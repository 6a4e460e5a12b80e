use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Anatomical plane; as an axis label it names the plane's normal direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Sagittal,
    Coronal,
    Axial,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::Sagittal, Plane::Coronal, Plane::Axial];

    pub fn name(self) -> &'static str {
        match self {
            Plane::Sagittal => "sagittal",
            Plane::Coronal => "coronal",
            Plane::Axial => "axial",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s.to_ascii_lowercase())
    }

    /// World axis (x, y, z) normal to the plane.
    pub fn world_axis(self) -> usize {
        self as usize
    }

    pub fn from_world_axis(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl std::fmt::Display for Plane {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A scalar 3D grid with voxel spacing in mm and the anatomical direction of
/// each array axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    data: Tensor<T>,
    spacing: [f64; 3],
    axes: [Plane; 3],
}

impl<T: Scalar> Volume<T> {
    pub const STANDARD_AXES: [Plane; 3] = [Plane::Sagittal, Plane::Coronal, Plane::Axial];

    pub fn new(data: Tensor<T>, spacing: [f64; 3], axes: [Plane; 3]) -> Result<Self> {
        if data.rank() != 3 || data.shape().contains(&0) {
            return Err(Error::Shape(format!("volume must be a non-empty 3D grid, got {:?}", data.shape())));
        }
        if let Some(s) = spacing.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput(format!("voxel spacing must be positive, got {s}")));
        }
        let mut seen = axes.to_vec();
        seen.sort();
        seen.dedup();
        if seen.len() != 3 {
            return Err(Error::Orientation(format!("axes {axes:?} are not a permutation")));
        }
        Ok(Volume { data, spacing, axes })
    }

    /// Volume with standard axis order.
    pub fn standard(data: Tensor<T>, spacing: [f64; 3]) -> Result<Self> {
        Self::new(data, spacing, Self::STANDARD_AXES)
    }

    pub fn data(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn into_data(self) -> Tensor<T> {
        self.data
    }

    pub fn dims(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[0], s[1], s[2]]
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn axes(&self) -> [Plane; 3] {
        self.axes
    }

    /// Array axis normal to `plane`.
    pub fn axis_of(&self, plane: Plane) -> usize {
        self.axes.iter().position(|&p| p == plane).unwrap()
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> T {
        let [_, n1, n2] = self.dims();
        self.data.data()[(i * n1 + j) * n2 + k]
    }

    pub fn with_data(&self, data: Tensor<T>, spacing: [f64; 3]) -> Result<Self> {
        Self::new(data, spacing, self.axes)
    }

    /// Same geometry check used before pairing an image with its mask.
    pub fn same_grid(&self, other: &Volume<T>) -> bool {
        self.dims() == other.dims()
            && self.axes == other.axes
            && self.spacing.iter().zip(&other.spacing).all(|(a, b)| (a - b).abs() <= 1e-6 * a.max(*b))
    }

    pub fn cast<U: Scalar>(&self) -> Volume<U> {
        Volume { data: self.data.cast(), spacing: self.spacing, axes: self.axes }
    }
}
