//! Real-valued fields on the interior grid and channel-stacked feature maps.

use crate::error::{Error, Result};
use crate::grid::Site;

/// A real field on the H×W interior grid, stored row-major over (i, j) with
/// i the row in 1..=H.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentField {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl LatentField {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} = {} values", height, width, height * width),
                actual: format!("{} values", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field contains non-finite entries".into()));
        }
        Ok(Self { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, values: vec![0.0; height * width] }
    }

    pub fn constant(height: usize, width: usize, c: f64) -> Self {
        Self { height, width, values: vec![c; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Row-major linear index of an interior site.
    pub fn index_of(&self, site: Site) -> usize {
        (site.i - 1) * self.width + (site.j - 1)
    }

    pub fn get(&self, site: Site) -> f64 {
        self.values[self.index_of(site)]
    }

    pub fn set(&mut self, site: Site, value: f64) {
        let idx = self.index_of(site);
        self.values[idx] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn same_shape(&self, other: &LatentField) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.height, self.width),
                actual: format!("{}x{}", other.height, other.width),
            });
        }
        Ok(())
    }
}

/// A C×H×W feature tensor; the spatial dims match the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>, // channel-major, each channel row-major
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidParameter("channel count must be >= 1".into()));
        }
        if values.len() != channels * height * width {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}x{} values", channels, height, width),
                actual: format!("{} values", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("feature map contains non-finite entries".into()));
        }
        Ok(Self { channels, height, width, values })
    }

    pub fn constant(channels: usize, height: usize, width: usize, c: f64) -> Self {
        Self { channels, height, width, values: vec![c; channels * height * width] }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, site: Site) -> f64 {
        self.values[c * self.height * self.width + (site.i - 1) * self.width + (site.j - 1)]
    }

    pub(crate) fn from_parts(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Self {
        Self { channels, height, width, values }
    }
}
