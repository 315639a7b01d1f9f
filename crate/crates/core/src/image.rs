//! Single-channel images tagged with their value domain.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Value range of a [`GrayImage`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    /// Gray levels in `[0, 255]`.
    Gray255,
    /// Normalized intensities in `[0, 1]`.
    Unit,
}

impl Domain {
    pub fn max(self) -> f64 {
        match self {
            Domain::Gray255 => 255.0,
            Domain::Unit => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Gray255 => "gray255",
            Domain::Unit => "unit",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Row-major gray image whose values always lie in its domain's range.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    values: Vec<f64>,
    domain: Domain,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, values: Vec<f64>, domain: Domain) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Dimensions(alloc::format!(
                "{} values for a {height}x{width} image",
                values.len()
            )));
        }
        let max = domain.max();
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > max) {
            return Err(Error::Config(alloc::format!("value {v} outside the {domain} range")));
        }
        Ok(GrayImage {
            height,
            width,
            values,
            domain,
        })
    }

    /// Builds an image after clamping every value into the domain range.
    /// Non-finite values are still rejected.
    pub fn clamped(height: usize, width: usize, mut values: Vec<f64>, domain: Domain) -> Result<Self> {
        let max = domain.max();
        values.iter_mut().for_each(|v| *v = v.clamp(0.0, max));
        Self::new(height, width, values, domain)
    }

    pub fn filled(height: usize, width: usize, value: f64, domain: Domain) -> Result<Self> {
        Self::new(height, width, alloc::vec![value; height * width], domain)
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

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub(crate) fn expect_domain(&self, expected: Domain) -> Result<()> {
        if self.domain != expected {
            return Err(Error::Domain {
                expected: expected.name(),
                found: self.domain.name(),
            });
        }
        Ok(())
    }

    /// Rescales into the other domain (`/255` or `*255`).
    pub fn to_domain(&self, domain: Domain) -> GrayImage {
        let factor = domain.max() / self.domain.max();
        let values = self
            .values
            .iter()
            .map(|v| (v * factor).clamp(0.0, domain.max()))
            .collect();
        GrayImage {
            height: self.height,
            width: self.width,
            values,
            domain,
        }
    }

    /// Left-right mirror image.
    pub fn mirrored(&self) -> GrayImage {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.values.chunks_exact(self.width.max(1)) {
            values.extend(row.iter().rev());
        }
        GrayImage {
            height: self.height,
            width: self.width,
            values,
            domain: self.domain,
        }
    }

    pub fn same_size(&self, other: &GrayImage) -> bool {
        self.height == other.height && self.width == other.width
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_bounds_are_enforced() {
        assert!(GrayImage::new(1, 2, alloc::vec![0.0, 256.0], Domain::Gray255).is_err());
        assert!(GrayImage::new(1, 2, alloc::vec![0.0, 1.5], Domain::Unit).is_err());
        assert!(GrayImage::new(1, 2, alloc::vec![0.0, f64::NAN], Domain::Unit).is_err());
        assert!(GrayImage::new(1, 2, alloc::vec![0.0, 1.0], Domain::Unit).is_ok());
    }

    #[test]
    fn mirror_is_an_involution() {
        let img = GrayImage::new(2, 3, alloc::vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6], Domain::Unit).unwrap();
        let m = img.mirrored();
        assert_eq!(m.values(), &[0.3, 0.2, 0.1, 0.6, 0.5, 0.4]);
        assert_eq!(m.mirrored(), img);
    }

    #[test]
    fn domain_conversion() {
        let img = GrayImage::new(1, 2, alloc::vec![0.0, 255.0], Domain::Gray255).unwrap();
        assert_eq!(img.to_domain(Domain::Unit).values(), &[0.0, 1.0]);
    }
}
