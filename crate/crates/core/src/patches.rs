//! Overlapping patch grids, extraction and averaging reassembly.
//!
//! Anchors along an axis of length `n` are spaced at
//! `floor((n - p) / (count - 1))` with the last one flush to the edge, where
//! `count = ceil((n - p) / s) + 1` for a nominal stride `s`. When the
//! remainder would leave the last gap wider than a patch, the anchors are
//! spread evenly instead. The default
//! nominal stride is `p - p / 16`, which tiles a 1424x2668 radiograph with
//! 7 x 13 = 91 patches of 224.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{Domain, GrayImage};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchGrid {
    pub height: usize,
    pub width: usize,
    pub patch: usize,
    /// Top offsets of the patch rows.
    pub rows: Vec<usize>,
    /// Left offsets of the patch columns.
    pub cols: Vec<usize>,
}

/// Nominal stride used by [`make_grid`].
pub fn default_stride(patch: usize) -> usize {
    (patch - patch / 16).max(1)
}

fn anchors(n: usize, patch: usize, stride: usize) -> Vec<usize> {
    if n == patch {
        return vec![0];
    }
    let span = n - patch;
    let count = span.div_ceil(stride) + 1;
    let step = span / (count - 1);
    // The flush last anchor absorbs the division remainder. If that would
    // open a gap wider than a patch, spread the anchors evenly instead.
    if span - (count - 2) * step <= patch {
        let mut a: Vec<usize> = (0..count - 1).map(|i| i * step).collect();
        a.push(span);
        a
    } else {
        (0..count).map(|i| i * span / (count - 1)).collect()
    }
}

pub fn make_grid(height: usize, width: usize, patch: usize) -> Result<PatchGrid> {
    make_grid_with_stride(height, width, patch, default_stride(patch))
}

pub fn make_grid_with_stride(height: usize, width: usize, patch: usize, stride: usize) -> Result<PatchGrid> {
    if patch == 0 || stride == 0 || stride > patch {
        return Err(Error::Config(alloc::format!("stride {stride} must be in 1..={patch}")));
    }
    if height < patch || width < patch {
        return Err(Error::TooSmall {
            height,
            width,
            min: patch,
        });
    }
    Ok(PatchGrid {
        height,
        width,
        patch,
        rows: anchors(height, patch, stride),
        cols: anchors(width, patch, stride),
    })
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(top, left)` of every patch, row by row.
    pub fn anchors(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .flat_map(move |&r| self.cols.iter().map(move |&c| (r, c)))
    }

    /// Number of patches covering each pixel.
    pub fn coverage(&self) -> Vec<u32> {
        let mut cov = vec![0u32; self.height * self.width];
        for (r0, c0) in self.anchors() {
            for r in r0..r0 + self.patch {
                cov[r * self.width + c0..r * self.width + c0 + self.patch]
                    .iter_mut()
                    .for_each(|v| *v += 1);
            }
        }
        cov
    }
}

/// Copies every patch out of `img` as a row-major `patch * patch` buffer.
pub fn extract_patches(img: &GrayImage, grid: &PatchGrid) -> Result<Vec<Vec<f64>>> {
    if img.height() != grid.height || img.width() != grid.width {
        return Err(Error::Dimensions(alloc::format!(
            "{}x{} image for a {}x{} grid",
            img.height(),
            img.width(),
            grid.height,
            grid.width
        )));
    }
    let p = grid.patch;
    let v = img.values();
    Ok(grid
        .anchors()
        .map(|(r0, c0)| {
            let mut out = Vec::with_capacity(p * p);
            for r in r0..r0 + p {
                out.extend_from_slice(&v[r * grid.width + c0..r * grid.width + c0 + p]);
            }
            out
        })
        .collect())
}

/// Averages overlapping patches back into a full image.
pub fn reassemble(patches: &[Vec<f64>], grid: &PatchGrid, domain: Domain) -> Result<GrayImage> {
    if patches.len() != grid.len() {
        return Err(Error::Dimensions(alloc::format!(
            "{} patches for a grid of {}",
            patches.len(),
            grid.len()
        )));
    }
    let p = grid.patch;
    let mut sum = vec![0.0; grid.height * grid.width];
    for (patch, (r0, c0)) in patches.iter().zip(grid.anchors()) {
        if patch.len() != p * p {
            return Err(Error::Dimensions(alloc::format!(
                "patch of {} values, expected {}",
                patch.len(),
                p * p
            )));
        }
        for (i, row) in patch.chunks_exact(p).enumerate() {
            let dst = &mut sum[(r0 + i) * grid.width + c0..(r0 + i) * grid.width + c0 + p];
            dst.iter_mut().zip(row).for_each(|(d, s)| *d += s);
        }
    }
    let values = sum.iter().zip(grid.coverage()).map(|(s, c)| s / c as f64).collect();
    GrayImage::new(grid.height, grid.width, values, domain)
}
