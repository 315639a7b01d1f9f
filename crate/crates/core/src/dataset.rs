//! Split assignment, manifest records and training pairs.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::image::{Domain, GrayImage};
use crate::patches::{extract_patches, PatchGrid};
use crate::rng::{derive_seed, seeded};

pub const TRAIN_FRACTION: f64 = 0.70;
pub const VAL_FRACTION: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(alloc::format!("unknown split {s:?}"))),
        }
    }
}

/// One image of the corpus after mirroring.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRecord {
    /// Source image path as given.
    pub path: String,
    pub split: Split,
    /// Whether this record is the left-right mirror of `path`.
    pub mirror: bool,
    /// Seed of the noise synthesized for this record.
    pub seed: u64,
    /// Gaussian sigma actually drawn, once noise has been synthesized.
    pub sigma_g: Option<f64>,
}

/// `(train, val, test)` image counts: rounded 70% and 15%, the rest to test.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    let train = libm::round(TRAIN_FRACTION * n as f64) as usize;
    let val = (libm::round(VAL_FRACTION * n as f64) as usize).min(n - train);
    (train, val, n - train - val)
}

/// Split of each of `n` source images after a seeded shuffle.
pub fn assign_splits(n: usize, seed: u64) -> Vec<Split> {
    let (train, val, _) = split_counts(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let mut splits = alloc::vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        if rank < train {
            splits[i] = Split::Train;
        } else if rank < train + val {
            splits[i] = Split::Val;
        }
    }
    splits
}

/// Original and mirrored record for every source, mirrors sharing their
/// source's split. Noise seeds are derived from `seed` and the record index.
pub fn plan_records(sources: &[String], seed: u64) -> Vec<ManifestRecord> {
    let splits = assign_splits(sources.len(), seed);
    let mut out = Vec::with_capacity(2 * sources.len());
    for (i, (path, split)) in sources.iter().zip(splits).enumerate() {
        for mirror in [false, true] {
            out.push(ManifestRecord {
                path: path.clone(),
                split,
                mirror,
                seed: derive_seed(seed, (2 * i + mirror as usize) as u64),
                sigma_g: None,
            });
        }
    }
    out
}

/// Aligned noisy input and clean target, each `patch * patch` unit values.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair {
    pub noisy: Vec<f64>,
    pub clean: Vec<f64>,
}

/// Cuts a clean/noisy image pair (both unit domain) along `grid`.
pub fn patch_pairs(clean: &GrayImage, noisy: &GrayImage, grid: &PatchGrid) -> Result<Vec<PatchPair>> {
    clean.expect_domain(Domain::Unit)?;
    noisy.expect_domain(Domain::Unit)?;
    let c = extract_patches(clean, grid)?;
    let n = extract_patches(noisy, grid)?;
    Ok(n.into_iter()
        .zip(c)
        .map(|(noisy, clean)| PatchPair { noisy, clean })
        .collect())
}
