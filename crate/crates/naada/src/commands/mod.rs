//! Subcommand implementations.

mod data;
mod eval;
mod inspect;
mod model;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};

use crate::cli::Command;
use crate::config::Settings;
use crate::output::OutputDir;

pub use data::{build_dataset, noise, phantoms};
pub use eval::eval;
pub use inspect::{attention_dump, noise_map, summary};
pub use model::{denoise, load_checkpoint, train, TrainData};

pub fn dispatch(cmd: &Command, s: &mut Settings, out: &mut OutputDir) -> Result<()> {
    log::debug!("running {}", cmd.name());
    match cmd {
        Command::Phantom { count, height, width } => phantoms(*count, *height, *width, s, out),
        Command::Noise { input } => noise(input, s, out),
        Command::BuildDataset { source } => build_dataset(source, s, out),
        Command::Train { manifest, synthetic } => {
            let data = match (manifest, synthetic) {
                (Some(m), _) => TrainData::Manifest(m.clone()),
                (None, Some(n)) => TrainData::Synthetic(*n),
                (None, None) => return Err(crate::error::usage("train needs --manifest or --synthetic")),
            };
            train(&data, s, out)
        }
        Command::Denoise { checkpoint, inputs } => denoise(checkpoint, inputs, s, out),
        Command::Eval {
            clean,
            denoised,
            method,
        } => eval(clean, denoised, method, out),
        Command::Summary { checkpoint } => summary(checkpoint.as_deref(), s, out),
        Command::NoiseMap { image, checkpoint, at } => {
            noise_map(checkpoint.as_deref(), image, (at.row, at.col), s, out)
        }
        Command::AttentionDump { image, checkpoint, at } => {
            attention_dump(checkpoint.as_deref(), image, (at.row, at.col), s, out)
        }
    }
}

/// Pairs every file with its stem, rejecting stems that occur twice.
fn by_stem(files: Vec<PathBuf>) -> Result<Vec<(String, PathBuf)>> {
    let mut seen: HashMap<String, PathBuf> = HashMap::new();
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let stem = crate::io::stem(&f)?;
        if let Some(prev) = seen.insert(stem.clone(), f.clone()) {
            bail!(
                "{} and {} would produce the same output name",
                prev.display(),
                f.display()
            );
        }
        out.push((stem, f));
    }
    Ok(out)
}

fn nonempty(files: Vec<PathBuf>, dir: &Path) -> Result<Vec<PathBuf>> {
    if files.is_empty() {
        bail!("no PNG or PGM images in {}", dir.display());
    }
    Ok(files)
}
