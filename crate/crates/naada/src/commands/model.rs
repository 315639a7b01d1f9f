use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use naada_core::checkpoint;
use naada_core::dataset::{patch_pairs, PatchPair, Split};
use naada_core::network::NetworkState;
use naada_core::patches::{extract_patches, make_grid, reassemble};
use naada_core::train::{evaluate, predict, train_with, EpochRecord};
use naada_core::{synthetic, Domain};

use super::by_stem;
use crate::config::Settings;
use crate::io::{collect_images, read_unit, BitDepth};
use crate::manifest;
use crate::output::OutputDir;

pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const HISTORY_FILE: &str = "history.csv";

pub enum TrainData {
    /// A `manifest.txt` whose `clean/` and `noisy/` directories sit next to it.
    Manifest(PathBuf),
    /// Generated phantom crops; a fifth of them is held out for validation.
    Synthetic(usize),
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkState> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    checkpoint::decode(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn manifest_pairs(path: &Path, patch: usize) -> Result<(Vec<PatchPair>, Vec<PatchPair>)> {
    let root = path.parent().unwrap_or(Path::new("."));
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for rec in manifest::read(path)? {
        let dest = match rec.split {
            Split::Train => &mut train,
            Split::Val => &mut val,
            Split::Test => continue,
        };
        let name = manifest::record_name(&rec)?;
        let clean = read_unit(&root.join("clean").join(format!("{name}.png")))?;
        let noisy = read_unit(&root.join("noisy").join(format!("{name}.png")))?;
        let grid = make_grid(clean.height(), clean.width(), patch).with_context(|| format!("patching {name}"))?;
        dest.extend(patch_pairs(&clean, &noisy, &grid).with_context(|| format!("patching {name}"))?);
    }
    Ok((train, val))
}

fn synthetic_pairs(n: usize, s: &Settings) -> Result<(Vec<PatchPair>, Vec<PatchPair>)> {
    if n < 2 {
        return Err(crate::error::usage("--synthetic needs at least 2 pairs"));
    }
    let p = s.network.patch;
    let mut pairs = synthetic::patch_pairs(n, p, 3 * p, 6 * p, &s.noise, s.seed)?;
    let val = pairs.split_off(n - (n / 5).max(1));
    Ok((pairs, val))
}

fn write_history(out: &mut OutputDir, history: &[EpochRecord]) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.8}"));
    let mut w = out.csv(HISTORY_FILE)?;
    w.write_record(["epoch", "train_loss", "val_loss", "train_psnr", "val_psnr"])?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            format!("{:.8}", r.train_loss),
            opt(r.val_loss),
            format!("{:.4}", r.train_psnr),
            r.val_psnr.map_or_else(String::new, |v| format!("{v:.4}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn train(data: &TrainData, s: &Settings, out: &mut OutputDir) -> Result<()> {
    let (train_set, val_set) = match data {
        TrainData::Manifest(path) => manifest_pairs(path, s.network.patch)?,
        TrainData::Synthetic(n) => synthetic_pairs(*n, s)?,
    };
    log::info!(
        "{} network, {} training and {} validation patches of {p}x{p}",
        s.network.mode.name(),
        train_set.len(),
        val_set.len(),
        p = s.network.patch
    );
    let state = NetworkState::new(s.network.clone(), s.seed)?;
    log::info!("{} trainable parameters", state.param_count());
    let cfg = s.train_config();
    let mut seen = Vec::new();
    let result = train_with(state, &train_set, &val_set, &cfg, |r| {
        match (r.val_loss, r.val_psnr) {
            (Some(vl), Some(vp)) => log::info!(
                "epoch {:>3}: train loss {:.6} ({:.2} dB), val loss {vl:.6} ({vp:.2} dB)",
                r.epoch,
                r.train_loss,
                r.train_psnr
            ),
            _ => log::info!(
                "epoch {:>3}: train loss {:.6} ({:.2} dB)",
                r.epoch,
                r.train_loss,
                r.train_psnr
            ),
        }
        seen.push(r.clone());
    });
    write_history(out, &seen)?;
    let outcome = result.context("training failed")?;
    out.write(CHECKPOINT_FILE, checkpoint::encode(&outcome.state))?;

    let ev = evaluate(&outcome.state, &val_set, cfg.batch_size)?;
    println!(
        "best epoch {}{}: val loss {:.6}, val PSNR {:.2} dB (input {:.2} dB)",
        outcome.best_epoch,
        if outcome.stopped_early { " (stopped early)" } else { "" },
        outcome.best_val_loss,
        ev.psnr,
        ev.input_psnr
    );
    Ok(())
}

/// Denoises each image patch by patch and writes `denoised/<stem>.png`.
/// The network spec comes from the checkpoint.
pub fn denoise(ckpt: &Path, inputs: &[PathBuf], s: &mut Settings, out: &mut OutputDir) -> Result<()> {
    let state = load_checkpoint(ckpt)?;
    s.network = state.spec.clone();
    let files = by_stem(collect_images(inputs)?)?;
    if files.is_empty() {
        bail!("no images to denoise");
    }
    let p = state.spec.patch;
    for (name, path) in &files {
        let img = read_unit(path)?;
        let grid = make_grid(img.height(), img.width(), p).with_context(|| format!("patching {}", path.display()))?;
        let patches = extract_patches(&img, &grid)?;
        let pred =
            predict(&state, &patches, s.train.batch_size).with_context(|| format!("denoising {}", path.display()))?;
        let den = reassemble(&pred, &grid, Domain::Unit)?;
        out.image(format!("denoised/{name}.png"), &den, BitDepth::Sixteen)?;
        log::info!("{name}: {} patches", grid.len());
    }
    Ok(())
}
