use std::path::Path;

use anyhow::{bail, Result};
use naada_core::attention::{self, AttentionMode};
use naada_core::network::{format_summary, NetworkState};
use naada_core::noise_map as nm;
use naada_core::{Domain, GrayImage, Tensor};

use super::load_checkpoint;
use crate::config::Settings;
use crate::error::usage;
use crate::io::{read_unit, BitDepth};
use crate::output::OutputDir;

pub const SUMMARY_FILE: &str = "summary.txt";

/// Checkpointed network, or a fresh one from the settings; eval mode.
fn network(ckpt: Option<&Path>, s: &mut Settings) -> Result<NetworkState> {
    let mut state = match ckpt {
        Some(path) => {
            let st = load_checkpoint(path)?;
            s.network = st.spec.clone();
            st
        }
        None => NetworkState::new(s.network.clone(), s.seed)?,
    };
    state.training = false;
    Ok(state)
}

/// The `p x p` patch at `(row, col)` (centred when unset) as `[1, 1, p, p]`.
fn patch_at(image: &Path, at: (Option<usize>, Option<usize>), p: usize) -> Result<(Tensor, GrayImage)> {
    let img = read_unit(image)?;
    let (h, w) = (img.height(), img.width());
    if h < p || w < p {
        bail!("{} is {h}x{w}, smaller than the {p}x{p} patch", image.display());
    }
    let r0 = at.0.unwrap_or((h - p) / 2);
    let c0 = at.1.unwrap_or((w - p) / 2);
    if r0 + p > h || c0 + p > w {
        return Err(usage(format!("patch at ({r0}, {c0}) does not fit in {h}x{w}")));
    }
    let values: Vec<f64> = (r0..r0 + p)
        .flat_map(|r| img.values()[r * w + c0..r * w + c0 + p].iter().copied())
        .collect();
    log::info!("patch {p}x{p} at ({r0}, {c0}) of {}", image.display());
    let patch = GrayImage::new(p, p, values.clone(), Domain::Unit)?;
    Ok((Tensor::new(values, &[1, 1, p, p])?, patch))
}

pub fn summary(ckpt: Option<&Path>, s: &mut Settings, out: &mut OutputDir) -> Result<()> {
    let state = network(ckpt, s)?;
    let table = format_summary(&state.summary()?);
    print!("{table}");
    out.write(SUMMARY_FILE, table)?;
    Ok(())
}

/// Channel-averaged bottleneck noise map, min-max scaled to `[0, 1]` in
/// `noise_map.png`; raw values go to `noise_map.csv`.
pub fn noise_map(
    ckpt: Option<&Path>,
    image: &Path,
    at: (Option<usize>, Option<usize>),
    s: &mut Settings,
    out: &mut OutputDir,
) -> Result<()> {
    let state = network(ckpt, s)?;
    let (x, patch) = patch_at(image, at, state.spec.patch)?;
    let z = state.encode(&x)?.bottleneck;
    let psi = nm::noise_map(&z, state.spec.noise_window)?;
    let &[_, c, h, w] = psi.shape() else {
        unreachable!("noise maps are 4-D")
    };
    let data = psi.tensor().data();
    let mean: Vec<f64> = (0..h * w)
        .map(|i| (0..c).map(|k| data[k * h * w + i]).sum::<f64>() / c as f64)
        .collect();
    let (lo, hi) = mean.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let span = hi - lo;
    let scaled = mean
        .iter()
        .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect();
    out.image(
        "noise_map.png",
        &GrayImage::new(h, w, scaled, Domain::Unit)?,
        BitDepth::Sixteen,
    )?;
    out.image("patch.png", &patch, BitDepth::Sixteen)?;
    let mut csv = out.csv("noise_map.csv")?;
    for row in mean.chunks(w) {
        csv.write_record(row.iter().map(f64::to_string))?;
    }
    csv.flush()?;
    log::info!("noise map {h}x{w} over {c} channels, range [{lo:.4e}, {hi:.4e}]");
    Ok(())
}

fn write_matrix(out: &mut OutputDir, rel: String, data: &[f64], n: usize) -> Result<()> {
    let mut csv = out.csv(rel)?;
    for row in data.chunks(n) {
        csv.write_record(row.iter().map(f64::to_string))?;
    }
    csv.flush()?;
    Ok(())
}

/// For each head `k`, writes the `N x N` softmax weights
/// (`attention/head{k}_weights.csv`, rows are queries), the scaled content
/// scores and, in noise-aware mode, the scaled noise scores before γ'.
pub fn attention_dump(
    ckpt: Option<&Path>,
    image: &Path,
    at: (Option<usize>, Option<usize>),
    s: &mut Settings,
    out: &mut OutputDir,
) -> Result<()> {
    let state = network(ckpt, s)?;
    let (x, _) = patch_at(image, at, state.spec.patch)?;
    let z = state.encode(&x)?.bottleneck;
    let cfg = state.spec.attention_config();
    let psi = match cfg.mode {
        AttentionMode::NoiseAware => Some(nm::noise_map(&z, cfg.noise_window)?),
        AttentionMode::Standard => None,
    };
    let scores = attention::scores(&z, psi.as_ref(), &state.attention, &cfg)?;
    let weights = attention::forward(&z, &state.attention, &cfg)?.weights;
    let n = weights.shape()[3];
    let block = n * n;
    for k in 0..cfg.heads {
        let part = |t: &Tensor| t.data()[k * block..(k + 1) * block].to_vec();
        write_matrix(out, format!("attention/head{k}_weights.csv"), &part(&weights), n)?;
        write_matrix(out, format!("attention/head{k}_scores.csv"), &part(&scores.standard), n)?;
        if let Some(noise) = &scores.noise {
            write_matrix(out, format!("attention/head{k}_noise_scores.csv"), &part(noise), n)?;
        }
    }
    let gamma = state.attention.gamma.data();
    log::info!("{} heads over {n} tokens, gamma {gamma:?}", cfg.heads);
    Ok(())
}
