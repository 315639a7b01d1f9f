use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use naada_core::dataset::{plan_records, split_counts, Split};
use naada_core::metrics::psnr;
use naada_core::noise::{synthesize_noise, AppliedNoise, ImpulseOrder};
use naada_core::rng::derive_seed;
use naada_core::synthetic::phantom;
use naada_core::Domain;

use super::{by_stem, nonempty};
use crate::config::Settings;
use crate::io::{list_images, read_gray, BitDepth};
use crate::manifest;
use crate::output::OutputDir;

pub fn phantoms(count: usize, height: usize, width: usize, s: &Settings, out: &mut OutputDir) -> Result<()> {
    for i in 0..count {
        let img = phantom(height, width, derive_seed(s.seed, i as u64))?;
        out.image(format!("phantom_{i:03}.png"), &img, BitDepth::Eight)?;
    }
    log::info!("wrote {count} phantoms of {height}x{width} to {}", out.root().display());
    Ok(())
}

fn sidecar(source: &Path, a: &AppliedNoise) -> String {
    let st = a.stages;
    let stages = [
        ("quantum", st.quantum),
        ("gray_poisson", st.gray_poisson),
        ("gaussian", st.gaussian),
        ("speckle", st.speckle),
        ("impulse", st.impulse),
    ]
    .iter()
    .filter(|(_, on)| *on)
    .map(|(n, _)| *n)
    .collect::<Vec<_>>()
    .join(",");
    let order = match a.order {
        ImpulseOrder::SpeckleFirst => "speckle_first",
        ImpulseOrder::ImpulseFirst => "impulse_first",
    };
    let mut text = String::new();
    for (k, v) in [
        ("source", source.display().to_string()),
        ("seed", a.seed.to_string()),
        ("exposure", a.exposure.to_string()),
        ("rho", a.photon_scale.to_string()),
        ("sigma_g", a.sigma_g.to_string()),
        ("sigma_s", a.sigma_s.to_string()),
        ("sp_fraction", a.sp_fraction.to_string()),
        ("impulse_sites", a.impulse_sites.to_string()),
        ("impulse_order", order.to_string()),
        ("stages", if stages.is_empty() { "none".into() } else { stages }),
    ] {
        writeln!(text, "{k} = {v}").unwrap();
    }
    text
}

/// Noises every image of `input` with seed `derive_seed(seed, i)`, `i`
/// being the image's rank in file-name order.
pub fn noise(input: &Path, s: &Settings, out: &mut OutputDir) -> Result<()> {
    let files = by_stem(nonempty(list_images(input)?, input)?)?;
    let mut table = out.csv("noise_summary.csv")?;
    table.write_record(["image", "seed", "sigma_g", "impulse_sites", "input_psnr"])?;
    let mut total = 0.0;
    for (i, (name, path)) in files.iter().enumerate() {
        let clean = read_gray(path)?;
        let seed = derive_seed(s.seed, i as u64);
        let (noisy, applied) =
            synthesize_noise(&clean, &s.noise_for(seed)).with_context(|| format!("noising {}", path.display()))?;
        let db = psnr(&clean.to_domain(Domain::Unit), &noisy)?;
        total += db;
        out.image(format!("noisy/{name}.png"), &noisy, BitDepth::Sixteen)?;
        out.write(format!("noisy/{name}.log"), sidecar(path, &applied))?;
        table.write_record([
            name.clone(),
            seed.to_string(),
            format!("{:.6}", applied.sigma_g),
            applied.impulse_sites.to_string(),
            format!("{db:.4}"),
        ])?;
        log::debug!("{name}: sigma_g {:.4}, input PSNR {db:.2} dB", applied.sigma_g);
    }
    table.flush()?;
    let mean = total / files.len() as f64;
    log::info!("noised {} images, mean input PSNR {mean:.2} dB", files.len());
    println!("mean input PSNR: {mean:.2} dB over {} images", files.len());
    Ok(())
}

/// Reads every source (skipping unreadable ones), mirrors it, assigns
/// splits by source, synthesizes noise and writes `clean/`, `noisy/` and
/// `manifest.txt`.
pub fn build_dataset(source: &Path, s: &Settings, out: &mut OutputDir) -> Result<()> {
    let files = by_stem(nonempty(list_images(source)?, source)?)?;
    let mut images = Vec::new();
    for (_, path) in files {
        match read_gray(&path) {
            Ok(img) => images.push((path.display().to_string(), img)),
            Err(e) => log::warn!("skipping {}: {e:#}", path.display()),
        }
    }
    if images.is_empty() {
        anyhow::bail!("none of the images in {} could be read", source.display());
    }
    let sources: Vec<String> = images.iter().map(|(p, _)| p.clone()).collect();
    let mut records = plan_records(&sources, s.seed);
    for rec in &mut records {
        let base = &images
            .iter()
            .find(|(p, _)| *p == rec.path)
            .expect("planned from these sources")
            .1;
        let clean = if rec.mirror { base.mirrored() } else { base.clone() };
        let (noisy, applied) =
            synthesize_noise(&clean, &s.noise_for(rec.seed)).with_context(|| format!("noising {}", rec.path))?;
        rec.sigma_g = Some(applied.sigma_g);
        let name = manifest::record_name(rec)?;
        out.image(
            format!("clean/{name}.png"),
            &clean.to_domain(Domain::Unit),
            BitDepth::Sixteen,
        )?;
        out.image(format!("noisy/{name}.png"), &noisy, BitDepth::Sixteen)?;
    }
    out.write("manifest.txt", manifest::render(&records))?;
    let (train, val, test) = split_counts(images.len());
    let count = |sp: Split| records.iter().filter(|r| r.split == sp).count();
    debug_assert_eq!(
        (count(Split::Train), count(Split::Val), count(Split::Test)),
        (2 * train, 2 * val, 2 * test)
    );
    log::info!(
        "{} sources -> {} records: {} train, {} val, {} test",
        images.len(),
        records.len(),
        count(Split::Train),
        count(Split::Val),
        count(Split::Test)
    );
    Ok(())
}
