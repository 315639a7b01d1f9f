use std::collections::HashMap;
use std::path::Path;

use anyhow::{Context, Result};
use naada_core::metrics::{psnr, ssim, ImageScore, MetricReport};

use super::{by_stem, nonempty};
use crate::io::{list_images, read_unit};
use crate::output::OutputDir;

pub const PER_IMAGE_FILE: &str = "per_image.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// Scores every clean image against the same-named image in `denoised`.
pub fn eval(clean_dir: &Path, denoised_dir: &Path, method: &str, out: &mut OutputDir) -> Result<()> {
    let clean = by_stem(nonempty(list_images(clean_dir)?, clean_dir)?)?;
    let candidates: HashMap<String, _> = by_stem(list_images(denoised_dir)?)?.into_iter().collect();
    let mut scores = Vec::with_capacity(clean.len());
    for (name, path) in &clean {
        let other = candidates
            .get(name)
            .with_context(|| format!("no image named {name} in {}", denoised_dir.display()))?;
        let (a, b) = (read_unit(path)?, read_unit(other)?);
        let ctx = || format!("scoring {name}");
        scores.push(ImageScore {
            name: name.clone(),
            psnr: psnr(&a, &b).with_context(ctx)?,
            ssim: ssim(&a, &b).with_context(ctx)?,
        });
    }

    let mut w = out.csv(PER_IMAGE_FILE)?;
    w.write_record(["method", "image", "psnr", "ssim"])?;
    for s in &scores {
        w.write_record([method, &s.name, &format!("{:.6}", s.psnr), &format!("{:.6}", s.ssim)])?;
    }
    w.flush()?;

    if scores.len() < 2 {
        log::warn!("one image only; no confidence interval, {AGGREGATE_FILE} not written");
        println!("{method}: PSNR {:.2} dB, SSIM {:.4}", scores[0].psnr, scores[0].ssim);
        return Ok(());
    }
    let report = MetricReport::from_scores(method, scores)?;
    let mut w = out.csv(AGGREGATE_FILE)?;
    w.write_record([
        "method",
        "n",
        "psnr_mean",
        "psnr_ci95",
        "ssim_mean",
        "ssim_ci95",
        "psnr",
        "ssim",
    ])?;
    w.write_record([
        method.to_string(),
        report.psnr.n.to_string(),
        format!("{:.6}", report.psnr.mean),
        format!("{:.6}", report.psnr.half_width),
        format!("{:.6}", report.ssim.mean),
        format!("{:.6}", report.ssim.half_width),
        report.psnr.format(2),
        report.ssim.format(3),
    ])?;
    w.flush()?;
    println!(
        "{method}: PSNR {} dB, SSIM {} over {} images",
        report.psnr.format(2),
        report.ssim.format(3),
        report.psnr.n
    );
    Ok(())
}
