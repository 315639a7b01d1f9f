//! PSNR, SSIM and corpus-level aggregation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Value reported for identical images instead of +inf.
pub const PSNR_CAP: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Dimensions(alloc::format!("{} vs {} values", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// `10 log10(peak² / mse)` over raw buffers, capped at [`PSNR_CAP`].
pub fn psnr_values(a: &[f64], b: &[f64], peak: f64) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * libm::log10(peak * peak / m)).min(PSNR_CAP))
}

fn check_pair(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if !a.same_size(b) || a.domain() != b.domain() {
        return Err(Error::Dimensions(alloc::format!(
            "{}x{} {} vs {}x{} {}",
            a.height(),
            a.width(),
            a.domain(),
            b.height(),
            b.width(),
            b.domain()
        )));
    }
    Ok(())
}

/// PSNR in dB with the domain maximum as peak (1.0 for unit images).
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_pair(a, b)?;
    psnr_values(a.values(), b.values(), a.domain().max())
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian filter keeping only windows fully inside the image.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ho, wo) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * wo];
    for y in 0..h {
        for x in 0..wo {
            rows[y * wo + x] = (0..SSIM_WINDOW).map(|i| k[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ho * wo];
    for y in 0..ho {
        for x in 0..wo {
            out[y * wo + x] = (0..SSIM_WINDOW).map(|i| k[i] * rows[(y + i) * wo + x]).sum();
        }
    }
    out
}

/// Mean SSIM over all 11x11 windows inside the image (Gaussian weights,
/// sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range from the domain).
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check_pair(a, b)?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::TooSmall {
            height: h,
            width: w,
            min: SSIM_WINDOW,
        });
    }
    let l = a.domain().max();
    let c1 = (SSIM_K1 * l) * (SSIM_K1 * l);
    let c2 = (SSIM_K2 * l) * (SSIM_K2 * l);
    let k = gaussian_kernel();
    let (x, y) = (a.values(), b.values());
    let prod = |f: fn(f64, f64) -> f64| -> Vec<f64> { x.iter().zip(y).map(|(&p, &q)| f(p, q)).collect() };
    let mu_x = filter_valid(x, h, w, &k);
    let mu_y = filter_valid(y, h, w, &k);
    let xx = filter_valid(&prod(|p, _| p * p), h, w, &k);
    let yy = filter_valid(&prod(|_, q| q * q), h, w, &k);
    let xy = filter_valid(&prod(|p, q| p * q), h, w, &k);
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = xx[i] - mx * mx;
        let vy = yy[i] - my * my;
        let cov = xy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}

/// Mean with a normal-approximation 95% confidence interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std_dev: f64,
    pub std_err: f64,
    /// `1.96 * std_err`.
    pub half_width: f64,
}

impl Summary {
    /// Renders as `mean ± half_width`, e.g. `31.86 ± 0.37`.
    pub fn format(&self, decimals: usize) -> String {
        alloc::format!("{:.*} ± {:.*}", decimals, self.mean, decimals, self.half_width)
    }
}

pub fn aggregate(values: &[f64]) -> Result<Summary> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Config(alloc::format!(
            "need at least two values to aggregate, got {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let std_dev = libm::sqrt(var);
    let std_err = std_dev / libm::sqrt(n as f64);
    Ok(Summary {
        n,
        mean,
        std_dev,
        std_err,
        half_width: 1.96 * std_err,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageScore {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

/// Per-image scores and their aggregates for one method.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub method: String,
    pub images: Vec<ImageScore>,
    pub psnr: Summary,
    pub ssim: Summary,
}

impl MetricReport {
    pub fn from_scores(method: impl Into<String>, images: Vec<ImageScore>) -> Result<Self> {
        let psnr = aggregate(&images.iter().map(|s| s.psnr).collect::<Vec<_>>())?;
        let ssim = aggregate(&images.iter().map(|s| s.ssim).collect::<Vec<_>>())?;
        Ok(MetricReport {
            method: method.into(),
            images,
            psnr,
            ssim,
        })
    }
}
