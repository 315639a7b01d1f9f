//! Procedural radiograph-like phantoms for demos and tests.
//!
//! The layout loosely follows a panoramic view: a dark background, a bright
//! U-shaped jaw band, two rows of teeth with darker pulp canals, and dense
//! structures at both sides. Nothing here is anatomically calibrated.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::dataset::PatchPair;
use crate::error::{Error, Result};
use crate::image::{Domain, GrayImage};
use crate::noise::{synthesize_noise, NoiseConfig};
use crate::rng::{derive_seed, seeded};

struct Tooth {
    center: f64,
    half_width: f64,
    top: f64,
    bottom: f64,
    level: f64,
}

/// A gray-level (`[0, 255]`) phantom of the given size, determined by `seed`.
pub fn phantom(height: usize, width: usize, seed: u64) -> Result<GrayImage> {
    let mut rng = seeded(seed);
    let (h, w) = (height as f64, width as f64);

    let base = rng.random_range(25.0..55.0);
    let ripple = rng.random_range(4.0..12.0);
    let ripple_freq = rng.random_range(1.0..3.0);
    let jaw_level = rng.random_range(95.0..130.0);
    let jaw_cy = h * rng.random_range(0.25..0.4);
    let jaw_ax = w * rng.random_range(0.38..0.46);
    let jaw_ay = h * rng.random_range(0.5..0.62);
    let side_level = rng.random_range(80.0..115.0);

    let mut teeth = Vec::new();
    for row in 0..2 {
        let count = rng.random_range(8..14);
        let span = w * rng.random_range(0.45..0.6);
        let start = (w - span) / 2.0;
        let pitch = span / count as f64;
        let mid = h * if row == 0 { 0.4 } else { 0.62 };
        for i in 0..count {
            let len = h * rng.random_range(0.16..0.26);
            let (top, bottom) = if row == 0 { (mid - len, mid) } else { (mid, mid + len) };
            teeth.push(Tooth {
                center: start + pitch * (i as f64 + 0.5) + rng.random_range(-0.1..0.1) * pitch,
                half_width: pitch * rng.random_range(0.3..0.42),
                top,
                bottom,
                level: rng.random_range(165.0..225.0),
            });
        }
    }

    let mut values = vec![0.0; height * width];
    for r in 0..height {
        let y = r as f64 + 0.5;
        for c in 0..width {
            let x = c as f64 + 0.5;
            let mut v = base
                + 15.0 * (y / h)
                + ripple * libm::sin(core::f64::consts::TAU * ripple_freq * x / w) * libm::cos(3.0 * y / h);

            // Jaw band: between two concentric ellipses, below their centre.
            let ex = (x - w / 2.0) / jaw_ax;
            let ey = (y - jaw_cy) / jaw_ay;
            let e = ex * ex + ey * ey;
            if y > jaw_cy && (0.55..1.0).contains(&e) {
                let edge = (1.0 - e).min(e - 0.55) * 12.0;
                v = v.max(jaw_level * edge.min(1.0) + v * (1.0 - edge.min(1.0)));
            }

            // Dense lateral structures.
            let side = (x / w).min(1.0 - x / w);
            if side < 0.1 {
                v += (side_level - v).max(0.0) * (1.0 - side / 0.1);
            }

            for t in &teeth {
                let dx = (x - t.center).abs();
                if dx < t.half_width && y >= t.top && y <= t.bottom {
                    let q = dx / t.half_width;
                    let taper = 1.0 - q * q * q * q;
                    let canal = if dx < t.half_width * 0.18 { 0.65 } else { 1.0 };
                    v = v.max(t.level * canal * taper + v * (1.0 - taper));
                }
            }
            values[r * width + c] = v;
        }
    }
    GrayImage::clamped(height, width, smooth3(&values, height, width), Domain::Gray255)
}

/// `count` aligned clean/noisy patches, each cut at a random position from
/// its own `height x width` phantom after noise synthesis on the full image.
/// `noise.seed` is replaced by a per-phantom seed derived from `seed`.
pub fn patch_pairs(
    count: usize,
    patch: usize,
    height: usize,
    width: usize,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Vec<PatchPair>> {
    if height < patch || width < patch {
        return Err(Error::TooSmall {
            height,
            width,
            min: patch,
        });
    }
    let mut crops = seeded(derive_seed(seed, u64::MAX));
    let mut out = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let clean = phantom(height, width, derive_seed(seed, 2 * i))?;
        let cfg = NoiseConfig {
            seed: derive_seed(seed, 2 * i + 1),
            ..noise.clone()
        };
        let (noisy, _) = synthesize_noise(&clean, &cfg)?;
        let clean = clean.to_domain(Domain::Unit);
        let r0 = crops.random_range(0..=height - patch);
        let c0 = crops.random_range(0..=width - patch);
        let cut = |img: &GrayImage| -> Vec<f64> {
            (r0..r0 + patch)
                .flat_map(|r| img.values()[r * width + c0..r * width + c0 + patch].iter().copied())
                .collect()
        };
        out.push(PatchPair {
            noisy: cut(&noisy),
            clean: cut(&clean),
        });
    }
    Ok(out)
}

fn smooth3(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for r in 0..h {
        for c in 0..w {
            let (mut acc, mut n) = (0.0, 0.0);
            for rr in r.saturating_sub(1)..(r + 2).min(h) {
                for cc in c.saturating_sub(1)..(c + 2).min(w) {
                    acc += src[rr * w + cc];
                    n += 1.0;
                }
            }
            out[r * w + c] = acc / n;
        }
    }
    out
}
