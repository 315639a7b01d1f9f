//! Sequential radiographic noise model.
//!
//! A clean gray-level radiograph passes through, in order:
//!
//! 1. quantum noise: gray levels become photon intensities `10^(-X/c)`,
//!    photon counts are drawn from `Poisson(rho * I)` and mapped back;
//! 2. Poisson noise on the gray levels themselves;
//! 3. normalization to `[0, 1]`;
//! 4. additive white Gaussian noise with a per-image `sigma_g`;
//! 5. multiplicative speckle `X + X * N(0, sigma_s^2)`;
//! 6. salt-and-pepper on an exact fraction of pixel sites.
//!
//! Steps 5 and 6 can be swapped through [`ImpulseOrder`]. Each stage draws
//! from its own seeded stream, so toggling one stage leaves the random draws
//! of the others untouched.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::image::{Domain, GrayImage};
use crate::rng::{derive_seed, seeded, Rng};

/// How the Gaussian standard deviation is chosen for each image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaG {
    Fixed(f64),
    /// Drawn once per image from `U(0, max)`.
    Uniform {
        max: f64,
    },
}

impl Default for SigmaG {
    fn default() -> Self {
        SigmaG::Uniform { max: 0.35 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ImpulseOrder {
    /// Speckle, then salt-and-pepper.
    #[default]
    SpeckleFirst,
    /// Salt-and-pepper, then speckle.
    ImpulseFirst,
}

/// Per-stage switches; everything is on by default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stages {
    pub quantum: bool,
    pub gray_poisson: bool,
    pub gaussian: bool,
    pub speckle: bool,
    pub impulse: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        quantum: true,
        gray_poisson: true,
        gaussian: true,
        speckle: true,
        impulse: true,
    };
    pub const NONE: Stages = Stages {
        quantum: false,
        gray_poisson: false,
        gaussian: false,
        speckle: false,
        impulse: false,
    };

    /// The first `n` stages in pipeline order.
    pub fn first(n: usize) -> Stages {
        Stages {
            quantum: n > 0,
            gray_poisson: n > 1,
            gaussian: n > 2,
            speckle: n > 3,
            impulse: n > 4,
        }
    }
}

impl Default for Stages {
    fn default() -> Self {
        Stages::ALL
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig {
    /// Exposure constant `c` of the gray-to-intensity map.
    pub exposure: f64,
    /// Photon scaling `rho`: expected counts at full intensity.
    pub photon_scale: f64,
    pub sigma_g: SigmaG,
    pub sigma_s: f64,
    pub sp_fraction: f64,
    pub seed: u64,
    pub order: ImpulseOrder,
    pub stages: Stages,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            exposure: 50.0,
            photon_scale: 200.0,
            sigma_g: SigmaG::default(),
            sigma_s: 0.1,
            sp_fraction: 0.05,
            seed: 0,
            order: ImpulseOrder::default(),
            stages: Stages::ALL,
        }
    }
}

/// Largest rate the Poisson sampler accepts.
const MAX_RATE: f64 = 1.0e18;

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.exposure > 0.0 && self.exposure.is_finite()) {
            return bad("exposure constant must be positive");
        }
        if !(self.photon_scale >= 1.0 && self.photon_scale <= MAX_RATE) {
            return bad("photon scale must lie in [1, 1e18]");
        }
        match self.sigma_g {
            SigmaG::Fixed(s) | SigmaG::Uniform { max: s } if !(s >= 0.0 && s.is_finite()) => {
                return bad("sigma_g must be non-negative");
            }
            _ => {}
        }
        if !(self.sigma_s >= 0.0 && self.sigma_s.is_finite()) {
            return bad("sigma_s must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.sp_fraction) {
            return bad("salt-and-pepper fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// The concrete parameters one [`synthesize_noise`] call used.
#[derive(Clone, Debug, PartialEq)]
pub struct AppliedNoise {
    pub seed: u64,
    pub exposure: f64,
    pub photon_scale: f64,
    pub sigma_g: f64,
    pub sigma_s: f64,
    pub sp_fraction: f64,
    pub impulse_sites: usize,
    pub order: ImpulseOrder,
    pub stages: Stages,
}

// Stream indices under the image seed.
const STREAM_SIGMA: u64 = 0;
const STREAM_QUANTUM: u64 = 1;
const STREAM_GRAY_POISSON: u64 = 2;
const STREAM_GAUSSIAN: u64 = 3;
const STREAM_SPECKLE: u64 = 4;
const STREAM_IMPULSE: u64 = 5;

fn stream(seed: u64, s: u64) -> Rng {
    seeded(derive_seed(seed, s))
}

/// One Poisson draw; a zero rate yields zero.
pub fn sample_poisson(rate: f64, rng: &mut Rng) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    Poisson::new(rate.min(MAX_RATE))
        .expect("positive finite rate")
        .sample(rng)
}

/// `I = 10^(-X / c)` for a gray-level image.
pub fn gray_to_intensity(x: &GrayImage, exposure: f64) -> Result<Vec<f64>> {
    x.expect_domain(Domain::Gray255)?;
    Ok(x.values().iter().map(|v| libm::pow(10.0, -v / exposure)).collect())
}

/// Quantum (photon-count) noise in the gray-level domain.
///
/// Counts of zero are floored at one before the logarithm, which caps the
/// output at `c * log10(rho)`; results are clamped to `[0, 255]`.
pub fn quantum_noise(x: &GrayImage, exposure: f64, photon_scale: f64, rng: &mut Rng) -> Result<GrayImage> {
    let intensity = gray_to_intensity(x, exposure)?;
    let values = intensity
        .iter()
        .map(|i| {
            let count = sample_poisson(photon_scale * i, rng).max(1.0);
            -exposure * libm::log10(count / photon_scale)
        })
        .collect();
    GrayImage::clamped(x.height(), x.width(), values, Domain::Gray255)
}

/// Poisson noise with rate equal to each gray level, clamped to `[0, 255]`.
pub fn gray_poisson(x: &GrayImage, rng: &mut Rng) -> Result<GrayImage> {
    x.expect_domain(Domain::Gray255)?;
    let values = x.values().iter().map(|&v| sample_poisson(v, rng)).collect();
    GrayImage::clamped(x.height(), x.width(), values, Domain::Gray255)
}

/// Adds `N(0, sigma^2)` to every value without clamping.
pub fn add_gaussian(values: &mut [f64], sigma: f64, rng: &mut Rng) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("finite non-negative sigma");
    values.iter_mut().for_each(|v| *v += normal.sample(rng));
}

/// Multiplies every value by `1 + N(0, sigma^2)` without clamping.
pub fn apply_speckle(values: &mut [f64], sigma: f64, rng: &mut Rng) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("finite non-negative sigma");
    values.iter_mut().for_each(|v| *v += *v * normal.sample(rng));
}

/// Additive white Gaussian noise on a unit-domain image, clamped to `[0, 1]`.
pub fn awgn(x: &GrayImage, sigma: f64, rng: &mut Rng) -> Result<GrayImage> {
    x.expect_domain(Domain::Unit)?;
    let mut values = x.values().to_vec();
    add_gaussian(&mut values, sigma, rng);
    GrayImage::clamped(x.height(), x.width(), values, Domain::Unit)
}

/// Multiplicative speckle on a unit-domain image, clamped to `[0, 1]`.
pub fn speckle(x: &GrayImage, sigma: f64, rng: &mut Rng) -> Result<GrayImage> {
    x.expect_domain(Domain::Unit)?;
    let mut values = x.values().to_vec();
    apply_speckle(&mut values, sigma, rng);
    GrayImage::clamped(x.height(), x.width(), values, Domain::Unit)
}

/// Number of sites salt-and-pepper touches: `round(fraction * n)`.
pub fn impulse_count(fraction: f64, n: usize) -> usize {
    (libm::round(fraction * n as f64) as usize).min(n)
}

/// Forces `round(fraction * N)` distinct, uniformly chosen pixels to the
/// extremes: the first `floor(n / 2)` sampled sites become 1.0 (salt), the
/// rest 0.0 (pepper).
pub fn salt_pepper(x: &GrayImage, fraction: f64, rng: &mut Rng) -> Result<GrayImage> {
    x.expect_domain(Domain::Unit)?;
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config("salt-and-pepper fraction must lie in [0, 1]".into()));
    }
    let n = impulse_count(fraction, x.len());
    let mut values = x.values().to_vec();
    let salt = n / 2;
    for (i, site) in index::sample(rng, values.len(), n).into_iter().enumerate() {
        values[site] = if i < salt { 1.0 } else { 0.0 };
    }
    GrayImage::new(x.height(), x.width(), values, Domain::Unit)
}

/// Runs the full pipeline on a gray-level image and returns the unit-domain
/// noisy image together with the parameters actually used.
pub fn synthesize_noise(x: &GrayImage, cfg: &NoiseConfig) -> Result<(GrayImage, AppliedNoise)> {
    cfg.validate()?;
    x.expect_domain(Domain::Gray255)?;
    let st = cfg.stages;
    let sigma_g = match cfg.sigma_g {
        SigmaG::Fixed(s) => s,
        SigmaG::Uniform { max } if max > 0.0 => stream(cfg.seed, STREAM_SIGMA).random_range(0.0..max),
        SigmaG::Uniform { .. } => 0.0,
    };

    let mut img = x.clone();
    if st.quantum {
        img = quantum_noise(
            &img,
            cfg.exposure,
            cfg.photon_scale,
            &mut stream(cfg.seed, STREAM_QUANTUM),
        )?;
    }
    if st.gray_poisson {
        img = gray_poisson(&img, &mut stream(cfg.seed, STREAM_GRAY_POISSON))?;
    }
    img = img.to_domain(Domain::Unit);
    if st.gaussian {
        img = awgn(&img, sigma_g, &mut stream(cfg.seed, STREAM_GAUSSIAN))?;
    }
    let run_speckle = |img: &GrayImage| speckle(img, cfg.sigma_s, &mut stream(cfg.seed, STREAM_SPECKLE));
    let run_impulse = |img: &GrayImage| salt_pepper(img, cfg.sp_fraction, &mut stream(cfg.seed, STREAM_IMPULSE));
    match cfg.order {
        ImpulseOrder::SpeckleFirst => {
            if st.speckle {
                img = run_speckle(&img)?;
            }
            if st.impulse {
                img = run_impulse(&img)?;
            }
        }
        ImpulseOrder::ImpulseFirst => {
            if st.impulse {
                img = run_impulse(&img)?;
            }
            if st.speckle {
                img = run_speckle(&img)?;
            }
        }
    }

    let applied = AppliedNoise {
        seed: cfg.seed,
        exposure: cfg.exposure,
        photon_scale: cfg.photon_scale,
        sigma_g: if st.gaussian { sigma_g } else { 0.0 },
        sigma_s: cfg.sigma_s,
        sp_fraction: cfg.sp_fraction,
        impulse_sites: if st.impulse {
            impulse_count(cfg.sp_fraction, x.len())
        } else {
            0
        },
        order: cfg.order,
        stages: st,
    };
    Ok((img, applied))
}
