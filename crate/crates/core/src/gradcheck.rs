//! Central finite-difference check of reverse-mode gradients.
//!
//! The function under test is reduced to a scalar by a fixed random
//! projection `sum(f(x) * r)`, so gradients through normalizing ops such as
//! softmax stay informative. Numeric derivatives only ever call the forward
//! pass.

use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::TensorError;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub step: f64,
    /// Largest accepted relative error.
    pub tolerance: f64,
    /// Lower bound of the relative-error denominator, so entries that are
    /// zero up to rounding do not divide by zero.
    pub floor: f64,
    /// Probe at most this many entries per input (all when `None`).
    pub max_probes: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-5,
            max_probes: None,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub probes: usize,
    pub worst: Option<Probe>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.worst.map_or(0.0, |p| p.rel_error)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }
}

fn projected(out: &Tensor, r: &[f64]) -> f64 {
    out.data().iter().zip(r).map(|(a, b)| a * b).sum()
}

/// Compares `backward` against central differences for every input of `f`.
pub fn check<F>(inputs: &[Tensor], f: F, cfg: &GradCheckConfig) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&[Tensor]) -> Result<Tensor, TensorError>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params: Vec<Tensor> = inputs.iter().map(Tensor::to_parameter).collect();
    let out = f(&params)?;
    let r: Vec<f64> = (0..out.numel()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let weights = Tensor::new(r.clone(), out.shape())?;
    let grads = out.mul(&weights)?.sum()?.backward()?;

    let mut report = GradCheckReport {
        probes: 0,
        worst: None,
        tolerance: cfg.tolerance,
    };
    for (i, p) in params.iter().enumerate() {
        let zeros;
        let analytic = match grads.get(p) {
            Some(g) => g,
            None => {
                zeros = alloc::vec![0.0; p.numel()];
                &zeros
            }
        };
        let indices: Vec<usize> = match cfg.max_probes {
            Some(k) if k < p.numel() => sample(&mut rng, p.numel(), k).into_vec(),
            _ => (0..p.numel()).collect(),
        };
        for j in indices {
            let eval = |delta: f64| -> Result<f64, TensorError> {
                let mut data = inputs[i].to_vec();
                data[j] += delta;
                let mut xs: Vec<Tensor> = inputs.to_vec();
                xs[i] = Tensor::new(data, inputs[i].shape())?;
                Ok(projected(&f(&xs)?, &r))
            };
            let numeric = (eval(cfg.step)? - eval(-cfg.step)?) / (2.0 * cfg.step);
            let a = analytic[j];
            let rel_error = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            report.probes += 1;
            if report.worst.is_none_or(|w| rel_error > w.rel_error) {
                report.worst = Some(Probe {
                    input: i,
                    index: j,
                    analytic: a,
                    numeric,
                    rel_error,
                });
            }
        }
    }
    Ok(report)
}
