//! Local-RMS noise map of a feature tensor.
//!
//! Two stacked average pools: the first estimates the local mean `z~`, the
//! second averages the squared deviation `(z - z~)²` over the same window.
//! Both pools zero-pad and divide by the full `k²`.

use crate::error::TensorError;
use crate::ops::avg_pool2d;
use crate::tensor::Tensor;

/// Added under the square root so the map is differentiable where the
/// deviation vanishes.
pub const RMS_EPS: f64 = 1e-12;

pub const DEFAULT_WINDOW: usize = 3;

/// Per-location RMS deviation from the local mean; same shape as its source.
#[derive(Clone, Debug)]
pub struct NoiseMap(Tensor);

impl NoiseMap {
    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn shape(&self) -> &[usize] {
        self.0.shape()
    }
}

fn check_window(k: usize) -> Result<(), TensorError> {
    if k.is_multiple_of(2) {
        return Err(TensorError::invalid("noise_map", "window size must be odd"));
    }
    Ok(())
}

/// Shape-preserving `k x k` mean (stride 1, padding `(k - 1) / 2`).
pub fn local_mean(z: &Tensor, k: usize) -> Result<Tensor, TensorError> {
    check_window(k)?;
    avg_pool2d(z, k, 1, (k - 1) / 2)
}

/// `sqrt(mean_k((z - mean_k(z))²) + eps)` over a `[B, M, H, W]` tensor.
pub fn noise_map(z: &Tensor, k: usize) -> Result<NoiseMap, TensorError> {
    if z.ndim() != 4 {
        return Err(TensorError::invalid("noise_map", "expected a 4-D tensor"));
    }
    let deviation = z.sub(&local_mean(z, k)?)?;
    let rms = local_mean(&deviation.square()?, k)?.sqrt_eps(RMS_EPS)?;
    Ok(NoiseMap(rms))
}
