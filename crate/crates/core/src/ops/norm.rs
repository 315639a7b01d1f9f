//! Per-channel batch normalization over `[B, C, H, W]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::Op;
use crate::error::TensorError;
use crate::tensor::Tensor;

/// Per-channel statistics of the batch a training-mode call normalized with.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased (n - 1) variance, the value folded into running statistics.
    pub var_unbiased: Vec<f64>,
}

fn layout(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<(usize, usize, usize), TensorError> {
    const OP: &str = "batchnorm2d";
    let [b, c, h, w] =
        <[usize; 4]>::try_from(x.shape()).map_err(|_| TensorError::invalid(OP, "expected a 4-D tensor"))?;
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(TensorError::mismatch(OP, x.shape(), gamma.shape()));
    }
    Ok((b, c, h * w))
}

fn normalize(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mean: &[f64],
    inv_std: Vec<f64>,
    batch_stats: bool,
) -> Result<Tensor, TensorError> {
    let (b, c, plane) = layout(x, gamma, beta)?;
    let (g, bt, src) = (gamma.data(), beta.data(), x.data());
    let mut xhat = vec![0.0; src.len()];
    let mut out = vec![0.0; src.len()];
    for bi in 0..b {
        for ci in 0..c {
            let base = (bi * c + ci) * plane;
            for i in base..base + plane {
                xhat[i] = (src[i] - mean[ci]) * inv_std[ci];
                out[i] = g[ci] * xhat[i] + bt[ci];
            }
        }
    }
    Tensor::from_op(
        "batchnorm2d",
        out,
        x.shape().to_vec(),
        Op::BatchNorm {
            x: x.clone(),
            gamma: gamma.clone(),
            beta: beta.clone(),
            xhat,
            inv_std,
            batch_stats,
        },
    )
}

/// Normalizes with the batch's own per-channel mean and biased variance.
///
/// A zero-variance channel maps to `beta` (`eps` keeps the scale finite).
pub fn batch_norm_train(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> Result<(Tensor, BatchStats), TensorError> {
    let (b, c, plane) = layout(x, gamma, beta)?;
    let n = b * plane;
    if n == 0 {
        return Err(TensorError::invalid("batchnorm2d", "empty batch"));
    }
    let src = x.data();
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ci in 0..c {
        let values = || (0..b).flat_map(move |bi| src[(bi * c + ci) * plane..(bi * c + ci + 1) * plane].iter());
        let m = values().sum::<f64>() / n as f64;
        mean[ci] = m;
        var[ci] = values().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    }
    let inv_std = var.iter().map(|v| 1.0 / libm::sqrt(v + eps)).collect();
    let out = normalize(x, gamma, beta, &mean, inv_std, true)?;
    let correction = if n > 1 { n as f64 / (n - 1) as f64 } else { 1.0 };
    let var_unbiased = var.iter().map(|v| v * correction).collect();
    Ok((out, BatchStats { mean, var_unbiased }))
}

/// Normalizes with fixed (running) statistics.
pub fn batch_norm_eval(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &[f64],
    running_var: &[f64],
    eps: f64,
) -> Result<Tensor, TensorError> {
    let (_, c, _) = layout(x, gamma, beta)?;
    if running_mean.len() != c || running_var.len() != c {
        return Err(TensorError::mismatch("batchnorm2d", &[c], &[running_mean.len()]));
    }
    let inv_std = running_var.iter().map(|v| 1.0 / libm::sqrt(v + eps)).collect();
    normalize(x, gamma, beta, running_mean, inv_std, false)
}

pub(crate) fn batchnorm_backward(
    shape: &[usize],
    gamma: &[f64],
    xhat: &[f64],
    inv_std: &[f64],
    batch_stats: bool,
    g: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (b, c, plane) = (shape[0], shape[1], shape[2] * shape[3]);
    let n = (b * plane) as f64;
    let mut ggamma = vec![0.0; c];
    let mut gbeta = vec![0.0; c];
    for bi in 0..b {
        for ci in 0..c {
            let base = (bi * c + ci) * plane;
            for i in base..base + plane {
                ggamma[ci] += g[i] * xhat[i];
                gbeta[ci] += g[i];
            }
        }
    }
    let mut gx = vec![0.0; g.len()];
    for bi in 0..b {
        for ci in 0..c {
            let base = (bi * c + ci) * plane;
            let scale = gamma[ci] * inv_std[ci];
            for i in base..base + plane {
                gx[i] = if batch_stats {
                    scale * (g[i] - gbeta[ci] / n - xhat[i] * ggamma[ci] / n)
                } else {
                    scale * g[i]
                };
            }
        }
    }
    (gx, ggamma, gbeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn affine_identity(c: usize) -> (Tensor, Tensor) {
        (Tensor::full(&[c], 1.0), Tensor::zeros(&[c]))
    }

    #[test]
    fn constant_channel_normalizes_to_zero() {
        let x = Tensor::full(&[1, 1, 4, 4], 3.7);
        let (g, b) = affine_identity(1);
        let (y, stats) = batch_norm_train(&x, &g, &b, 1e-5).unwrap();
        assert!(y.data().iter().all(|v| v.abs() < 1e-9));
        assert!((stats.mean[0] - 3.7).abs() < 1e-12);
    }

    #[test]
    fn random_channel_is_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..2 * 100 * 100)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0 + 1.5)
            .collect();
        let x = Tensor::new(data, &[2, 1, 100, 100]).unwrap();
        let (g, b) = affine_identity(1);
        let (y, _) = batch_norm_train(&x, &g, &b, 1e-5).unwrap();
        let n = y.numel() as f64;
        let mean = y.data().iter().sum::<f64>() / n;
        let var = y.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-3);
        assert!((var - 1.0).abs() < 1e-3);
    }

    #[test]
    fn eval_with_identity_statistics_is_identity() {
        let x = Tensor::new((0..18).map(|i| i as f64 * 0.3 - 2.0).collect(), &[1, 2, 3, 3]).unwrap();
        let (g, b) = affine_identity(2);
        let y = batch_norm_eval(&x, &g, &b, &[0.0, 0.0], &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn gamma_length_is_checked() {
        let x = Tensor::zeros(&[1, 2, 3, 3]);
        let (g, b) = affine_identity(3);
        assert!(batch_norm_train(&x, &g, &b, 1e-5).is_err());
    }
}
