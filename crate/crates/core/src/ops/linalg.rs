//! Batched matrix products and softmax.

use alloc::vec;
use alloc::vec::Vec;

use super::elementwise::split_axis;
use super::gemm;
use crate::autodiff::Op;
use crate::error::TensorError;
use crate::tensor::Tensor;

fn matmul_dims(a: &[usize], b: &[usize]) -> Option<(usize, usize, usize, usize)> {
    let (na, nb) = (a.len(), b.len());
    if na < 2 || na != nb || a[..na - 2] != b[..nb - 2] || a[na - 1] != b[nb - 2] {
        return None;
    }
    let batch = a[..na - 2].iter().product();
    Some((batch, a[na - 2], a[na - 1], b[nb - 1]))
}

impl Tensor {
    /// `[..., m, k] x [..., k, n] -> [..., m, n]` with identical leading axes.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (batch, m, k, n) = matmul_dims(self.shape(), other.shape())
            .ok_or_else(|| TensorError::mismatch("matmul", self.shape(), other.shape()))?;
        let mut out = vec![0.0; batch * m * n];
        let (a, b) = (self.data(), other.data());
        for i in 0..batch {
            gemm(
                m,
                k,
                n,
                &a[i * m * k..],
                false,
                &b[i * k * n..],
                false,
                0.0,
                &mut out[i * m * n..(i + 1) * m * n],
            );
        }
        let mut shape = self.shape().to_vec();
        *shape.last_mut().expect("rank >= 2") = n;
        Tensor::from_op("matmul", out, shape, Op::MatMul(self.clone(), other.clone()))
    }
}

pub(crate) fn matmul_backward(a: &Tensor, b: &Tensor, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (batch, m, k, n) = matmul_dims(a.shape(), b.shape()).expect("validated in forward");
    let mut ga = vec![0.0; a.numel()];
    let mut gb = vec![0.0; b.numel()];
    for i in 0..batch {
        let gi = &g[i * m * n..(i + 1) * m * n];
        // dA = dC * B^T, dB = A^T * dC
        gemm(
            m,
            n,
            k,
            gi,
            false,
            &b.data()[i * k * n..],
            true,
            0.0,
            &mut ga[i * m * k..(i + 1) * m * k],
        );
        gemm(
            k,
            m,
            n,
            &a.data()[i * m * k..],
            true,
            gi,
            false,
            0.0,
            &mut gb[i * k * n..(i + 1) * k * n],
        );
    }
    (ga, gb)
}

/// Softmax along `axis`, computed with max subtraction.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor, TensorError> {
    let (outer, dim, inner) = split_axis(x.shape(), axis, "softmax")?;
    let src = x.data();
    let mut out = vec![0.0; src.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |d: usize| (o * dim + d) * inner + i;
            let max = (0..dim).map(|d| src[at(d)]).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for d in 0..dim {
                let e = libm::exp(src[at(d)] - max);
                out[at(d)] = e;
                total += e;
            }
            for d in 0..dim {
                out[at(d)] /= total;
            }
        }
    }
    Tensor::from_op("softmax", out, x.shape().to_vec(), Op::Softmax { x: x.clone(), axis })
}

pub(crate) fn softmax_backward(y: &[f64], g: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
    let (outer, dim, inner) = split_axis(shape, axis, "softmax").expect("validated in forward");
    let mut gx = vec![0.0; y.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |d: usize| (o * dim + d) * inner + i;
            let dot: f64 = (0..dim).map(|d| y[at(d)] * g[at(d)]).sum();
            for d in 0..dim {
                gx[at(d)] = y[at(d)] * (g[at(d)] - dot);
            }
        }
    }
    gx
}
