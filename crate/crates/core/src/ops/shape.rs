//! Reshape and axis permutation.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::Op;
use crate::error::TensorError;
use crate::tensor::{numel, Tensor};

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Gathers `data` (of `shape`) into the layout of `shape` permuted by `perm`.
fn permute_data(data: &[f64], shape: &[usize], perm: &[usize]) -> Vec<f64> {
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let n = data.len();
    let mut out = Vec::with_capacity(n);
    let mut idx = vec![0usize; out_shape.len()];
    let mut offset = 0usize;
    for _ in 0..n {
        out.push(data[offset]);
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            offset += src_strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            offset -= src_strides[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    out
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

pub(crate) fn permute_backward(g: &[f64], in_shape: &[usize], perm: &[usize]) -> Vec<f64> {
    let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();
    permute_data(g, &out_shape, &inverse(perm))
}

impl Tensor {
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor, TensorError> {
        if numel(shape) != self.numel() {
            return Err(TensorError::mismatch("reshape", self.shape(), shape));
        }
        Tensor::from_op("reshape", self.to_vec(), shape.to_vec(), Op::Reshape(self.clone()))
    }

    /// Reorders axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor, TensorError> {
        let mut seen = vec![false; self.ndim()];
        if perm.len() != self.ndim()
            || perm
                .iter()
                .any(|&p| p >= seen.len() || core::mem::replace(&mut seen[p], true))
        {
            return Err(TensorError::invalid("permute", "not a permutation of the axes"));
        }
        let out_shape = perm.iter().map(|&p| self.shape()[p]).collect();
        let data = permute_data(self.data(), self.shape(), perm);
        Tensor::from_op(
            "permute",
            data,
            out_shape,
            Op::Permute {
                x: self.clone(),
                perm: perm.to_vec(),
            },
        )
    }

    /// Swaps the last two axes.
    pub fn transpose_last(&self) -> Result<Tensor, TensorError> {
        let n = self.ndim();
        if n < 2 {
            return Err(TensorError::invalid("transpose_last", "needs at least two axes"));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.swap(n - 2, n - 1);
        self.permute(&perm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_of_matrix() {
        let x = Tensor::new((1..=6).map(f64::from).collect(), &[2, 3]).unwrap();
        let t = x.transpose_last().unwrap();
        assert_eq!(t.shape(), &[3, 2]);
        assert_eq!(t.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn permute_three_axes() {
        let x = Tensor::new((0..24).map(f64::from).collect(), &[2, 3, 4]).unwrap();
        let p = x.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        // p[k, i, j] == x[i, j, k]
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    assert_eq!(p.data()[(k * 2 + i) * 3 + j], x.data()[(i * 3 + j) * 4 + k]);
                }
            }
        }
    }

    #[test]
    fn bad_permutation_is_rejected() {
        let x = Tensor::zeros(&[2, 3]);
        assert!(x.permute(&[0, 0]).is_err());
        assert!(x.permute(&[0]).is_err());
        assert!(x.reshape(&[4]).is_err());
    }
}
