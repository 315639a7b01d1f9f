//! Element-wise arithmetic, activations and reductions.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::Op;
use crate::error::TensorError;
use crate::tensor::Tensor;

impl Tensor {
    fn same_shape(&self, other: &Tensor, op: &'static str) -> Result<(), TensorError> {
        if self.shape() != other.shape() {
            return Err(TensorError::mismatch(op, self.shape(), other.shape()));
        }
        Ok(())
    }

    fn map(&self, name: &'static str, f: impl Fn(f64) -> f64, op: Op) -> Result<Tensor, TensorError> {
        let data = self.data().iter().map(|&v| f(v)).collect();
        Tensor::from_op(name, data, self.shape().to_vec(), op)
    }

    fn zip(
        &self,
        other: &Tensor,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Tensor, TensorError> {
        self.same_shape(other, name)?;
        let data = self.data().iter().zip(other.data()).map(|(&a, &b)| f(a, b)).collect();
        Tensor::from_op(name, data, self.shape().to_vec(), op)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.zip(other, "add", |a, b| a + b, Op::Add(self.clone(), other.clone()))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.zip(other, "sub", |a, b| a - b, Op::Sub(self.clone(), other.clone()))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.zip(other, "mul", |a, b| a * b, Op::Mul(self.clone(), other.clone()))
    }

    pub fn scale(&self, s: f64) -> Result<Tensor, TensorError> {
        self.map("scale", |v| v * s, Op::Scale(self.clone(), s))
    }

    pub fn square(&self) -> Result<Tensor, TensorError> {
        self.map("square", |v| v * v, Op::Square(self.clone()))
    }

    /// `sqrt(x + eps)`; `eps > 0` keeps the derivative finite at zero.
    pub fn sqrt_eps(&self, eps: f64) -> Result<Tensor, TensorError> {
        if self.data().iter().any(|&v| v + eps < 0.0) {
            return Err(TensorError::invalid("sqrt", "negative argument"));
        }
        self.map("sqrt", |v| libm::sqrt(v + eps), Op::Sqrt(self.clone()))
    }

    pub fn relu(&self) -> Result<Tensor, TensorError> {
        self.map("relu", |v| v.max(0.0), Op::Relu(self.clone()))
    }

    pub fn sigmoid(&self) -> Result<Tensor, TensorError> {
        self.map("sigmoid", sigmoid, Op::Sigmoid(self.clone()))
    }

    pub fn sum(&self) -> Result<Tensor, TensorError> {
        let s = self.data().iter().sum();
        Tensor::from_op("sum", vec![s], vec![1], Op::Sum(self.clone()))
    }

    pub fn mean(&self) -> Result<Tensor, TensorError> {
        if self.numel() == 0 {
            return Err(TensorError::invalid("mean", "empty tensor"));
        }
        let s: f64 = self.data().iter().sum();
        Tensor::from_op("mean", vec![s / self.numel() as f64], vec![1], Op::Mean(self.clone()))
    }

    /// Multiplies every slice along `axis` by the matching entry of `s`.
    ///
    /// `s` holds either one value (broadcast everywhere) or one value per
    /// index of `axis`.
    pub fn scale_along(&self, s: &Tensor, axis: usize) -> Result<Tensor, TensorError> {
        let (outer, dim, inner) = split_axis(self.shape(), axis, "scale_along")?;
        if s.numel() != 1 && s.numel() != dim {
            return Err(TensorError::mismatch("scale_along", self.shape(), s.shape()));
        }
        let sv = s.data();
        let mut data = self.to_vec();
        for o in 0..outer {
            for d in 0..dim {
                let f = if sv.len() == 1 { sv[0] } else { sv[d] };
                let base = (o * dim + d) * inner;
                data[base..base + inner].iter_mut().for_each(|v| *v *= f);
            }
        }
        Tensor::from_op(
            "scale_along",
            data,
            self.shape().to_vec(),
            Op::ScaleAlong {
                x: self.clone(),
                s: s.clone(),
                axis,
            },
        )
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + libm::exp(-v))
    } else {
        let e = libm::exp(v);
        e / (1.0 + e)
    }
}

/// `(outer, dim, inner)` extents around `axis` in row-major order.
pub(crate) fn split_axis(shape: &[usize], axis: usize, op: &'static str) -> Result<(usize, usize, usize), TensorError> {
    if axis >= shape.len() {
        return Err(TensorError::invalid(op, "axis out of range"));
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

pub(crate) fn scale_along_backward(x: &Tensor, s: &Tensor, axis: usize, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (outer, dim, inner) = split_axis(x.shape(), axis, "scale_along").expect("validated in forward");
    let sv = s.data();
    let xv = x.data();
    let mut gx = vec![0.0; x.numel()];
    let mut gs = vec![0.0; sv.len()];
    for o in 0..outer {
        for d in 0..dim {
            let si = if sv.len() == 1 { 0 } else { d };
            let base = (o * dim + d) * inner;
            for i in base..base + inner {
                gx[i] = g[i] * sv[si];
                gs[si] += g[i] * xv[i];
            }
        }
    }
    (gx, gs)
}
