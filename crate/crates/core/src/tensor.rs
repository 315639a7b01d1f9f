//! Dense `f64` tensors with an optional recorded op graph.
//!
//! A [`Tensor`] is an immutable, reference-counted value. Operations that
//! touch at least one tensor with `requires_grad` record their inputs so
//! [`Tensor::backward`] can walk the graph in reverse. Tensors built from
//! plain data carry no graph and cost nothing beyond their buffer.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::autodiff::{Gradients, Op};
use crate::error::TensorError;

static NEXT_ID: AtomicUsize = AtomicUsize::new(1);

/// Identity of a tensor node; fresh for every constructed tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TensorId(usize);

impl TensorId {
    fn fresh() -> Self {
        TensorId(NEXT_ID.fetch_add(1, Ordering::Relaxed))
    }
}

pub(crate) struct Node {
    pub(crate) id: TensorId,
    pub(crate) shape: Vec<usize>,
    pub(crate) data: Vec<f64>,
    pub(crate) requires_grad: bool,
    pub(crate) op: Option<Op>,
}

#[derive(Clone)]
pub struct Tensor(pub(crate) Arc<Node>);

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    fn leaf(data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Result<Self, TensorError> {
        if numel(&shape) != data.len() {
            return Err(TensorError::DataLength { shape, len: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: "leaf" });
        }
        Ok(Tensor(Arc::new(Node {
            id: TensorId::fresh(),
            shape,
            data,
            requires_grad,
            op: None,
        })))
    }

    /// Constant tensor (no gradient tracking).
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Self, TensorError> {
        Self::leaf(data, shape.to_vec(), false)
    }

    /// Trainable leaf whose gradient is reported by [`Tensor::backward`].
    pub fn parameter(data: Vec<f64>, shape: &[usize]) -> Result<Self, TensorError> {
        Self::leaf(data, shape.to_vec(), true)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self::new(vec![value; numel(shape)], shape).expect("full with a finite value")
    }

    pub fn scalar(value: f64) -> Result<Self, TensorError> {
        Self::new(vec![value], &[1])
    }

    /// Output of a recorded op. Checks finiteness and drops the op when no
    /// input needs a gradient.
    pub(crate) fn from_op(name: &'static str, data: Vec<f64>, shape: Vec<usize>, op: Op) -> Result<Self, TensorError> {
        debug_assert_eq!(numel(&shape), data.len());
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: name });
        }
        let requires_grad = op.inputs().iter().any(|t| t.requires_grad());
        Ok(Tensor(Arc::new(Node {
            id: TensorId::fresh(),
            shape,
            data,
            requires_grad,
            op: requires_grad.then_some(op),
        })))
    }

    pub fn id(&self) -> TensorId {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.clone()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn ndim(&self) -> usize {
        self.0.shape.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// True for tensors created directly rather than by an op.
    pub fn is_leaf(&self) -> bool {
        self.0.op.is_none()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64, TensorError> {
        match self.0.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(TensorError::NonScalarLoss(self.0.shape.clone())),
        }
    }

    /// Copy of this tensor cut out of the graph.
    pub fn detach(&self) -> Tensor {
        Tensor::new(self.0.data.clone(), &self.0.shape).expect("finite data stays finite")
    }

    /// Same data as a fresh trainable leaf.
    pub fn to_parameter(&self) -> Tensor {
        Tensor::parameter(self.0.data.clone(), &self.0.shape).expect("finite data stays finite")
    }

    /// Reverse-mode pass from a one-element loss.
    ///
    /// Returns gradients for every leaf with `requires_grad` reachable from
    /// `self`. Each call starts from zero, so calling it twice on the same
    /// graph yields the same gradients rather than accumulating them.
    pub fn backward(&self) -> Result<Gradients, TensorError> {
        crate::autodiff::backward(self)
    }

    pub(crate) fn node(&self) -> &Node {
        &self.0
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.0.id)
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_must_match_shape() {
        assert!(matches!(
            Tensor::new(vec![1.0; 5], &[2, 3]),
            Err(TensorError::DataLength { .. })
        ));
    }

    #[test]
    fn non_finite_leaf_is_rejected() {
        assert!(matches!(
            Tensor::new(vec![1.0, f64::NAN], &[2]),
            Err(TensorError::NonFinite { .. })
        ));
    }

    #[test]
    fn ids_are_unique() {
        let a = Tensor::zeros(&[2]);
        let b = Tensor::zeros(&[2]);
        assert_ne!(a.id(), b.id());
        assert_eq!(a.clone().id(), a.id());
    }
}
