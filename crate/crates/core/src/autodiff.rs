// Reverse-mode differentiation over the graph recorded by `Tensor::from_op`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::TensorError;
use crate::ops::conv::{self, ConvGeometry};
use crate::ops::{linalg, norm, pool, shape};
use crate::tensor::{Node, Tensor, TensorId};

pub(crate) enum Op {
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Scale(Tensor, f64),
    Square(Tensor),
    /// `sqrt(x + eps)`; the derivative only needs the output.
    Sqrt(Tensor),
    Relu(Tensor),
    Sigmoid(Tensor),
    Softmax {
        x: Tensor,
        axis: usize,
    },
    Sum(Tensor),
    Mean(Tensor),
    Reshape(Tensor),
    Permute {
        x: Tensor,
        perm: Vec<usize>,
    },
    MatMul(Tensor, Tensor),
    ScaleAlong {
        x: Tensor,
        s: Tensor,
        axis: usize,
    },
    Conv2d {
        x: Tensor,
        w: Tensor,
        b: Option<Tensor>,
        geom: ConvGeometry,
    },
    ConvTranspose2d {
        x: Tensor,
        w: Tensor,
        b: Option<Tensor>,
        geom: ConvGeometry,
    },
    BatchNorm {
        x: Tensor,
        gamma: Tensor,
        beta: Tensor,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    AvgPool2d {
        x: Tensor,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
}

impl Op {
    pub(crate) fn inputs(&self) -> Vec<&Tensor> {
        match self {
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) => vec![a, b],
            Op::Scale(x, _)
            | Op::Square(x)
            | Op::Sqrt(x)
            | Op::Relu(x)
            | Op::Sigmoid(x)
            | Op::Sum(x)
            | Op::Mean(x)
            | Op::Reshape(x)
            | Op::Softmax { x, .. }
            | Op::Permute { x, .. }
            | Op::AvgPool2d { x, .. } => vec![x],
            Op::ScaleAlong { x, s, .. } => vec![x, s],
            Op::Conv2d { x, w, b, .. } | Op::ConvTranspose2d { x, w, b, .. } => {
                let mut v = vec![x, w];
                v.extend(b.iter());
                v
            }
            Op::BatchNorm { x, gamma, beta, .. } => vec![x, gamma, beta],
        }
    }

    /// Gradients for each entry of `inputs()`, in order.
    fn backward(&self, out: &Node, g: &[f64]) -> Vec<Vec<f64>> {
        match self {
            Op::Add(_, _) => vec![g.to_vec(), g.to_vec()],
            Op::Sub(_, _) => vec![g.to_vec(), g.iter().map(|v| -v).collect()],
            Op::Mul(a, b) => vec![zip_map(g, b.data(), |g, b| g * b), zip_map(g, a.data(), |g, a| g * a)],
            Op::Scale(_, s) => vec![g.iter().map(|v| v * s).collect()],
            Op::Square(x) => vec![zip_map(g, x.data(), |g, x| 2.0 * g * x)],
            Op::Sqrt(_) => vec![zip_map(g, &out.data, |g, y| 0.5 * g / y)],
            Op::Relu(x) => vec![zip_map(g, x.data(), |g, x| if x > 0.0 { g } else { 0.0 })],
            Op::Sigmoid(_) => vec![zip_map(g, &out.data, |g, y| g * y * (1.0 - y))],
            Op::Softmax { axis, .. } => vec![linalg::softmax_backward(&out.data, g, &out.shape, *axis)],
            Op::Sum(x) => vec![vec![g[0]; x.numel()]],
            Op::Mean(x) => vec![vec![g[0] / x.numel() as f64; x.numel()]],
            Op::Reshape(_) => vec![g.to_vec()],
            Op::Permute { x, perm } => vec![shape::permute_backward(g, x.shape(), perm)],
            Op::MatMul(a, b) => {
                let (ga, gb) = linalg::matmul_backward(a, b, g);
                vec![ga, gb]
            }
            Op::ScaleAlong { x, s, axis } => {
                let (gx, gs) = crate::ops::elementwise::scale_along_backward(x, s, *axis, g);
                vec![gx, gs]
            }
            Op::Conv2d { x, w, b, geom } => {
                let (gx, gw, gb) = conv::conv2d_backward(x, w, *geom, &out.shape, g);
                let mut v = vec![gx, gw];
                if b.is_some() {
                    v.push(gb);
                }
                v
            }
            Op::ConvTranspose2d { x, w, b, geom } => {
                let (gx, gw, gb) = conv::conv_transpose2d_backward(x, w, *geom, &out.shape, g);
                let mut v = vec![gx, gw];
                if b.is_some() {
                    v.push(gb);
                }
                v
            }
            Op::BatchNorm {
                gamma,
                xhat,
                inv_std,
                batch_stats,
                ..
            } => {
                let (gx, gg, gb) = norm::batchnorm_backward(&out.shape, gamma.data(), xhat, inv_std, *batch_stats, g);
                vec![gx, gg, gb]
            }
            Op::AvgPool2d {
                x,
                kernel,
                stride,
                padding,
            } => vec![pool::avg_pool2d_backward(
                x.shape(),
                &out.shape,
                *kernel,
                *stride,
                *padding,
                g,
            )],
        }
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&a, &b)| f(a, b)).collect()
}

/// Gradients of a scalar loss with respect to trainable leaves.
#[derive(Debug, Default, Clone)]
pub struct Gradients {
    map: BTreeMap<TensorId, Vec<f64>>,
}

impl Gradients {
    /// Gradient of `t`, or `None` when `t` does not influence the loss.
    pub fn get(&self, t: &Tensor) -> Option<&[f64]> {
        self.map.get(&t.id()).map(Vec::as_slice)
    }

    pub fn get_by_id(&self, id: TensorId) -> Option<&[f64]> {
        self.map.get(&id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Post-order over every node that requires a gradient.
fn topo_order(root: &Tensor) -> Vec<Tensor> {
    let mut order = Vec::new();
    let mut visited = BTreeSet::new();
    // (node, children pushed?)
    let mut stack = vec![(root.clone(), false)];
    while let Some((t, expanded)) = stack.pop() {
        if expanded {
            order.push(t);
            continue;
        }
        if !visited.insert(t.id()) {
            continue;
        }
        stack.push((t.clone(), true));
        if let Some(op) = &t.node().op {
            for input in op.inputs() {
                if input.requires_grad() && !visited.contains(&input.id()) {
                    stack.push((input.clone(), false));
                }
            }
        }
    }
    order
}

pub(crate) fn backward(loss: &Tensor) -> Result<Gradients, TensorError> {
    if loss.numel() != 1 {
        return Err(TensorError::NonScalarLoss(loss.shape().to_vec()));
    }
    let mut out = Gradients::default();
    if !loss.requires_grad() {
        return Ok(out);
    }
    let order = topo_order(loss);
    let mut pending: BTreeMap<TensorId, Vec<f64>> = BTreeMap::new();
    pending.insert(loss.id(), vec![1.0]);

    for t in order.iter().rev() {
        let Some(g) = pending.remove(&t.id()) else {
            continue;
        };
        let node = t.node();
        let Some(op) = &node.op else {
            out.map.insert(t.id(), g);
            continue;
        };
        let inputs = op.inputs();
        let grads = op.backward(node, &g);
        debug_assert_eq!(inputs.len(), grads.len());
        for (input, grad) in inputs.into_iter().zip(grads) {
            if !input.requires_grad() {
                continue;
            }
            match pending.get_mut(&input.id()) {
                Some(acc) => acc.iter_mut().zip(&grad).for_each(|(a, g)| *a += g),
                None => {
                    pending.insert(input.id(), grad);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gives_ones() {
        let x = Tensor::parameter(vec![0.3, -1.0, 2.0, 5.0, 0.0, 1.0], &[2, 3]).unwrap();
        let g = x.sum().unwrap().backward().unwrap();
        assert_eq!(g.get(&x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn square_sum_is_twice_x() {
        let x = Tensor::parameter(vec![1.0, 2.0], &[2]).unwrap();
        let g = x.square().unwrap().sum().unwrap().backward().unwrap();
        assert_eq!(g.get(&x).unwrap(), &[2.0, 4.0]);
    }

    #[test]
    fn shared_input_accumulates() {
        // loss = sum(x * x + x) -> 2x + 1
        let x = Tensor::parameter(vec![1.0, -3.0], &[2]).unwrap();
        let y = x.mul(&x).unwrap().add(&x).unwrap();
        let g = y.sum().unwrap().backward().unwrap();
        assert_eq!(g.get(&x).unwrap(), &[3.0, -5.0]);
    }

    #[test]
    fn repeated_backward_does_not_accumulate() {
        let x = Tensor::parameter(vec![1.0, 2.0], &[2]).unwrap();
        let loss = x.square().unwrap().sum().unwrap();
        let g1 = loss.backward().unwrap();
        let g2 = loss.backward().unwrap();
        assert_eq!(g1.get(&x), g2.get(&x));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let x = Tensor::parameter(vec![1.0, 2.0], &[2]).unwrap();
        assert!(matches!(x.backward(), Err(TensorError::NonScalarLoss(_))));
    }

    #[test]
    fn constants_get_no_gradient() {
        let x = Tensor::parameter(vec![1.0, 2.0], &[2]).unwrap();
        let c = Tensor::new(vec![3.0, 4.0], &[2]).unwrap();
        let g = x.mul(&c).unwrap().sum().unwrap().backward().unwrap();
        assert_eq!(g.get(&x).unwrap(), &[3.0, 4.0]);
        assert!(g.get(&c).is_none());
        assert_eq!(g.len(), 1);
    }
}
