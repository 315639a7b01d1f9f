//! Parameter containers for convolution and batch-norm layers.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result, TensorError};
use crate::ops::{self, BatchStats, ConvGeometry};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d,
    TransposedConv2d,
    BatchNorm2d,
    Conv1x1,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv2d => "conv2d",
            LayerKind::TransposedConv2d => "conv_transpose2d",
            LayerKind::BatchNorm2d => "batchnorm2d",
            LayerKind::Conv1x1 => "conv1x1",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hyper {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Hyper {
    pub fn geometry(&self) -> ConvGeometry {
        ConvGeometry::new(self.kernel, self.stride, self.padding)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Weights, bias and hyper-parameters of one layer.
///
/// For batch norm, `weight` and `bias` are the affine scale and shift and
/// `running` holds the inference statistics.
#[derive(Clone, Debug)]
pub struct LayerParams {
    pub kind: LayerKind,
    pub weight: Tensor,
    pub bias: Tensor,
    pub hyper: Hyper,
    pub running: Option<RunningStats>,
}

fn he_uniform(shape: &[usize], fan_in: f64, rng: &mut Rng) -> Tensor {
    let bound = libm::sqrt(6.0 / fan_in.max(1.0));
    let n = shape.iter().product();
    Tensor::parameter((0..n).map(|_| rng.random_range(-bound..bound)).collect(), shape)
        .expect("bounded samples are finite")
}

impl LayerParams {
    pub fn conv2d(in_channels: usize, out_channels: usize, geom: ConvGeometry, rng: &mut Rng) -> Self {
        let k = geom.kernel;
        LayerParams {
            kind: if k == 1 { LayerKind::Conv1x1 } else { LayerKind::Conv2d },
            weight: he_uniform(&[out_channels, in_channels, k, k], (in_channels * k * k) as f64, rng),
            bias: Tensor::parameter(vec![0.0; out_channels], &[out_channels]).expect("zeros"),
            hyper: Hyper {
                kernel: k,
                stride: geom.stride,
                padding: geom.padding,
                in_channels,
                out_channels,
            },
            running: None,
        }
    }

    pub fn conv1x1(in_channels: usize, out_channels: usize, rng: &mut Rng) -> Self {
        Self::conv2d(in_channels, out_channels, ConvGeometry::new(1, 1, 0), rng)
    }

    pub fn transposed_conv2d(in_channels: usize, out_channels: usize, geom: ConvGeometry, rng: &mut Rng) -> Self {
        let k = geom.kernel;
        // Each output sees about in * k² / stride² weights.
        let fan_in = (in_channels * k * k) as f64 / (geom.stride * geom.stride) as f64;
        LayerParams {
            kind: LayerKind::TransposedConv2d,
            weight: he_uniform(&[in_channels, out_channels, k, k], fan_in, rng),
            bias: Tensor::parameter(vec![0.0; out_channels], &[out_channels]).expect("zeros"),
            hyper: Hyper {
                kernel: k,
                stride: geom.stride,
                padding: geom.padding,
                in_channels,
                out_channels,
            },
            running: None,
        }
    }

    pub fn batchnorm2d(channels: usize) -> Self {
        LayerParams {
            kind: LayerKind::BatchNorm2d,
            weight: Tensor::parameter(vec![1.0; channels], &[channels]).expect("ones"),
            bias: Tensor::parameter(vec![0.0; channels], &[channels]).expect("zeros"),
            hyper: Hyper {
                kernel: 1,
                stride: 1,
                padding: 0,
                in_channels: channels,
                out_channels: channels,
            },
            running: Some(RunningStats {
                mean: vec![0.0; channels],
                var: vec![1.0; channels],
            }),
        }
    }

    /// Checks that tensor shapes agree with `hyper`.
    pub fn validate(&self) -> Result<()> {
        let h = &self.hyper;
        let (w_shape, b_len): (Vec<usize>, usize) = match self.kind {
            LayerKind::Conv2d | LayerKind::Conv1x1 => {
                (vec![h.out_channels, h.in_channels, h.kernel, h.kernel], h.out_channels)
            }
            LayerKind::TransposedConv2d => (vec![h.in_channels, h.out_channels, h.kernel, h.kernel], h.out_channels),
            LayerKind::BatchNorm2d => (vec![h.out_channels], h.out_channels),
        };
        if self.weight.shape() != w_shape.as_slice() || self.bias.shape() != [b_len] {
            return Err(TensorError::mismatch(self.kind.name(), self.weight.shape(), &w_shape).into());
        }
        match (&self.running, self.kind) {
            (Some(r), LayerKind::BatchNorm2d) if r.mean.len() == b_len && r.var.len() == b_len => Ok(()),
            (None, LayerKind::BatchNorm2d) | (Some(_), _) => Err(Error::Config(alloc::format!(
                "bad running statistics on a {} layer",
                self.kind.name()
            ))),
            (None, _) => Ok(()),
        }
    }

    /// Convolution or transposed convolution, depending on `kind`.
    pub fn conv(&self, x: &Tensor) -> Result<Tensor, TensorError> {
        let g = self.hyper.geometry();
        match self.kind {
            LayerKind::Conv2d | LayerKind::Conv1x1 => ops::conv2d(x, &self.weight, Some(&self.bias), g),
            LayerKind::TransposedConv2d => ops::conv_transpose2d(x, &self.weight, Some(&self.bias), g),
            LayerKind::BatchNorm2d => Err(TensorError::invalid("conv", "called on a batch-norm layer")),
        }
    }

    /// Batch normalization; training mode also returns the batch statistics.
    pub fn batch_norm(&self, x: &Tensor, training: bool) -> Result<(Tensor, Option<BatchStats>), TensorError> {
        let running = match (self.kind, &self.running) {
            (LayerKind::BatchNorm2d, Some(r)) => r,
            _ => return Err(TensorError::invalid("batch_norm", "not a batch-norm layer")),
        };
        if training {
            let (y, stats) = ops::batch_norm_train(x, &self.weight, &self.bias, BN_EPS)?;
            Ok((y, Some(stats)))
        } else {
            let y = ops::batch_norm_eval(x, &self.weight, &self.bias, &running.mean, &running.var, BN_EPS)?;
            Ok((y, None))
        }
    }

    /// Exponential moving update `r <- (1 - m) r + m batch`.
    pub fn update_running(&mut self, stats: &BatchStats, momentum: f64) {
        if let Some(r) = &mut self.running {
            for (r, b) in r.mean.iter_mut().zip(&stats.mean) {
                *r = (1.0 - momentum) * *r + momentum * b;
            }
            for (r, b) in r.var.iter_mut().zip(&stats.var_unbiased) {
                *r = (1.0 - momentum) * *r + momentum * b;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.numel()
    }
}
