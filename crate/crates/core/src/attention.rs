//! Multi-head self-attention over bottleneck feature maps, with an optional
//! noise-aware term.
//!
//! Tokens are the `H * W` spatial positions; each of the `h` heads sees
//! `M' = M / h` channels. Standard scores are `Q(z)ᵀ K(z) / sqrt(M')`. The
//! noise-aware variant adds `γ' Q(ψ)ᵀ K(z) / sqrt(M')`, where `ψ` is the
//! local-RMS noise map of `z` and `Q(ψ)` its own 1x1 projection, before a
//! single softmax over keys. Heads are concatenated, mixed by a 1x1
//! projection and added back onto `z`.

use alloc::vec;

use crate::error::{Error, Result, TensorError};
use crate::layers::LayerParams;
use crate::noise_map::{noise_map, NoiseMap, DEFAULT_WINDOW};
use crate::ops::softmax;
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttentionMode {
    /// Plain scaled dot-product attention (the ADA baseline).
    Standard,
    /// Scores augmented with the γ'-weighted noise-query term.
    NoiseAware,
}

impl AttentionMode {
    pub fn name(self) -> &'static str {
        match self {
            AttentionMode::Standard => "ada",
            AttentionMode::NoiseAware => "naada",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionConfig {
    pub channels: usize,
    pub heads: usize,
    pub mode: AttentionMode,
    pub gamma_init: f64,
    /// One γ' per head instead of a single shared scalar.
    pub per_head_gamma: bool,
    /// Window of the noise-map estimator.
    pub noise_window: usize,
}

impl AttentionConfig {
    pub fn new(channels: usize, heads: usize, mode: AttentionMode) -> Self {
        AttentionConfig {
            channels,
            heads,
            mode,
            gamma_init: 0.0,
            per_head_gamma: false,
            noise_window: DEFAULT_WINDOW,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.channels / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.channels == 0 || !self.channels.is_multiple_of(self.heads) {
            return Err(Error::Config(alloc::format!(
                "{} channels cannot be split into {} heads",
                self.channels,
                self.heads
            )));
        }
        if self.noise_window.is_multiple_of(2) {
            return Err(Error::Config("noise window must be odd".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AttentionParams {
    pub q_proj: LayerParams,
    pub k_proj: LayerParams,
    pub v_proj: LayerParams,
    pub noise_q_proj: LayerParams,
    pub out_proj: LayerParams,
    /// Shape `[1]`, or `[heads]` with per-head γ'.
    pub gamma: Tensor,
}

impl AttentionParams {
    /// All projections are drawn regardless of mode so both modes start from
    /// identical weights under the same seed.
    pub fn new(cfg: &AttentionConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.channels;
        let gamma_len = if cfg.per_head_gamma { cfg.heads } else { 1 };
        Ok(AttentionParams {
            q_proj: LayerParams::conv1x1(m, m, rng),
            k_proj: LayerParams::conv1x1(m, m, rng),
            v_proj: LayerParams::conv1x1(m, m, rng),
            noise_q_proj: LayerParams::conv1x1(m, m, rng),
            out_proj: LayerParams::conv1x1(m, m, rng),
            gamma: Tensor::parameter(vec![cfg.gamma_init; gamma_len], &[gamma_len])?,
        })
    }
}

/// Pre-softmax score matrices, each `[B, h, N, N]` and already divided by
/// `sqrt(M')`.
#[derive(Clone, Debug)]
pub struct Scores {
    pub standard: Tensor,
    /// `Q(ψ)ᵀ K(z) / sqrt(M')`, before weighting by γ'.
    pub noise: Option<Tensor>,
}

/// Attention result plus the row-stochastic weights `[B, h, N, N]`.
#[derive(Clone, Debug)]
pub struct AttentionOutput {
    pub output: Tensor,
    pub weights: Tensor,
}

fn dims(z: &Tensor) -> Result<[usize; 4]> {
    <[usize; 4]>::try_from(z.shape()).map_err(|_| TensorError::invalid("attention", "expected [B, M, H, W]").into())
}

/// `[B, M, H, W] -> [B, h, M', N]`.
fn split_heads(t: &Tensor, heads: usize) -> Result<Tensor, TensorError> {
    let [b, m, h, w] = <[usize; 4]>::try_from(t.shape()).expect("4-D");
    t.reshape(&[b, heads, m / heads, h * w])
}

fn check_input(z: &Tensor, cfg: &AttentionConfig) -> Result<[usize; 4]> {
    cfg.validate()?;
    let d = dims(z)?;
    if d[1] != cfg.channels {
        return Err(TensorError::mismatch("attention", z.shape(), &[cfg.channels]).into());
    }
    Ok(d)
}

/// Score matrices for `z` and, when given, its noise map.
pub fn scores(z: &Tensor, psi: Option<&NoiseMap>, p: &AttentionParams, cfg: &AttentionConfig) -> Result<Scores> {
    check_input(z, cfg)?;
    let scale = 1.0 / libm::sqrt(cfg.head_dim() as f64);
    let q = split_heads(&p.q_proj.conv(z)?, cfg.heads)?.transpose_last()?;
    let k = split_heads(&p.k_proj.conv(z)?, cfg.heads)?;
    let standard = q.matmul(&k)?.scale(scale)?;
    let noise = match psi {
        Some(psi) => {
            if psi.shape() != z.shape() {
                return Err(TensorError::mismatch("nasa_attention", psi.shape(), z.shape()).into());
            }
            let qn = split_heads(&p.noise_q_proj.conv(psi.tensor())?, cfg.heads)?.transpose_last()?;
            Some(qn.matmul(&k)?.scale(scale)?)
        }
        None => None,
    };
    Ok(Scores { standard, noise })
}

fn attend(z: &Tensor, psi: Option<&NoiseMap>, p: &AttentionParams, cfg: &AttentionConfig) -> Result<AttentionOutput> {
    let [b, m, h, w] = check_input(z, cfg)?;
    let s = scores(z, psi, p, cfg)?;
    let logits = match &s.noise {
        Some(noise) => s.standard.add(&noise.scale_along(&p.gamma, 1)?)?,
        None => s.standard,
    };
    let weights = softmax(&logits, 3)?;
    let v = split_heads(&p.v_proj.conv(z)?, cfg.heads)?;
    // out[:, :, c, i] = sum_j A[i, j] v[c, j]
    let heads = v.matmul(&weights.transpose_last()?)?;
    let merged = heads.reshape(&[b, m, h, w])?;
    let output = z.add(&p.out_proj.conv(&merged)?)?;
    Ok(AttentionOutput { output, weights })
}

/// Scaled dot-product self-attention with residual connection.
pub fn standard_attention(z: &Tensor, p: &AttentionParams, cfg: &AttentionConfig) -> Result<Tensor> {
    if cfg.mode != AttentionMode::Standard {
        return Err(Error::Config("standard_attention needs the standard mode".into()));
    }
    Ok(attend(z, None, p, cfg)?.output)
}

/// Noise-aware self-attention given a precomputed noise map of `z`.
pub fn nasa_attention(z: &Tensor, psi: &NoiseMap, p: &AttentionParams, cfg: &AttentionConfig) -> Result<Tensor> {
    if cfg.mode != AttentionMode::NoiseAware {
        return Err(Error::Config("nasa_attention needs the noise-aware mode".into()));
    }
    Ok(attend(z, Some(psi), p, cfg)?.output)
}

/// Runs the block in `cfg.mode`, computing the noise map from `z` when
/// needed, and returns the attention weights as well.
pub fn forward(z: &Tensor, p: &AttentionParams, cfg: &AttentionConfig) -> Result<AttentionOutput> {
    match cfg.mode {
        AttentionMode::Standard => attend(z, None, p, cfg),
        AttentionMode::NoiseAware => {
            let psi = noise_map(z, cfg.noise_window)?;
            attend(z, Some(&psi), p, cfg)
        }
    }
}
