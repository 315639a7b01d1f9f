//! The encoder / attention bottleneck / decoder denoiser.
//!
//! Encoder stages are conv -> batch norm -> ReLU with kernels and strides
//! `3/1, 4/2, 4/2, 4/2, 3/1`; paddings `1, 3, 4, 3, 1` take a 224 patch
//! through 224, 114, 60, 32, 32. The decoder mirrors this with transposed
//! convolutions, adds the same-shaped encoder activation to each stage's
//! input, and ends in a sigmoid instead of batch norm.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::attention::{self, AttentionConfig, AttentionMode, AttentionOutput, AttentionParams};
use crate::error::{Error, Result};
use crate::layers::{LayerParams, BN_MOMENTUM};
use crate::noise_map::DEFAULT_WINDOW;
use crate::ops::{BatchStats, ConvGeometry};
use crate::rng::seeded;
use crate::tensor::Tensor;

pub const FULL_CHANNELS: [usize; 5] = [64, 128, 256, 512, 1024];
pub const FULL_PATCH: usize = 224;
pub const MIN_CHANNELS: usize = 8;

const ENCODER: [ConvGeometry; 5] = [
    ConvGeometry::new(3, 1, 1),
    ConvGeometry::new(4, 2, 3),
    ConvGeometry::new(4, 2, 4),
    ConvGeometry::new(4, 2, 3),
    ConvGeometry::new(3, 1, 1),
];

/// Decoder geometry, in execution order (bottleneck first).
const DECODER: [ConvGeometry; 5] = [
    ConvGeometry::new(3, 1, 1),
    ConvGeometry::new(4, 2, 3),
    ConvGeometry::new(4, 2, 4),
    ConvGeometry::new(4, 2, 3),
    ConvGeometry::new(3, 1, 1),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkipMode {
    /// Element-wise addition of the matching encoder activation.
    Add,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    /// Nominal encoder widths; the decoder runs them in reverse down to one
    /// output channel.
    pub channels: [usize; 5],
    pub width_mult: f64,
    pub patch: usize,
    pub skip: SkipMode,
    pub mode: AttentionMode,
    pub heads: usize,
    pub gamma_init: f64,
    pub per_head_gamma: bool,
    pub noise_window: usize,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            channels: FULL_CHANNELS,
            width_mult: 1.0,
            patch: FULL_PATCH,
            skip: SkipMode::Add,
            mode: AttentionMode::NoiseAware,
            heads: 8,
            gamma_init: 0.0,
            per_head_gamma: false,
            noise_window: DEFAULT_WINDOW,
        }
    }
}

impl NetworkSpec {
    pub fn full_size(mode: AttentionMode) -> Self {
        NetworkSpec {
            mode,
            ..Self::default()
        }
    }

    /// Width 1/16 on 32x32 patches.
    pub fn toy(mode: AttentionMode) -> Self {
        NetworkSpec {
            width_mult: 1.0 / 16.0,
            patch: 32,
            mode,
            ..Self::default()
        }
    }

    /// Channel counts after the width multiplier.
    pub fn widths(&self) -> [usize; 5] {
        self.channels
            .map(|c| (libm::round(c as f64 * self.width_mult) as usize).max(MIN_CHANNELS))
    }

    pub fn attention_config(&self) -> AttentionConfig {
        AttentionConfig {
            channels: self.widths()[4],
            heads: self.heads,
            mode: self.mode,
            gamma_init: self.gamma_init,
            per_head_gamma: self.per_head_gamma,
            noise_window: self.noise_window,
        }
    }

    /// Spatial size after each encoder stage.
    pub fn encoder_sizes(&self) -> Result<[usize; 5]> {
        let mut sizes = [0; 5];
        let mut n = self.patch;
        for (i, g) in ENCODER.iter().enumerate() {
            n = g.conv_out(n).ok_or_else(|| self.incompatible())?;
            sizes[i] = n;
        }
        Ok(sizes)
    }

    fn incompatible(&self) -> Error {
        Error::Config(format!("patch size {} does not fit the padding schedule", self.patch))
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.windows(2).any(|w| w[0] >= w[1]) || self.channels[0] == 0 {
            return Err(Error::Config(format!(
                "channel schedule {:?} must be strictly increasing",
                self.channels
            )));
        }
        if !(self.width_mult > 0.0 && self.width_mult.is_finite()) {
            return Err(Error::Config(format!(
                "width multiplier {} must be positive",
                self.width_mult
            )));
        }
        let enc = self.encoder_sizes()?;
        // The decoder must land exactly on every skip resolution and the patch.
        let mut n = enc[4];
        let targets = [enc[3], enc[2], enc[1], enc[0], self.patch];
        for (g, &want) in DECODER.iter().zip(&targets) {
            n = g.transposed_out(n).ok_or_else(|| self.incompatible())?;
            if n != want {
                return Err(self.incompatible());
            }
        }
        self.attention_config().validate()
    }

    /// `key=value` pairs describing the spec, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let ch: Vec<String> = self.channels.iter().map(ToString::to_string).collect();
        vec![
            ("channels", ch.join(",")),
            ("width_mult", self.width_mult.to_string()),
            ("patch", self.patch.to_string()),
            (
                "skip",
                String::from(if self.skip == SkipMode::Add { "add" } else { "none" }),
            ),
            ("mode", String::from(self.mode.name())),
            ("heads", self.heads.to_string()),
            ("gamma_init", self.gamma_init.to_string()),
            ("per_head_gamma", self.per_head_gamma.to_string()),
            ("noise_window", self.noise_window.to_string()),
        ]
    }

    /// Overrides one field from its `key=value` form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: core::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
        }
        match key {
            "channels" => {
                let parts = value
                    .split(',')
                    .map(|p| num::<usize>(key, p))
                    .collect::<Result<Vec<_>>>()?;
                self.channels = parts
                    .try_into()
                    .map_err(|_| Error::Config("channels needs five values".into()))?;
            }
            "width_mult" => self.width_mult = parse_ratio(value)?,
            "patch" => self.patch = num(key, value)?,
            "skip" => {
                self.skip = match value {
                    "add" => SkipMode::Add,
                    "none" => SkipMode::None,
                    _ => return Err(Error::Config(format!("unknown skip mode {value:?}"))),
                }
            }
            "mode" => self.mode = parse_mode(value)?,
            "heads" => self.heads = num(key, value)?,
            "gamma_init" => self.gamma_init = num(key, value)?,
            "per_head_gamma" => self.per_head_gamma = num(key, value)?,
            "noise_window" => self.noise_window = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown network key {key:?}"))),
        }
        Ok(())
    }
}

/// Accepts `ada`/`standard` and `naada`/`noise_aware`.
pub fn parse_mode(s: &str) -> Result<AttentionMode> {
    match s {
        "ada" | "standard" => Ok(AttentionMode::Standard),
        "naada" | "noise_aware" | "nasa" => Ok(AttentionMode::NoiseAware),
        _ => Err(Error::Config(format!("unknown attention mode {s:?}"))),
    }
}

/// A decimal (`0.0625`) or a fraction (`1/16`).
pub fn parse_ratio(s: &str) -> Result<f64> {
    let bad = || Error::Config(format!("bad ratio {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0.0 {
                return Err(bad());
            }
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

/// One convolution, optionally followed by batch norm.
#[derive(Clone, Debug)]
pub struct Stage {
    pub conv: LayerParams,
    pub bn: Option<LayerParams>,
}

#[derive(Clone, Debug)]
pub struct NetworkState {
    pub spec: NetworkSpec,
    pub encoder: Vec<Stage>,
    pub attention: AttentionParams,
    pub decoder: Vec<Stage>,
    /// Batch statistics in training mode, running statistics otherwise.
    pub training: bool,
}

#[derive(Clone, Debug)]
pub struct Encoded {
    pub bottleneck: Tensor,
    /// Outputs of the first four encoder stages, shallowest first.
    pub skips: Vec<Tensor>,
    pub stats: Vec<BatchStats>,
}

#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub output: Tensor,
    pub attention: AttentionOutput,
    /// Batch statistics of every batch-norm layer in [`NetworkState::layers`]
    /// order; empty in eval mode.
    pub stats: Vec<BatchStats>,
}

/// One row of [`NetworkState::summary`].
#[derive(Clone, Debug, PartialEq)]
pub struct LayerRow {
    pub name: String,
    pub kind: &'static str,
    /// Output shape for a batch of one.
    pub output: [usize; 4],
    pub params: usize,
}

fn run_stage(stage: &Stage, x: &Tensor, training: bool, stats: &mut Vec<BatchStats>) -> Result<Tensor> {
    let mut y = stage.conv.conv(x)?;
    if let Some(bn) = &stage.bn {
        let (normed, s) = bn.batch_norm(&y, training)?;
        stats.extend(s);
        y = normed.relu()?;
    }
    Ok(y)
}

impl NetworkState {
    /// Fresh weights; ADA and NAADA specs with the same seed get identical
    /// tensors.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = seeded(seed);
        let w = spec.widths();
        let mut encoder = Vec::with_capacity(5);
        let mut cin = 1;
        for (g, &cout) in ENCODER.iter().zip(&w) {
            encoder.push(Stage {
                conv: LayerParams::conv2d(cin, cout, *g, &mut rng),
                bn: Some(LayerParams::batchnorm2d(cout)),
            });
            cin = cout;
        }
        let attention = AttentionParams::new(&spec.attention_config(), &mut rng)?;
        let outs = [w[3], w[2], w[1], w[0], 1];
        let mut decoder = Vec::with_capacity(5);
        for (i, (g, &cout)) in DECODER.iter().zip(&outs).enumerate() {
            decoder.push(Stage {
                conv: LayerParams::transposed_conv2d(cin, cout, *g, &mut rng),
                bn: (i < 4).then(|| LayerParams::batchnorm2d(cout)),
            });
            cin = cout;
        }
        Ok(NetworkState {
            spec,
            encoder,
            attention,
            decoder,
            training: true,
        })
    }

    fn check_input(&self, y: &Tensor) -> Result<()> {
        let p = self.spec.patch;
        match y.shape() {
            [_, 1, h, w] if *h == p && *w == p => Ok(()),
            s => Err(Error::Dimensions(format!("expected [B, 1, {p}, {p}], got {s:?}"))),
        }
    }

    pub fn encode(&self, y: &Tensor) -> Result<Encoded> {
        self.check_input(y)?;
        let mut stats = Vec::new();
        let mut skips = Vec::with_capacity(4);
        let mut x = y.clone();
        for (i, stage) in self.encoder.iter().enumerate() {
            x = run_stage(stage, &x, self.training, &mut stats)?;
            if i < 4 {
                skips.push(x.clone());
            }
        }
        Ok(Encoded {
            bottleneck: x,
            skips,
            stats,
        })
    }

    pub fn attend(&self, f: &Tensor) -> Result<AttentionOutput> {
        attention::forward(f, &self.attention, &self.spec.attention_config())
    }

    /// Returns the reconstruction and the decoder's batch statistics.
    pub fn decode(&self, f: &Tensor, skips: &[Tensor]) -> Result<(Tensor, Vec<BatchStats>)> {
        if skips.len() != 4 {
            return Err(Error::Dimensions(format!(
                "expected 4 skip tensors, got {}",
                skips.len()
            )));
        }
        let mut stats = Vec::new();
        let mut x = f.clone();
        for (i, stage) in self.decoder.iter().enumerate() {
            x = run_stage(stage, &x, self.training, &mut stats)?;
            if i < 4 && self.spec.skip == SkipMode::Add {
                let skip = &skips[3 - i];
                if skip.shape() != x.shape() {
                    return Err(Error::Dimensions(format!(
                        "skip {:?} does not match decoder stage {:?}",
                        skip.shape(),
                        x.shape()
                    )));
                }
                x = x.add(skip)?;
            }
        }
        Ok((x.sigmoid()?, stats))
    }

    pub fn forward(&self, y: &Tensor) -> Result<ForwardPass> {
        let enc = self.encode(y)?;
        let attention = self.attend(&enc.bottleneck)?;
        let (output, dec_stats) = self.decode(&attention.output, &enc.skips)?;
        let mut stats = enc.stats;
        stats.extend(dec_stats);
        Ok(ForwardPass {
            output,
            attention,
            stats,
        })
    }

    /// Folds batch statistics from a training pass into the running ones.
    pub fn apply_batch_stats(&mut self, stats: &[BatchStats]) -> Result<()> {
        let mut bns: Vec<&mut LayerParams> = self
            .encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .filter_map(|s| s.bn.as_mut())
            .collect();
        if bns.len() != stats.len() {
            return Err(Error::Config(format!(
                "{} batch statistics for {} layers",
                stats.len(),
                bns.len()
            )));
        }
        for (bn, s) in bns.iter_mut().zip(stats) {
            bn.update_running(s, BN_MOMENTUM);
        }
        Ok(())
    }

    /// Every layer with a stable name, in execution order. The noise-query
    /// projection is listed in both modes.
    pub fn layers(&self) -> Vec<(String, &LayerParams)> {
        let mut out = Vec::new();
        for (i, s) in self.encoder.iter().enumerate() {
            out.push((format!("enc{}.conv", i + 1), &s.conv));
            if let Some(bn) = &s.bn {
                out.push((format!("enc{}.bn", i + 1), bn));
            }
        }
        let a = &self.attention;
        for (name, l) in [
            ("attn.q", &a.q_proj),
            ("attn.k", &a.k_proj),
            ("attn.v", &a.v_proj),
            ("attn.noise_q", &a.noise_q_proj),
            ("attn.out", &a.out_proj),
        ] {
            out.push((String::from(name), l));
        }
        for (i, s) in self.decoder.iter().enumerate() {
            out.push((format!("dec{}.conv", i + 1), &s.conv));
            if let Some(bn) = &s.bn {
                out.push((format!("dec{}.bn", i + 1), bn));
            }
        }
        out
    }

    pub fn layers_mut(&mut self) -> Vec<(String, &mut LayerParams)> {
        let mut out = Vec::new();
        for (i, s) in self.encoder.iter_mut().enumerate() {
            out.push((format!("enc{}.conv", i + 1), &mut s.conv));
            if let Some(bn) = &mut s.bn {
                out.push((format!("enc{}.bn", i + 1), bn));
            }
        }
        let a = &mut self.attention;
        out.push((String::from("attn.q"), &mut a.q_proj));
        out.push((String::from("attn.k"), &mut a.k_proj));
        out.push((String::from("attn.v"), &mut a.v_proj));
        out.push((String::from("attn.noise_q"), &mut a.noise_q_proj));
        out.push((String::from("attn.out"), &mut a.out_proj));
        for (i, s) in self.decoder.iter_mut().enumerate() {
            out.push((format!("dec{}.conv", i + 1), &mut s.conv));
            if let Some(bn) = &mut s.bn {
                out.push((format!("dec{}.bn", i + 1), bn));
            }
        }
        out
    }

    fn uses_noise_path(&self, layer: &str) -> bool {
        self.spec.mode == AttentionMode::NoiseAware || layer != "attn.noise_q"
    }

    /// Trainable tensors in a fixed order. Standard attention leaves out the
    /// noise-query projection and γ'.
    pub fn parameters(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (name, l) in self.layers() {
            if self.uses_noise_path(&name) {
                out.push((format!("{name}.weight"), &l.weight));
                out.push((format!("{name}.bias"), &l.bias));
            }
        }
        if self.spec.mode == AttentionMode::NoiseAware {
            out.push((String::from("attn.gamma"), &self.attention.gamma));
        }
        out
    }

    /// Mutable view matching [`parameters`](Self::parameters) entry for entry.
    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let noise_aware = self.spec.mode == AttentionMode::NoiseAware;
        let mut out = Vec::new();
        let mut gamma = None;
        {
            let NetworkState {
                encoder,
                attention,
                decoder,
                ..
            } = self;
            for s in encoder.iter_mut() {
                push_stage(&mut out, s);
            }
            let AttentionParams {
                q_proj,
                k_proj,
                v_proj,
                noise_q_proj,
                out_proj,
                gamma: g,
            } = attention;
            for l in [q_proj, k_proj, v_proj] {
                out.push(&mut l.weight);
                out.push(&mut l.bias);
            }
            if noise_aware {
                out.push(&mut noise_q_proj.weight);
                out.push(&mut noise_q_proj.bias);
            }
            out.push(&mut out_proj.weight);
            out.push(&mut out_proj.bias);
            if noise_aware {
                gamma = Some(g);
            }
            for s in decoder.iter_mut() {
                push_stage(&mut out, s);
            }
        }
        out.extend(gamma);
        out
    }

    /// A copy with the trainable tensors replaced, in
    /// [`parameters`](Self::parameters) order.
    pub fn with_parameters(&self, params: &[Tensor]) -> Result<NetworkState> {
        let mut next = self.clone();
        let mut slots = next.parameters_mut();
        if slots.len() != params.len() {
            return Err(Error::Config(format!(
                "{} tensors for {} parameters",
                params.len(),
                slots.len()
            )));
        }
        for (slot, p) in slots.iter_mut().zip(params) {
            if slot.shape() != p.shape() {
                return Err(Error::Dimensions(format!(
                    "parameter {:?} replaced by {:?}",
                    slot.shape(),
                    p.shape()
                )));
            }
            **slot = p.clone();
        }
        Ok(next)
    }

    pub fn param_count(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Layer table for a batch of one, computed from the geometry.
    pub fn summary(&self) -> Result<Vec<LayerRow>> {
        let enc = self.spec.encoder_sizes()?;
        let w = self.spec.widths();
        let mut rows = Vec::new();
        let row = |name: String, l: &LayerParams, c: usize, n: usize| LayerRow {
            name,
            kind: l.kind.name(),
            output: [1, c, n, n],
            params: l.param_count(),
        };
        for (i, s) in self.encoder.iter().enumerate() {
            rows.push(row(format!("enc{}.conv", i + 1), &s.conv, w[i], enc[i]));
            if let Some(bn) = &s.bn {
                rows.push(row(format!("enc{}.bn", i + 1), bn, w[i], enc[i]));
            }
        }
        let a = &self.attention;
        let mut attn: Vec<(&str, &LayerParams)> =
            vec![("attn.q", &a.q_proj), ("attn.k", &a.k_proj), ("attn.v", &a.v_proj)];
        if self.spec.mode == AttentionMode::NoiseAware {
            attn.push(("attn.noise_q", &a.noise_q_proj));
        }
        attn.push(("attn.out", &a.out_proj));
        for (name, l) in attn {
            rows.push(row(String::from(name), l, w[4], enc[4]));
        }
        if self.spec.mode == AttentionMode::NoiseAware {
            rows.push(LayerRow {
                name: String::from("attn.gamma"),
                kind: "scalar",
                output: [1, w[4], enc[4], enc[4]],
                params: a.gamma.numel(),
            });
        }
        let dec_c = [w[3], w[2], w[1], w[0], 1];
        let dec_n = [enc[3], enc[2], enc[1], enc[0], self.spec.patch];
        for (i, s) in self.decoder.iter().enumerate() {
            rows.push(row(format!("dec{}.conv", i + 1), &s.conv, dec_c[i], dec_n[i]));
            if let Some(bn) = &s.bn {
                rows.push(row(format!("dec{}.bn", i + 1), bn, dec_c[i], dec_n[i]));
            }
        }
        Ok(rows)
    }
}

fn push_stage<'a>(out: &mut Vec<&'a mut Tensor>, s: &'a mut Stage) {
    out.push(&mut s.conv.weight);
    out.push(&mut s.conv.bias);
    if let Some(bn) = &mut s.bn {
        out.push(&mut bn.weight);
        out.push(&mut bn.bias);
    }
}

/// Renders summary rows as a fixed-width text table with a total line.
pub fn format_summary(rows: &[LayerRow]) -> String {
    let mut s = format!("{:<14} {:<18} {:<22} {:>12}\n", "layer", "kind", "output", "params");
    for r in rows {
        let shape = format!("{:?}", r.output);
        s.push_str(&format!(
            "{:<14} {:<18} {:<22} {:>12}\n",
            r.name, r.kind, shape, r.params
        ));
    }
    let total: usize = rows.iter().map(|r| r.params).sum();
    s.push_str(&format!("{:<14} {:<18} {:<22} {:>12}\n", "total", "", "", total));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_respect_the_floor() {
        assert_eq!(NetworkSpec::toy(AttentionMode::NoiseAware).widths(), [8, 8, 16, 32, 64]);
        assert_eq!(NetworkSpec::default().widths(), FULL_CHANNELS);
    }

    #[test]
    fn patch_sizes() {
        let mut spec = NetworkSpec::default();
        assert_eq!(spec.encoder_sizes().unwrap(), [224, 114, 60, 32, 32]);
        spec.patch = 32;
        assert_eq!(spec.encoder_sizes().unwrap(), [32, 18, 12, 8, 8]);
        spec.validate().unwrap();
        spec.patch = 64;
        assert_eq!(spec.encoder_sizes().unwrap(), [64, 34, 20, 12, 12]);
        spec.validate().unwrap();
        spec.patch = 30;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn schedule_must_increase() {
        let spec = NetworkSpec {
            channels: [64, 64, 256, 512, 1024],
            ..NetworkSpec::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn pairs_round_trip() {
        let mut spec = NetworkSpec::toy(AttentionMode::Standard);
        spec.per_head_gamma = true;
        let mut back = NetworkSpec::default();
        for (k, v) in spec.to_pairs() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, spec);
        assert!((parse_ratio("1/16").unwrap() - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn parameter_views_agree() {
        for mode in [AttentionMode::Standard, AttentionMode::NoiseAware] {
            let mut state = NetworkState::new(NetworkSpec::toy(mode), 1).unwrap();
            let named: Vec<Vec<usize>> = state.parameters().iter().map(|(_, t)| t.shape().to_vec()).collect();
            let ids: Vec<_> = state.parameters().iter().map(|(_, t)| t.id()).collect();
            let muts = state.parameters_mut();
            assert_eq!(muts.len(), named.len());
            for ((m, shape), id) in muts.iter().zip(&named).zip(&ids) {
                assert_eq!(m.shape(), shape.as_slice());
                assert_eq!(m.id(), *id);
            }
        }
    }

    #[test]
    fn toy_forward_shapes() {
        let mut state = NetworkState::new(NetworkSpec::toy(AttentionMode::NoiseAware), 2).unwrap();
        let y = Tensor::full(&[2, 1, 32, 32], 0.5);
        let enc = state.encode(&y).unwrap();
        assert_eq!(enc.bottleneck.shape(), &[2, 64, 8, 8]);
        let shapes: Vec<&[usize]> = enc.skips.iter().map(Tensor::shape).collect();
        assert_eq!(
            shapes,
            [&[2, 8, 32, 32][..], &[2, 8, 18, 18], &[2, 16, 12, 12], &[2, 32, 8, 8]]
        );
        let pass = state.forward(&y).unwrap();
        assert_eq!(pass.output.shape(), &[2, 1, 32, 32]);
        assert_eq!(pass.stats.len(), 9);
        state.apply_batch_stats(&pass.stats).unwrap();
        assert!(state.forward(&Tensor::full(&[1, 1, 16, 16], 0.5)).is_err());
    }

    #[test]
    fn zeroed_decoder_outputs_one_half() {
        let mut state = NetworkState::new(NetworkSpec::toy(AttentionMode::Standard), 3).unwrap();
        for s in &mut state.decoder {
            s.conv.weight = Tensor::zeros(s.conv.weight.shape());
            s.conv.bias = Tensor::zeros(s.conv.bias.shape());
        }
        let out = state.forward(&Tensor::full(&[1, 1, 32, 32], 0.3)).unwrap().output;
        assert!(out.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn summary_matches_state() {
        let state = NetworkState::new(NetworkSpec::toy(AttentionMode::NoiseAware), 4).unwrap();
        let rows = state.summary().unwrap();
        let total: usize = rows.iter().map(|r| r.params).sum();
        assert_eq!(total, state.param_count());
        assert_eq!(rows.last().unwrap().output, [1, 1, 32, 32]);
        assert!(format_summary(&rows).contains("total"));
    }
}
