//! MSE training with Adam and early stopping on validation loss.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::autodiff::Gradients;
use crate::dataset::PatchPair;
use crate::error::{Error, Result, TensorError};
use crate::metrics::psnr_values;
use crate::network::NetworkState;
use crate::rng::{derive_seed, seeded};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Validation rounds without strict improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Validate every this many epochs.
    pub validation_interval: usize,
    /// Skip all parameter and running-statistic updates.
    pub frozen: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
            batch_size: 16,
            max_epochs: 100,
            patience: 5,
            seed: 0,
            validation_interval: 1,
            frozen: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("Adam epsilon must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 || self.validation_interval == 0 {
            return bad("batch size, epochs, patience and validation interval must be at least 1");
        }
        Ok(())
    }
}

/// First and second moment buffers, one per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Vec<f64>> = params.into_iter().map(|p| alloc::vec![0.0; p.numel()]).collect();
        AdamState {
            v: m.clone(),
            m,
            step: 0,
        }
    }
}

/// Mean squared error over every element.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<Tensor, TensorError> {
    pred.sub(target)?.square()?.mean()
}

/// One bias-corrected Adam update. Each parameter is replaced by a fresh
/// leaf, so `grads` must come from a graph built on the current tensors.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::Config(alloc::format!(
            "optimizer tracks {} parameters, got {}",
            state.m.len(),
            params.len()
        )));
    }
    let all: Vec<&[f64]> = params
        .iter()
        .enumerate()
        .map(|(index, p)| grads.get(p).ok_or(Error::MissingGradient { index }))
        .collect::<Result<_>>()?;
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - libm::pow(cfg.beta1, t);
    let c2 = 1.0 - libm::pow(cfg.beta2, t);
    let mut updated = Vec::with_capacity(params.len());
    for ((p, g), (m, v)) in params.iter().zip(&all).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let mut data = p.to_vec();
        for i in 0..data.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            data[i] -= cfg.learning_rate * (m[i] / c1) / (libm::sqrt(v[i] / c2) + cfg.epsilon);
        }
        updated.push(Tensor::parameter(data, p.shape())?);
    }
    for (p, u) in params.iter_mut().zip(updated) {
        **p = u;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Mean per-patch PSNR of the training predictions.
    pub train_psnr: f64,
    /// Present on validation epochs.
    pub val_loss: Option<f64>,
    pub val_psnr: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Best-validation state, in eval mode.
    pub state: NetworkState,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Mean per-patch PSNR of the predictions.
    pub psnr: f64,
    /// Mean per-patch PSNR of the noisy inputs.
    pub input_psnr: f64,
}

fn stack(pairs: &[&PatchPair], patch: usize) -> Result<(Tensor, Tensor)> {
    let n = patch * patch;
    let mut noisy = Vec::with_capacity(pairs.len() * n);
    let mut clean = Vec::with_capacity(pairs.len() * n);
    for p in pairs {
        if p.noisy.len() != n || p.clean.len() != n {
            return Err(Error::Dimensions(alloc::format!(
                "patch pair does not hold {patch}x{patch} values"
            )));
        }
        noisy.extend_from_slice(&p.noisy);
        clean.extend_from_slice(&p.clean);
    }
    let shape = [pairs.len(), 1, patch, patch];
    Ok((Tensor::new(noisy, &shape)?, Tensor::new(clean, &shape)?))
}

fn patch_psnrs(pred: &[f64], target: &[f64], n: usize) -> Result<Vec<f64>> {
    pred.chunks(n)
        .zip(target.chunks(n))
        .map(|(a, b)| psnr_values(a, b, 1.0))
        .collect()
}

/// Loss and PSNR in eval mode.
pub fn evaluate(state: &NetworkState, pairs: &[PatchPair], batch_size: usize) -> Result<Evaluation> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("evaluation"));
    }
    let mut eval = state.clone();
    eval.training = false;
    let patch = state.spec.patch;
    let (mut loss, mut psnr, mut input_psnr) = (0.0, 0.0, 0.0);
    let refs: Vec<&PatchPair> = pairs.iter().collect();
    for chunk in refs.chunks(batch_size.max(1)) {
        let (x, y) = stack(chunk, patch)?;
        let out = eval.forward(&x)?.output;
        loss += mse_loss(&out, &y)?.item()? * chunk.len() as f64;
        psnr += patch_psnrs(out.data(), y.data(), patch * patch)?.iter().sum::<f64>();
        input_psnr += patch_psnrs(x.data(), y.data(), patch * patch)?.iter().sum::<f64>();
    }
    let n = pairs.len() as f64;
    Ok(Evaluation {
        loss: loss / n,
        psnr: psnr / n,
        input_psnr: input_psnr / n,
    })
}

/// Denoises a list of `patch * patch` buffers in eval mode.
pub fn predict(state: &NetworkState, patches: &[Vec<f64>], batch_size: usize) -> Result<Vec<Vec<f64>>> {
    let mut eval = state.clone();
    eval.training = false;
    let p = state.spec.patch;
    let mut out = Vec::with_capacity(patches.len());
    for chunk in patches.chunks(batch_size.max(1)) {
        let mut data = Vec::with_capacity(chunk.len() * p * p);
        for patch in chunk {
            if patch.len() != p * p {
                return Err(Error::Dimensions(alloc::format!(
                    "patch of {} values, expected {}",
                    patch.len(),
                    p * p
                )));
            }
            data.extend_from_slice(patch);
        }
        let y = eval.forward(&Tensor::new(data, &[chunk.len(), 1, p, p])?)?.output;
        out.extend(y.data().chunks(p * p).map(<[f64]>::to_vec));
    }
    Ok(out)
}

fn diverged(epoch: usize, step: usize, loss: f64) -> Error {
    Error::Divergence { epoch, step, loss }
}

/// Turns a non-finite tensor failure into [`Error::Divergence`].
fn divergence_of(epoch: usize, step: usize, loss: f64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Tensor(TensorError::NonFinite { .. }) => diverged(epoch, step, loss),
        other => other,
    }
}

pub fn train(
    state: NetworkState,
    train_set: &[PatchPair],
    val_set: &[PatchPair],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(state, train_set, val_set, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<F>(
    mut state: NetworkState,
    train_set: &[PatchPair],
    val_set: &[PatchPair],
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochRecord),
{
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("training"));
    }
    if val_set.is_empty() {
        return Err(Error::EmptyDataset("validation"));
    }
    let patch = state.spec.patch;
    let mut adam = AdamState::new(state.parameters().into_iter().map(|(_, t)| t));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(NetworkState, usize, f64)> = None;
    let mut stale = 0;
    let mut stopped_early = false;
    let mut step = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut seeded(derive_seed(cfg.seed, epoch as u64)));
        state.training = true;
        let (mut loss_sum, mut psnr_sum) = (0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            step += 1;
            let batch: Vec<&PatchPair> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (x, y) = stack(&batch, patch)?;
            let pass = state.forward(&x).map_err(divergence_of(epoch, step, f64::NAN))?;
            let loss = mse_loss(&pass.output, &y)?;
            let value = loss.item()?;
            if !value.is_finite() {
                return Err(diverged(epoch, step, value));
            }
            loss_sum += value * chunk.len() as f64;
            psnr_sum += patch_psnrs(pass.output.data(), y.data(), patch * patch)?
                .iter()
                .sum::<f64>();
            if !cfg.frozen {
                let grads = loss.backward().map_err(|e| match e {
                    TensorError::NonFinite { .. } => diverged(epoch, step, value),
                    other => other.into(),
                })?;
                adam_step(&mut state.parameters_mut(), &grads, &mut adam, cfg)
                    .map_err(divergence_of(epoch, step, value))?;
                state
                    .apply_batch_stats(&pass.stats)
                    .map_err(divergence_of(epoch, step, value))?;
            }
        }
        let n = train_set.len() as f64;
        let mut record = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_psnr: psnr_sum / n,
            val_loss: None,
            val_psnr: None,
        };
        let mut stop = false;
        if epoch % cfg.validation_interval == 0 {
            let ev = evaluate(&state, val_set, cfg.batch_size).map_err(divergence_of(epoch, step, f64::NAN))?;
            if !ev.loss.is_finite() {
                return Err(diverged(epoch, step, ev.loss));
            }
            record.val_loss = Some(ev.loss);
            record.val_psnr = Some(ev.psnr);
            if best.as_ref().is_none_or(|b| ev.loss < b.2) {
                let mut snapshot = state.clone();
                snapshot.training = false;
                best = Some((snapshot, epoch, ev.loss));
                stale = 0;
            } else {
                stale += 1;
                stop = stale >= cfg.patience;
            }
        }
        on_epoch(&record);
        history.push(record);
        if stop {
            stopped_early = true;
            break;
        }
    }

    let (state, best_epoch, best_val_loss) = match best {
        Some(b) => b,
        None => {
            // No validation epoch happened; fall back to the final weights.
            state.training = false;
            let loss = evaluate(&state, val_set, cfg.batch_size)?.loss;
            (state, cfg.max_epochs, loss)
        }
    };
    Ok(TrainOutcome {
        state,
        history,
        best_epoch,
        best_val_loss,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_cases() {
        let a = Tensor::new(alloc::vec![0.1, 0.5, 0.9], &[3]).unwrap();
        assert_eq!(mse_loss(&a, &a).unwrap().item().unwrap(), 0.0);
        let b = Tensor::new(a.data().iter().map(|v| v + 0.1).collect(), &[3]).unwrap();
        assert!((mse_loss(&a, &b).unwrap().item().unwrap() - 0.01).abs() < 1e-12);
        assert!(mse_loss(&a, &Tensor::zeros(&[4])).is_err());
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = TrainConfig::default();
        let mut w = Tensor::parameter(alloc::vec![1.0, -2.0, 0.5], &[3]).unwrap();
        let g = Tensor::new(alloc::vec![3.0, -0.01, 40.0], &[3]).unwrap();
        let grads = w.mul(&g).unwrap().sum().unwrap().backward().unwrap();
        let before = w.to_vec();
        let mut st = AdamState::new([&w]);
        adam_step(&mut [&mut w], &grads, &mut st, &cfg).unwrap();
        for ((b, a), g) in before.iter().zip(w.data()).zip(g.data()) {
            assert!((b - a - 0.01 * g.signum()).abs() < 1e-8);
        }
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_gradient_changes_nothing() {
        let cfg = TrainConfig::default();
        let mut w = Tensor::parameter(alloc::vec![0.3, 0.7], &[2]).unwrap();
        let before = w.to_vec();
        let mut st = AdamState::new([&w]);
        for _ in 0..5 {
            let grads = w.scale(0.0).unwrap().sum().unwrap().backward().unwrap();
            adam_step(&mut [&mut w], &grads, &mut st, &cfg).unwrap();
        }
        assert_eq!(w.data(), before.as_slice());
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let cfg = TrainConfig::default();
        let mut w = Tensor::parameter(alloc::vec![1.0], &[1]).unwrap();
        let other = Tensor::parameter(alloc::vec![1.0], &[1]).unwrap();
        let grads = other.sum().unwrap().backward().unwrap();
        let mut st = AdamState::new([&w]);
        assert!(matches!(
            adam_step(&mut [&mut w], &grads, &mut st, &cfg),
            Err(Error::MissingGradient { index: 0 })
        ));
    }

    #[test]
    fn quadratic_bowl_descends() {
        let cfg = TrainConfig::default();
        let mut w = Tensor::parameter(alloc::vec![0.8, -0.5, 0.3, 1.0], &[4]).unwrap();
        let mut st = AdamState::new([&w]);
        let mut losses = Vec::new();
        for _ in 0..100 {
            let loss = w.square().unwrap().sum().unwrap();
            losses.push(loss.item().unwrap());
            let grads = loss.backward().unwrap();
            adam_step(&mut [&mut w], &grads, &mut st, &cfg).unwrap();
        }
        // Steps of about lr per coordinate keep it well away from overshoot.
        assert!(losses.windows(2).all(|p| p[1] < p[0]));
        assert!(losses[99] < 0.05 * losses[0]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for broken in [
            TrainConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            TrainConfig {
                beta1: 1.0,
                ..Default::default()
            },
            TrainConfig {
                patience: 0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
        ] {
            assert!(broken.validate().is_err());
        }
    }
}
