//! Flat `key = value` run settings.
//!
//! Values are layered: built-in defaults, then a `--config` file, then
//! command-line flags, then `--set key=value` overrides. Every run writes the
//! resolved result as `config.resolved`, which is itself a valid config file.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use naada_core::network::NetworkSpec;
use naada_core::noise::{ImpulseOrder, NoiseConfig, SigmaG, Stages};
use naada_core::train::TrainConfig;

use crate::error::usage;

pub const SNAPSHOT_FILE: &str = "config.resolved";

const STAGE_NAMES: [&str; 5] = ["quantum", "gray_poisson", "gaussian", "speckle", "impulse"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub network: NetworkSpec,
    /// `seed` is ignored; images get seeds derived from [`Settings::seed`].
    pub noise: NoiseConfig,
    /// `seed` is ignored in favour of [`Settings::seed`].
    pub train: TrainConfig,
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| usage(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(usage(format!("bad value {value:?} for {key}"))),
    }
}

pub fn parse_sigma_g(value: &str) -> Result<SigmaG> {
    let v = value.trim();
    match v.strip_prefix("uniform:") {
        Some(max) => Ok(SigmaG::Uniform {
            max: num("sigma_g", max)?,
        }),
        None => Ok(SigmaG::Fixed(num("sigma_g", v)?)),
    }
}

fn format_sigma_g(s: SigmaG) -> String {
    match s {
        SigmaG::Fixed(v) => v.to_string(),
        SigmaG::Uniform { max } => format!("uniform:{max}"),
    }
}

pub fn parse_stages(value: &str) -> Result<Stages> {
    match value.trim() {
        "all" => return Ok(Stages::ALL),
        "none" | "" => return Ok(Stages::NONE),
        _ => {}
    }
    let mut st = Stages::NONE;
    for name in value.split(',').map(str::trim) {
        let flag = match name {
            "quantum" => &mut st.quantum,
            "gray_poisson" => &mut st.gray_poisson,
            "gaussian" => &mut st.gaussian,
            "speckle" => &mut st.speckle,
            "impulse" => &mut st.impulse,
            _ => return Err(usage(format!("unknown noise stage {name:?}"))),
        };
        *flag = true;
    }
    Ok(st)
}

fn format_stages(st: Stages) -> String {
    if st == Stages::ALL {
        return "all".into();
    }
    if st == Stages::NONE {
        return "none".into();
    }
    let on = [st.quantum, st.gray_poisson, st.gaussian, st.speckle, st.impulse];
    STAGE_NAMES
        .iter()
        .zip(on)
        .filter(|(_, on)| *on)
        .map(|(n, _)| *n)
        .collect::<Vec<_>>()
        .join(",")
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "seed" => self.seed = num(key, value)?,

            "exposure" => self.noise.exposure = num(key, value)?,
            "rho" => self.noise.photon_scale = num(key, value)?,
            "sigma_g" => self.noise.sigma_g = parse_sigma_g(value)?,
            "sigma_s" => self.noise.sigma_s = num(key, value)?,
            "sp_fraction" => self.noise.sp_fraction = num(key, value)?,
            "impulse_order" => {
                self.noise.order = match value {
                    "speckle_first" => ImpulseOrder::SpeckleFirst,
                    "impulse_first" => ImpulseOrder::ImpulseFirst,
                    _ => return Err(usage(format!("unknown impulse order {value:?}"))),
                }
            }
            "stages" => self.noise.stages = parse_stages(value)?,

            "lr" => self.train.learning_rate = num(key, value)?,
            "beta1" => self.train.beta1 = num(key, value)?,
            "beta2" => self.train.beta2 = num(key, value)?,
            "adam_eps" => self.train.epsilon = num(key, value)?,
            "batch_size" => self.train.batch_size = num(key, value)?,
            "max_epochs" => self.train.max_epochs = num(key, value)?,
            "patience" => self.train.patience = num(key, value)?,
            "val_interval" => self.train.validation_interval = num(key, value)?,
            "frozen" => self.train.frozen = parse_bool(key, value)?,

            _ => self.network.set(key, value).map_err(|_| {
                if self.network.to_pairs().iter().any(|(k, _)| *k == key) {
                    usage(format!("bad value {value:?} for {key}"))
                } else {
                    usage(format!("unknown setting {key:?}"))
                }
            })?,
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{origin}:{}: expected key = value", i + 1)))?;
            self.set(k.trim(), v).with_context(|| format!("{origin}:{}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(|e| usage(format!("{e:#}")))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("override {kv:?} is not key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.noise.validate()?;
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
        .validate()?;
        Ok(())
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        let n = &self.noise;
        let t = &self.train;
        let mut out = vec![("seed".to_string(), self.seed.to_string())];
        out.extend(self.network.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)));
        let order = match n.order {
            ImpulseOrder::SpeckleFirst => "speckle_first",
            ImpulseOrder::ImpulseFirst => "impulse_first",
        };
        for (k, v) in [
            ("exposure", n.exposure.to_string()),
            ("rho", n.photon_scale.to_string()),
            ("sigma_g", format_sigma_g(n.sigma_g)),
            ("sigma_s", n.sigma_s.to_string()),
            ("sp_fraction", n.sp_fraction.to_string()),
            ("impulse_order", order.to_string()),
            ("stages", format_stages(n.stages)),
            ("lr", t.learning_rate.to_string()),
            ("beta1", t.beta1.to_string()),
            ("beta2", t.beta2.to_string()),
            ("adam_eps", t.epsilon.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("max_epochs", t.max_epochs.to_string()),
            ("patience", t.patience.to_string()),
            ("val_interval", t.validation_interval.to_string()),
            ("frozen", t.frozen.to_string()),
        ] {
            out.push((k.to_string(), v));
        }
        out
    }

    /// Config-file text with the invoking command line as a comment.
    pub fn snapshot(&self, command_line: &str) -> String {
        let mut s = format!("# {command_line}\n");
        for (k, v) in self.pairs() {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    pub fn noise_for(&self, seed: u64) -> NoiseConfig {
        NoiseConfig {
            seed,
            ..self.noise.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }
}
