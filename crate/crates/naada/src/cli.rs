//! Command-line definition.

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "naada",
    version,
    about = "Noise-aware attention denoising for panoramic radiographs"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Base seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat `key = value` settings file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    pub out: PathBuf,
    /// Override any setting; applied after all other sources.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// More logging (-v debug, -vv trace).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    /// Attention wiring: ada or naada.
    #[arg(long, global = true, help_heading = "Network")]
    pub mode: Option<String>,
    #[arg(long, global = true, help_heading = "Network")]
    pub heads: Option<usize>,
    /// Channel width multiplier, e.g. 0.0625 or 1/16.
    #[arg(long, global = true, help_heading = "Network")]
    pub width_mult: Option<String>,
    /// Square patch size.
    #[arg(long, global = true, help_heading = "Network")]
    pub patch: Option<usize>,

    /// Salt-and-pepper fraction of pixels.
    #[arg(long, global = true, help_heading = "Noise")]
    pub sp_fraction: Option<f64>,
    /// Speckle standard deviation.
    #[arg(long, global = true, help_heading = "Noise")]
    pub sigma_s: Option<f64>,
    /// Photon scaling: expected counts at full intensity.
    #[arg(long, global = true, help_heading = "Noise")]
    pub rho: Option<f64>,
    /// Gaussian sigma: a number, or `uniform:MAX` for a per-image draw.
    #[arg(long, global = true, help_heading = "Noise")]
    pub sigma_g: Option<String>,
    /// Exposure constant of the gray-to-intensity map.
    #[arg(long, global = true, help_heading = "Noise")]
    pub exposure: Option<f64>,

    #[arg(long, global = true, help_heading = "Training")]
    pub lr: Option<f64>,
    #[arg(long, global = true, help_heading = "Training")]
    pub batch_size: Option<usize>,
    #[arg(long, global = true, help_heading = "Training")]
    pub epochs: Option<usize>,
    #[arg(long, global = true, help_heading = "Training")]
    pub patience: Option<usize>,
}

impl Global {
    /// Flag values as setting assignments, in application order.
    pub fn assignments(&self) -> Vec<(&'static str, String)> {
        fn push<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
            if let Some(v) = v {
                out.push((key, v.to_string()));
            }
        }
        let mut out = Vec::new();
        push(&mut out, "seed", &self.seed);
        push(&mut out, "mode", &self.mode);
        push(&mut out, "heads", &self.heads);
        push(&mut out, "width_mult", &self.width_mult);
        push(&mut out, "patch", &self.patch);
        push(&mut out, "sp_fraction", &self.sp_fraction);
        push(&mut out, "sigma_s", &self.sigma_s);
        push(&mut out, "rho", &self.rho);
        push(&mut out, "sigma_g", &self.sigma_g);
        push(&mut out, "exposure", &self.exposure);
        push(&mut out, "lr", &self.lr);
        push(&mut out, "batch_size", &self.batch_size);
        push(&mut out, "max_epochs", &self.epochs);
        push(&mut out, "patience", &self.patience);
        out
    }
}

/// Location of the inspected patch; defaults to the image centre.
#[derive(Debug, Args)]
pub struct PatchAt {
    /// Top row of the patch.
    #[arg(long)]
    pub row: Option<usize>,
    /// Left column of the patch.
    #[arg(long)]
    pub col: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic radiograph-like phantoms as 8-bit PNGs.
    Phantom {
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
        #[arg(long, default_value_t = 512)]
        width: usize,
    },
    /// Synthesize noisy versions of every image in a directory.
    Noise {
        #[arg(value_name = "INPUT_DIR")]
        input: PathBuf,
    },
    /// Mirror, split and noise a source directory into a training corpus.
    BuildDataset {
        #[arg(value_name = "SOURCE_DIR")]
        source: PathBuf,
    },
    /// Train a denoiser and write its best checkpoint and loss history.
    Train {
        /// Corpus manifest written by build-dataset.
        #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
        manifest: Option<PathBuf>,
        /// Train on this many generated phantom patch pairs instead.
        #[arg(long, value_name = "PAIRS")]
        synthetic: Option<usize>,
    },
    /// Denoise full images patch by patch.
    Denoise {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Image files or directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// PSNR and SSIM of images against clean references, matched by name.
    Eval {
        clean: PathBuf,
        denoised: PathBuf,
        /// Label for the CSV rows.
        #[arg(long, default_value = "naada")]
        method: String,
    },
    /// Print the layer table and parameter count.
    Summary {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Export the bottleneck noise map of one patch as a normalized PNG.
    NoiseMap {
        image: PathBuf,
        /// Use a trained network; otherwise a fresh one from the seed.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        at: PatchAt,
    },
    /// Dump per-head attention matrices of one patch as CSV.
    AttentionDump {
        image: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        at: PatchAt,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Phantom { .. } => "phantom",
            Command::Noise { .. } => "noise",
            Command::BuildDataset { .. } => "build-dataset",
            Command::Train { .. } => "train",
            Command::Denoise { .. } => "denoise",
            Command::Eval { .. } => "eval",
            Command::Summary { .. } => "summary",
            Command::NoiseMap { .. } => "noise-map",
            Command::AttentionDump { .. } => "attention-dump",
        }
    }
}
