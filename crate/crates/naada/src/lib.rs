//! Files, formats and the command-line front end of the naada denoiser.
//!
//! The numerical work lives in `naada_core`; this crate reads and writes
//! images, configs, manifests, checkpoints and CSV reports, and maps each
//! failure onto an exit code (0 success, 1 usage, 2 data, 3 numeric).

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod output;

use anyhow::Result;

use crate::cli::Cli;
use crate::config::Settings;
use crate::output::OutputDir;

/// Resolves settings with their precedence: defaults, `--config` file,
/// flags, then `--set` overrides.
pub fn resolve_settings(cli: &Cli) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &cli.global.config {
        s.apply_file(path)?;
    }
    for (key, value) in cli.global.assignments() {
        s.set(key, &value)?;
    }
    for kv in &cli.global.overrides {
        s.apply_override(kv)?;
    }
    s.validate()?;
    Ok(s)
}

/// Runs one invocation; `command_line` goes into the config snapshot.
pub fn run(cli: &Cli, command_line: &str) -> Result<()> {
    let mut settings = resolve_settings(cli)?;
    let mut out = OutputDir::create(&cli.global.out)?;
    commands::dispatch(&cli.command, &mut settings, &mut out)?;
    out.finish(&settings.snapshot(command_line))
}
