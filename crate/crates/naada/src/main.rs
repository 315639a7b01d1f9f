use std::process::ExitCode;

use clap::Parser;
use naada::cli::Cli;
use naada::error::{classify, Failure};

fn quote(arg: &str) -> String {
    if !arg.is_empty() && arg.chars().all(|c| c.is_ascii_alphanumeric() || "-_./=:,".contains(c)) {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Failure::Usage.exit_code()
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match (cli.global.quiet, cli.global.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .parse_env("NAADA_LOG")
        .init();

    let command_line = std::env::args().map(|a| quote(&a)).collect::<Vec<_>>().join(" ");
    match naada::run(&cli, &command_line) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err).exit_code()
        }
    }
}
