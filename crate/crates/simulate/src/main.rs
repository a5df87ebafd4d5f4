use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::Parser;
use ep_turbo::harness::{emit_channels, run_sweep, write_csv, ExperimentSpec};

/// Monte Carlo BER/FER sweep of turbo receivers over random ISI channels.
///
/// Flags override values read from `--config`.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Cli {
    /// Flat `key = value` file with any of the settings below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated schemes: lmmse, bep, d-bep, fep, d-fep, ksep, d-ksep, bp-ep.
    #[arg(long)]
    scheme: Option<String>,
    /// Constellation size (2, 4, 16, 64, 128, 256).
    #[arg(long = "mod")]
    modulation: Option<String>,
    /// Channel length.
    #[arg(long)]
    taps: Option<String>,
    #[arg(long)]
    channels: Option<String>,
    /// Frames per channel and E_b/N_0 point.
    #[arg(long)]
    frames: Option<String>,
    /// E_b/N_0 grid in dB, `start:step:end` or a comma list.
    #[arg(long)]
    ebn0: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// LDPC codeword length.
    #[arg(long)]
    code_length: Option<String>,
    /// `complex` or `real` Gaussian taps.
    #[arg(long)]
    tap_distribution: Option<String>,
    /// Stop a point after this many bit errors per scheme, or `off`.
    #[arg(long)]
    early_stop: Option<String>,
    /// Override every scheme's number of turbo iterations.
    #[arg(long)]
    turbo_iters: Option<String>,
    /// CSV output; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON-lines file with one record per decoded frame.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    /// Write each channel's taps to `<dir>/channel_NNN.txt`.
    #[arg(long)]
    emit_channel: Option<PathBuf>,
    /// Log progress to stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn spec_from(cli: &Cli) -> Result<ExperimentSpec> {
    let mut spec = match &cli.config {
        Some(p) => ExperimentSpec::from_config_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentSpec::default(),
    };
    let flags = [
        ("schemes", &cli.scheme),
        ("modulation", &cli.modulation),
        ("taps", &cli.taps),
        ("channels", &cli.channels),
        ("frames", &cli.frames),
        ("ebn0", &cli.ebn0),
        ("seed", &cli.seed),
        ("code_length", &cli.code_length),
        ("tap_distribution", &cli.tap_distribution),
        ("early_stop", &cli.early_stop),
        ("turbo_iters", &cli.turbo_iters),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            spec.set(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
        }
    }
    if cli.out.is_some() {
        spec.output.clone_from(&cli.out);
    }
    if cli.diagnostics.is_some() {
        spec.diagnostics.clone_from(&cli.diagnostics);
    }
    spec.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<()> {
    let spec = spec_from(&cli)?;
    if let Some(dir) = &cli.emit_channel {
        emit_channels(&spec, dir).with_context(|| format!("writing channels to {}", dir.display()))?;
    }
    let outcome = run_sweep(&spec)?;
    if spec.output.is_none() {
        write_csv(&outcome.records, std::io::stdout().lock())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            eprintln!("simulate: {}", msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simulate: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
