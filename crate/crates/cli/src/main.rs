//! `tagspot`: build tags, push them through simulated channels, spot them in
//! sample streams, and tabulate detection performance.
//!
//! Exit status is 0 on success, 1 for invalid input or configuration and 2
//! for filesystem errors.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use tagspot::analysis::ModelFading;
use tagspot::channel::{Fading, InterferenceKind};
use tagspot::detector::Denominator;

use crate::config::{ExperimentConfig, FamilyKind};
use crate::error::CliError;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "tagspot", version, about = "Multitone tag signaling toolkit")]
pub struct Cli {
    /// Experiment configuration document (TOML); flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; required by every command that draws random numbers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output path: the IQ file for modulate/impair, the table otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Monte Carlo trials per estimate.
    #[arg(long, global = true)]
    pub trials: Option<u64>,

    /// Strength threshold.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,

    /// Thick-carrier SNR in dB.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub snr: Option<f64>,

    /// Codebook file; the built-in 60-word family when absent.
    #[arg(long, global = true)]
    pub codebook: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,

    /// Run Monte Carlo trials on one thread. Results are identical.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise one tag and write it as an IQ file.
    Modulate(ModulateArgs),
    /// Apply fading, frequency offset, interference and noise to an IQ file.
    Impair(ImpairArgs),
    /// Run the detector over an IQ file.
    Spot(SpotArgs),
    /// Detection and false-alarm curves.
    Curves(CurvesArgs),
    /// Inter-carrier leakage under frequency offset.
    Leakage(LeakageArgs),
    /// False-alarm rate against the number of active carriers.
    Sweep(SweepArgs),
    /// Range multiplier bought by an SNR margin.
    Range(RangeArgs),
    /// Tag airtime relative to the packet it precedes.
    Overhead(OverheadArgs),
    /// Check a codebook file's declared minimum distance.
    CodebookVerify(CodebookVerifyArgs),
}

#[derive(Debug, Args)]
pub struct ModulateArgs {
    /// Codeword index; random (seeded) when absent.
    #[arg(long)]
    pub index: Option<usize>,
    /// Total spectral power of the tag.
    #[arg(long)]
    pub power: Option<f64>,
    /// Redraw phases until the PAPR is at most this many dB.
    #[arg(long)]
    pub papr_cap: Option<f64>,
    #[arg(long)]
    pub max_attempts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ImpairArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Frequency offset in thin-carrier widths.
    #[arg(long, allow_negative_numbers = true)]
    pub cfo: Option<f64>,
    #[arg(long)]
    pub max_cfo: Option<f64>,
    /// none, narrowband or wideband-rayleigh.
    #[arg(long, value_parser = kebab::<Fading>)]
    pub fading: Option<Fading>,
    /// data or tag.
    #[arg(long, value_parser = kebab::<InterferenceKind>)]
    pub interference: Option<InterferenceKind>,
    /// Signal-to-interference ratio in dB.
    #[arg(long, allow_negative_numbers = true, requires = "interference")]
    pub sir: Option<f64>,
    /// Interferer start relative to the signal, in samples.
    #[arg(long, requires = "interference")]
    pub interference_offset: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SpotArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Carrier-sense gate in dB over the tracked noise.
    #[arg(long, allow_negative_numbers = true)]
    pub carrier_sense: Option<f64>,
    /// Analyse every window.
    #[arg(long, conflicts_with = "carrier_sense")]
    pub no_carrier_sense: bool,
    /// all-carriers or exclude-nulls.
    #[arg(long, value_parser = kebab::<Denominator>)]
    pub denominator: Option<Denominator>,
    #[arg(long)]
    pub noise_smoothing: Option<f64>,
    #[arg(long)]
    pub initial_noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Threshold grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    /// SNR grid in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub snr_grid: Option<Vec<f64>>,
    /// narrowband and/or wideband.
    #[arg(long, value_delimiter = ',', value_parser = kebab::<ModelFading>)]
    pub fading: Option<Vec<ModelFading>>,
    /// single, code and/or unencoded.
    #[arg(long, value_delimiter = ',', value_parser = kebab::<FamilyKind>)]
    pub families: Option<Vec<FamilyKind>>,
    #[arg(long, value_parser = kebab::<Denominator>)]
    pub denominator: Option<Denominator>,
}

#[derive(Debug, Args)]
pub struct LeakageArgs {
    #[arg(long)]
    pub max_offset: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub blocks: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub carriers: Option<usize>,
    #[arg(long)]
    pub alpha: Option<usize>,
    /// Check each point's detection probability by Monte Carlo.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    /// SNR margins in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub gap: Option<Vec<f64>>,
    /// Path-loss exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub exponent: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct OverheadArgs {
    /// Payload sizes in bytes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub bytes: Option<Vec<usize>>,
    #[arg(long)]
    pub bytes_per_frame: Option<usize>,
    #[arg(long)]
    pub sync_frames: Option<usize>,
    #[arg(long)]
    pub tag_frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CodebookVerifyArgs {
    /// Codebook file; overrides --codebook.
    pub path: Option<PathBuf>,
}

/// Parses a kebab-case enum name through its serde representation.
fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown value {s:?}"))
}

fn base_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.version = Some(config::CONFIG_VERSION);
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if cli.trials.is_some() {
        config.trials = cli.trials;
    }
    if cli.gamma.is_some() {
        config.gamma = cli.gamma;
    }
    if cli.snr.is_some() {
        config.snr_db = cli.snr;
    }
    if cli.codebook.is_some() {
        config.codebook = cli.codebook.clone();
    }
    if cli.out.is_some() {
        config.out = cli.out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = base_config(cli)?;
    commands::run(&cli.command, config, cli.format, cli.sequential)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tagspot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
