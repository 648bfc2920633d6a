//! `mclc`: generate sources, encode and decode `.mclc` files, run
//! rate-distortion sweeps, and compute reference curves.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(mclc::Error),
}

impl From<mclc::Error> for CliError {
    fn from(e: mclc::Error) -> Self {
        match e {
            mclc::Error::Parameter { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "mclc", version, about = "MCMC lossy compression of real-valued sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Write a synthetic source realization.
    Generate(GenerateArgs),
    /// Anneal a sequence and write an .mclc stream.
    Encode(EncodeArgs),
    /// Reconstruct samples from an .mclc stream.
    Decode(DecodeArgs),
    /// Run a rate-distortion sweep and write CSV, SVG, and a comparison table.
    Sweep(SweepArgs),
    /// Compute reference rate-distortion curves as CSV.
    Rd(RdArgs),
    /// Describe an .mclc stream, optionally against the original samples.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Laplace,
    Gaussian,
    Ar1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    /// Little-endian float64, no header.
    Raw,
    /// One decimal value per line.
    Text,
}

impl From<FormatArg> for mclc::sources::SampleFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Raw => mclc::sources::SampleFormat::RawFloat64,
            FormatArg::Text => mclc::sources::SampleFormat::TextLines,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Fixed,
    Adaptive,
}

/// Source model flags shared by `generate` and `rd`.
#[derive(Clone, Debug, Args)]
pub struct SourceArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Laplace scale.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Gaussian mean.
    #[arg(long, default_value_t = 0.0)]
    pub mean: f64,
    /// Gaussian variance.
    #[arg(long, default_value_t = 1.0)]
    pub variance: f64,
    /// AR(1) coefficient.
    #[arg(long, default_value_t = 0.9)]
    pub rho: f64,
    /// AR(1) innovation variance.
    #[arg(long, default_value_t = 1.0)]
    pub innovation_variance: f64,
}

impl SourceArgs {
    pub fn kind(&self) -> mclc::sources::SourceKind {
        use mclc::sources::SourceKind;
        match self.kind {
            KindArg::Laplace => SourceKind::Laplace { scale: self.scale },
            KindArg::Gaussian => SourceKind::Gaussian {
                mean: self.mean,
                variance: self.variance,
            },
            KindArg::Ar1 => SourceKind::Ar1 {
                rho: self.rho,
                innovation_variance: self.innovation_variance,
            },
        }
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Raw)]
    pub format: FormatArg,
    #[arg(long)]
    pub out: PathBuf,
    /// key = value file of defaults for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct EncodeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Raw)]
    pub format: FormatArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = AlgoArg::Adaptive)]
    pub algo: AlgoArg,
    /// Symbol alphabet size for the adaptive encoder.
    #[arg(long, default_value_t = 9)]
    pub alphabet: u32,
    /// Rate-distortion slope, negative.
    #[arg(long)]
    pub beta: f64,
    /// Schedule constant in `s = c log2(t + offset)`.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Super-iterations.
    #[arg(long, default_value_t = 50)]
    pub r: usize,
    /// Context depth; defaults to the sweep rule for this length and alphabet.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = mclc::adaptive::DEFAULT_MU)]
    pub mu: f64,
    /// Charge the level descriptions inside the adaptive energy.
    #[arg(long)]
    pub alphabet_penalty: bool,
    #[arg(long, default_value_t = 0.0)]
    pub schedule_offset: f64,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct DecodeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Raw)]
    pub format: FormatArg,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct SweepArgs {
    /// fig1, fig2, or gaussian.
    #[arg(long)]
    pub preset: String,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub alphabets: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub c_ladder: Option<Vec<f64>>,
    #[arg(long)]
    pub schedule_offset: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub alphabet_penalty: bool,
    /// Directory for the CSV, SVG, table, and sidecar.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Record per-point wall time in the CSV (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,
    /// Skip the ECSQ and rate-distortion reference curves.
    #[arg(long)]
    pub no_references: bool,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "MCLC_JOBS")]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct RdArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Slopes for Blahut-Arimoto (Laplace only).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub betas: Option<Vec<f64>>,
    /// Grid size of the discretized Laplace density.
    #[arg(long, default_value_t = 241)]
    pub grid: usize,
    /// Duality-gap tolerance in bits.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Also compute the ECSQ curve of this sample file.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Raw)]
    pub format: FormatArg,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Original samples, to measure distortion.
    #[arg(long)]
    pub original: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Raw)]
    pub format: FormatArg,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parse `argv`, splicing in a config file if one is named.
fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let command = Cli::command();
    let argv = match splice_config(&command, &argv) {
        Ok(a) => a,
        Err(CliError::Usage(msg)) => {
            return Err(command.clone().error(clap::error::ErrorKind::InvalidValue, msg));
        }
        Err(CliError::Runtime(e)) => {
            return Err(command.clone().error(clap::error::ErrorKind::Io, e.to_string()));
        }
    };
    let matches = command.try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches)
}

fn splice_config(command: &clap::Command, argv: &[OsString]) -> Result<Vec<OsString>, CliError> {
    if argv.len() < 2 {
        return Ok(argv.to_vec());
    }
    let Some(path) = config::find_config(&argv[2..]) else {
        return Ok(argv.to_vec());
    };
    let name = argv[1].to_string_lossy();
    let Some(sub) = command.find_subcommand(name.as_ref()) else {
        return Ok(argv.to_vec());
    };
    let extra = config::config_args(sub, path.as_ref())?;
    let mut out = argv[..2].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let cli = match parse(argv.clone()) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            if code == 0 {
                let _ = e.print();
            } else {
                eprintln!("{e}");
                if matches!(e.kind(), ErrorKind::UnknownArgument | ErrorKind::InvalidSubcommand) {
                    let mut root = Cli::command();
                    let sub = argv.get(1).map(|a| a.to_string_lossy().into_owned());
                    let help = match sub.as_deref().and_then(|s| root.find_subcommand_mut(s)) {
                        Some(cmd) => cmd.render_help(),
                        None => root.render_help(),
                    };
                    eprintln!("{help}");
                }
            }
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
