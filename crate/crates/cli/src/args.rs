use clap::{Args, Parser, Subcommand, ValueEnum};
use scfde_core::oracles::TailMethod;
use scfde_core::EqualizerKind;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "scfde",
    version,
    about = "SC-FDE outage, error-rate and diversity experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Format of the emitted data files.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "SCFDE_WORKERS")]
    pub workers: Option<usize>,

    /// Omit run metadata (timestamps, timings) so repeated runs are byte-identical.
    #[arg(long, global = true)]
    pub deterministic: bool,

    /// Suppress the summary printed to stdout.
    #[arg(short, long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Outage probability curves, one per rate.
    Outage(SweepArgs),
    /// Symbol error rate curves with 2^R-PSK, one per rate.
    Ser(SweepArgs),
    /// Outage slope as a function of block length at fixed memory and rate.
    Blocklength(BlocklengthArgs),
    /// Zero-forcing outage curves over several channel memories.
    Zf(ZfArgs),
    /// Numerical checks of the tail-probability lemmas and DFT identities.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Analytic diversity order and rate intervals.
    Table(TableArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Channel memory ν (taps = ν+1).
    #[arg(long)]
    pub nu: usize,
    /// Block length L.
    #[arg(long)]
    pub block: usize,
    /// Comma-separated rates in bits per symbol.
    #[arg(long, value_delimiter = ',', required = true)]
    pub rates: Vec<f64>,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = Equalizer::Mmse)]
    pub equalizer: Equalizer,
    /// Fail (exit 1) if any fitted slope is further than this from the analytic order.
    #[arg(long)]
    pub check_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// SNR grid in dB as start:stop:step.
    #[arg(long, value_parser = parse_grid)]
    pub snr: Grid,
    /// Trials per SNR point (channel blocks); accepts forms like 1e6.
    #[arg(long, value_parser = parse_count, default_value = "1e5")]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BlocklengthArgs {
    #[arg(long)]
    pub nu: usize,
    #[arg(long)]
    pub rate: f64,
    /// Comma-separated block lengths.
    #[arg(long, value_delimiter = ',', required = true)]
    pub blocks: Vec<usize>,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = Equalizer::Mmse)]
    pub equalizer: Equalizer,
    #[arg(long)]
    pub check_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ZfArgs {
    /// Comma-separated channel memories.
    #[arg(long, value_delimiter = ',', required = true)]
    pub nu: Vec<usize>,
    #[arg(long)]
    pub block: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub rates: Vec<f64>,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub check_tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Tail of Σ 1/(1+SNR|λ|²) for n i.i.d. CN(0,1) variables.
    Lemma1(Lemma1Args),
    /// The same tail at two block lengths of one channel.
    Lemma2(Lemma2Args),
    /// Zero-padding subsampling and interpolation identities on random channels.
    Interp(InterpArgs),
    /// Pairwise eigenvalue correlation at L = ν+1.
    Remark1(Remark1Args),
}

#[derive(Debug, Args)]
pub struct Lemma1Args {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: f64,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = Method::Is)]
    pub method: Method,
    /// Allowed distance between fitted slope and ⌊m⌋+1.
    #[arg(long, default_value_t = 0.3)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct Lemma2Args {
    #[arg(long)]
    pub nu: usize,
    #[arg(long)]
    pub block: usize,
    #[arg(long)]
    pub other: usize,
    #[arg(long)]
    pub m: f64,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = Method::Is)]
    pub method: Method,
    /// Allowed slope difference between the two block lengths.
    #[arg(long, default_value_t = 0.3)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct InterpArgs {
    /// Largest channel memory drawn.
    #[arg(long, default_value_t = 4)]
    pub max_nu: usize,
    /// Largest base block length drawn.
    #[arg(long, default_value_t = 16)]
    pub max_block: usize,
    /// Largest zero-padding factor drawn.
    #[arg(long, default_value_t = 4)]
    pub max_factor: usize,
    #[arg(long, default_value_t = 100)]
    pub configs: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct Remark1Args {
    #[arg(long)]
    pub nu: usize,
    #[arg(long, value_parser = parse_count, default_value = "1e5")]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Largest acceptable |corr|; defaults to 3/√trials.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Comma-separated channel memories.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub nu: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "4,8,10,16")]
    pub blocks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Equalizer {
    Mmse,
    Zf,
}

impl From<Equalizer> for EqualizerKind {
    fn from(e: Equalizer) -> Self {
        match e {
            Equalizer::Mmse => EqualizerKind::Mmse,
            Equalizer::Zf => EqualizerKind::Zf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Is,
    Plain,
}

impl From<Method> for TailMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Is => TailMethod::ImportanceSampled,
            Method::Plain => TailMethod::Plain,
        }
    }
}

/// Inclusive SNR grid in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(format!("expected start:stop:step, got {s:?}"));
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err("grid values must be finite".into());
    }
    if step <= 0.0 {
        return Err("grid step must be positive".into());
    }
    if stop < start {
        return Err("grid stop must not be below start".into());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // build from integer multiples so 15:35:5 gives exactly 15, 20, …, 35
    Ok(Grid((0..=n).map(|i| start + step * i as f64).collect()))
}

/// Positive integer count; scientific notation allowed when it is exact.
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return if v > 0 {
            Ok(v)
        } else {
            Err("count must be positive".into())
        };
    }
    let v: f64 = s.parse().map_err(|_| format!("not a count: {s:?}"))?;
    if v.fract() != 0.0 || !(1.0..=9.0e15).contains(&v) {
        return Err(format!("not a positive integer count: {s:?}"));
    }
    Ok(v as u64)
}
