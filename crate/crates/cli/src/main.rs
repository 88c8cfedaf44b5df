//! Command-line front end for block-loss concealment: loss-pattern
//! generation, single concealment runs (manifest- or flag-driven) with
//! trace/report emission, and FSE-vs-MuSE benchmark tables.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numeric failure.

use std::fmt;
use std::path::PathBuf;
use std::process;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand};

mod commands;
mod io;
mod manifest;

#[derive(Parser)]
#[command(
    name = "freqfill",
    version,
    about = "Block-loss concealment for grayscale images by frequency-selective extrapolation"
)]
struct Cli {
    /// Worker threads for per-block concealment (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a block-loss mask image (0 = lost, 255 = intact).
    Pattern(PatternArgs),
    /// Conceal the lost regions of an image.
    Conceal(ConcealArgs),
    /// Compare FSE and MuSE convergence over an image corpus.
    Bench(BenchArgs),
}

#[derive(Args)]
pub struct PatternArgs {
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    /// Side length of the square loss blocks.
    #[arg(long, default_value_t = 16)]
    pub block_size: usize,
    /// Stride between loss-block origins.
    #[arg(long, default_value_t = 64)]
    pub spacing: usize,
    /// Origin of the first block as ROW,COL.
    #[arg(long, value_parser = parse_offset, default_value = "24,24")]
    pub offset: (usize, usize),
    /// Permit blocks whose support frames touch other blocks.
    #[arg(long)]
    pub allow_contiguous: bool,
    /// Output mask path (.pgm or .png).
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ConcealArgs {
    /// JSON run manifest; any flags below override its fields.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Input image (.pgm/.png) or synthetic:NAME[@WxH].
    #[arg(long)]
    pub input: Option<String>,
    /// Uncorrupted image for PSNR reporting.
    #[arg(long)]
    pub reference: Option<String>,
    /// Mask image marking lost pixels (dark = lost); conceals tile-by-tile.
    #[arg(long, conflicts_with_all = ["block_size", "spacing", "offset"])]
    pub mask: Option<String>,
    /// Loss-pattern block size; conceals block-by-block.
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub spacing: Option<usize>,
    /// Pattern origin as ROW,COL.
    #[arg(long, value_parser = parse_offset)]
    pub offset: Option<(usize, usize)>,
    /// Tile size for mask-image runs.
    #[arg(long, conflicts_with_all = ["block_size", "spacing", "offset"])]
    pub tile: Option<usize>,
    /// fse or muse.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub iterations: Option<u32>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub rho_hat: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub n_bf: Option<usize>,
    /// Weight multiplier for reused concealed samples (mask runs).
    #[arg(long)]
    pub concealed_weight: Option<f64>,
    /// Base seed for synthetic inputs.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub allow_contiguous: bool,
    /// Concealed image path (.pgm or .png).
    #[arg(long)]
    pub out_image: Option<String>,
    /// Trace CSV path (default: output image path + .trace.csv).
    #[arg(long)]
    pub out_trace: Option<String>,
    /// Report path (default: output image path + .report.txt).
    #[arg(long)]
    pub out_report: Option<String>,
    /// Also write the effective manifest JSON here.
    #[arg(long)]
    pub emit_manifest: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["corpus", "synthetic"])))]
pub struct BenchArgs {
    /// Directory of corpus images (.pgm/.png), used as their own references.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Use the built-in four-image synthetic corpus.
    #[arg(long)]
    pub synthetic: bool,
    /// Base seed for the synthetic corpus.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for the bench table, curve files, and synthetic images.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Run the full (tau, n_bf) parameter family instead of one config.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 200)]
    pub iterations: u32,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub rho_hat: Option<f64>,
    /// MuSE selection threshold (ignored with --sweep).
    #[arg(long)]
    pub tau: Option<f64>,
    /// MuSE candidate cap (ignored with --sweep).
    #[arg(long)]
    pub n_bf: Option<usize>,
    /// Injected loss-block size.
    #[arg(long, default_value_t = 16)]
    pub block_size: usize,
    #[arg(long, default_value_t = 64)]
    pub spacing: usize,
    #[arg(long, value_parser = parse_offset, default_value = "24,24")]
    pub offset: (usize, usize),
}

fn parse_offset(s: &str) -> Result<(usize, usize), String> {
    let (row, col) = s.split_once(',').ok_or("expected ROW,COL")?;
    Ok((
        row.trim().parse().map_err(|e| format!("bad row: {e}"))?,
        col.trim().parse().map_err(|e| format!("bad column: {e}"))?,
    ))
}

// ===== Error classification =====

/// Marker for command-line misuse that clap cannot catch itself.
#[derive(Debug)]
pub struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn core_exit_code(err: &freqfill::Error) -> i32 {
    match err {
        freqfill::Error::InvalidParameter { .. } | freqfill::Error::NotIsolated(_) => 1,
        freqfill::Error::DimensionMismatch { .. } => 2,
        freqfill::Error::EmptySupport => 3,
        freqfill::Error::Block { source, .. } => core_exit_code(source),
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<freqfill::Error>() {
            return core_exit_code(e);
        }
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<image::ImageError>().is_some()
        {
            return 2;
        }
    }
    2
}

// ===== Entry point =====

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage_error("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    match &cli.command {
        Command::Pattern(args) => commands::cmd_pattern(args),
        Command::Conceal(args) => commands::cmd_conceal(args),
        Command::Bench(args) => commands::cmd_bench(args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        process::exit(exit_code(&err));
    }
}
