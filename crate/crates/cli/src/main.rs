use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod dataset;
mod pgm;

/// Projection-annotation tools: projections, visual hulls, label filtering,
/// rasterization, phantom synthesis, training and evaluation.
#[derive(Parser, Debug)]
#[command(name = "mipcarve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximum intensity projections of a scalar volume.
    Mip(MipArgs),
    /// Visual hull of two or three annotated projections.
    Hull(HullArgs),
    /// Relabel annotations unexplained by the visual hull as background.
    Filter(FilterArgs),
    /// Rasterize SWC centerlines into a ternary label volume.
    Rasterize(RasterizeArgs),
    /// Generate a synthetic phantom with its ground truth.
    Synth(SynthArgs),
    /// Train a segmentation network on a dataset directory.
    Train(TrainArgs),
    /// Precision/recall sweep of a trained network on one volume.
    Eval(EvalArgs),
    /// Cross-view inconsistency of an annotation set as a function of distance.
    Consistency(ConsistencyArgs),
}

#[derive(Args, Debug)]
struct MipArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// 0, 1, 2 or all
    #[arg(long, default_value = "all")]
    axis: String,
    /// Output prefix; writes <prefix>_mip<axis>.vsg
    #[arg(long)]
    out: String,
    /// Also write 8-bit PGM previews.
    #[arg(long)]
    preview: bool,
}

#[derive(Args, Debug)]
struct MipSetArgs {
    /// Axis-tagged label images (VSG1).
    #[arg(long, num_args = 1..=3, required = true)]
    mips: Vec<PathBuf>,
    /// Extent along the projection axis, needed with a single annotation.
    #[arg(long)]
    ray_len: Option<usize>,
}

#[derive(Args, Debug)]
struct HullArgs {
    #[command(flatten)]
    set: MipSetArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FilterArgs {
    #[command(flatten)]
    set: MipSetArgs,
    /// Writes <prefix>_mip<axis>.vsg per entry
    #[arg(long)]
    out_prefix: String,
}

#[derive(Args, Debug)]
struct RasterizeArgs {
    #[arg(long)]
    swc: PathBuf,
    #[arg(long, num_args = 3, required = true)]
    dims: Vec<usize>,
    /// Odd label width in voxels (foreground core plus ignore margin).
    #[arg(long, default_value_t = 5)]
    width: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write projection annotations as <prefix>_mip<axis>.vsg
    #[arg(long)]
    mips_prefix: Option<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// key=value phantom configuration; defaults apply without it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_prefix: String,
    /// Number of phantoms; with more than one, phantom i is written to
    /// <prefix>-<i> with seed rng_seed + i.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Also write dense labels and projection annotations.
    #[arg(long)]
    labels: bool,
    #[arg(long, default_value_t = 5)]
    width: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory of <name>_volume.vsg files with their annotations.
    #[arg(long)]
    data: PathBuf,
    /// 3d, mip:012, mip:01, mip:0, slices:<axis>:<count>, ...
    #[arg(long)]
    supervision: String,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 8)]
    base_channels: usize,
    #[arg(long, num_args = 3)]
    crop: Option<Vec<usize>>,
    /// mean (over labeled pixels) or sum
    #[arg(long, default_value = "mean")]
    normalization: String,
    /// Only single-threaded execution is implemented.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Print the running loss every N iterations (0 = quiet).
    #[arg(long, default_value_t = 0)]
    log_every: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 255)]
    thresholds: usize,
    /// Also write the probability volume.
    #[arg(long)]
    pred_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConsistencyArgs {
    #[command(flatten)]
    set: MipSetArgs,
    #[arg(long, default_value_t = 10)]
    dmax: u32,
    #[arg(long)]
    out: PathBuf,
}

/// A failure with its exit status: 2 usage, 3 data, 4 numeric.
#[derive(Debug)]
pub struct Failure {
    pub code: String,
    pub msg: String,
    pub exit: u8,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure { code: "usage".into(), msg: msg.into(), exit: 2 }
    }
}

impl From<mipcarve::Error> for Failure {
    fn from(e: mipcarve::Error) -> Self {
        let exit = if e.is_numeric() { 4 } else { 3 };
        Failure { code: e.code().into(), msg: e.to_string(), exit }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Mip(a) => commands::mip(a),
        Command::Hull(a) => commands::hull(a),
        Command::Filter(a) => commands::filter(a),
        Command::Rasterize(a) => commands::rasterize(a),
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Consistency(a) => commands::consistency(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}: {}", f.code, f.msg);
            ExitCode::from(f.exit)
        }
    }
}
