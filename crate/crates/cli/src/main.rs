//! `voxseg`: command-line pipelines over volume files.
//!
//! Each subcommand is a pure function of its inputs and flags: given
//! identical input files it writes bit-identical outputs, regardless of
//! thread count. Alongside its outputs every run leaves a manifest
//! recording parameters, input hashes, and outcome — also on failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use voxseg::volume::{Axis, Connectivity};

/// Environment variable holding the worker thread count (default: one
/// thread per core).
pub const THREADS_ENV: &str = "VOXSEG_THREADS";

#[derive(Parser)]
#[command(
    name = "voxseg",
    version,
    about = "Instance-segmentation toolkit for large CT volumes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic scene: intensity + reference label volumes,
    /// optionally per-axis 2D instance stacks and a three-class volume
    Phantom(PhantomArgs),
    /// Fuse per-axis 2D instance stacks into a 3D instance volume
    Fuse(FuseArgs),
    /// Segment a background/object/border classes volume into instances
    Watershed(WatershedArgs),
    /// Score a proposed segmentation against a reference
    Evaluate(EvaluateArgs),
    /// Total-variation denoising of a scalar volume
    Denoise(DenoiseArgs),
    /// Per-segment voxel counts, bounding boxes, and a volume summary
    Stats(StatsArgs),
}

#[derive(Args)]
pub struct PhantomArgs {
    /// Scene description (JSON)
    pub spec: PathBuf,
    /// Directory for the `intensity` and `labels` volumes
    pub out_dir: PathBuf,
    /// Also write per-axis 2D instance slice stacks to this directory
    #[arg(long)]
    pub stack: Option<PathBuf>,
    /// Probability of splitting each 2D instance of the emitted stack
    #[arg(long, default_value_t = 0.0, requires = "stack")]
    pub split_rate: f64,
    /// Probability of dropping each 2D instance of the emitted stack
    #[arg(long, default_value_t = 0.0, requires = "stack")]
    pub drop_rate: f64,
    /// Seed of the stack corruption draws
    #[arg(long, default_value_t = 0, requires = "stack")]
    pub corrupt_seed: u64,
    /// Also write the background/object/border volume to this path
    #[arg(long)]
    pub three_class: Option<PathBuf>,
    /// Erosion depth separating object core from border
    #[arg(long, default_value_t = 1, requires = "three_class")]
    pub border_thickness: usize,
}

#[derive(Args)]
pub struct FuseArgs {
    /// Directory holding `stack.json` plus per-axis slice volumes
    pub stack_dir: PathBuf,
    /// Output label volume (bare stem or `.vol.json` path)
    pub out: PathBuf,
    /// Minimum line-overlap ratio for two 2D instances to match
    #[arg(long, default_value_t = 0.5)]
    pub line_overlap_threshold: f64,
    /// Minimum overlap ratio for re-inserting an unmatched 2D instance
    #[arg(long, default_value_t = 0.5)]
    pub reinsert_overlap_threshold: f64,
    /// Axis whose slices seed the propagation
    #[arg(long, default_value = "Z")]
    pub start_axis: Axis,
    /// Slice index on the start axis to seed from (default: middle)
    #[arg(long)]
    pub start_index: Option<usize>,
    /// Morphological closing steps applied between fusion and re-insertion
    #[arg(long, default_value_t = 1)]
    pub closing_iterations: usize,
}

#[derive(Args)]
pub struct WatershedArgs {
    /// Three-class volume (labels 0 = background, 1 = object, 2 = border)
    pub classes: PathBuf,
    /// Output label volume (bare stem or `.vol.json` path)
    pub out: PathBuf,
    /// Drop marker components smaller than this voxel count
    #[arg(long, default_value_t = 0)]
    pub min_marker_size: usize,
    /// Neighbourhood for markers and flooding (6 or 26)
    #[arg(long, default_value = "6")]
    pub connectivity: Connectivity,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Reference label volume
    pub reference: PathBuf,
    /// Proposed label volume
    pub proposal: PathBuf,
    /// Directory for `matrix.csv`, `heatmap.pgm`, and `stats.json`
    pub out_dir: PathBuf,
    /// Exclude segments smaller than this voxel count from both sides
    #[arg(long, default_value_t = 100)]
    pub min_voxels: usize,
    /// Relabel the proposal by connected components before scoring
    #[arg(long)]
    pub cc_postprocess: bool,
    /// Neighbourhood of the connected-component relabeling (6 or 26)
    #[arg(long, default_value = "26")]
    pub connectivity: Connectivity,
}

#[derive(Args)]
pub struct DenoiseArgs {
    /// Input scalar volume
    pub input: PathBuf,
    /// Output scalar volume (bare stem or `.vol.json` path)
    pub out: PathBuf,
    /// Smoothing weight of the total-variation term
    #[arg(long, default_value_t = 0.1)]
    pub weight: f64,
    /// Maximum accepted dual-projection steps
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    /// Stop once the relative objective decrease falls this low
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Args)]
pub struct StatsArgs {
    /// Label volume to summarize
    pub volume: PathBuf,
    /// Output report (JSON)
    pub out: PathBuf,
}

fn configure_thread_pool() -> Result<(), String> {
    let raw = match std::env::var(THREADS_ENV) {
        Ok(v) => v,
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(e) => return Err(format!("{THREADS_ENV}: {e}")),
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(message) = configure_thread_pool() {
        eprintln!("error: {message}");
        return ExitCode::FAILURE;
    }
    commands::execute(&cli.command)
}
