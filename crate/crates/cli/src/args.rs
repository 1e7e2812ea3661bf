use std::path::PathBuf;

use anyhow::{bail, Result};
use bitplanes::{AlignConfig, ComparisonOp, PixelRegion, Representation, Variant, WarpModel};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bitplanes",
    version,
    about = "Dense template alignment and tracking on binary descriptor channels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track a template through an image sequence.
    Track(TrackArgs),
    /// Align one image pair and print the result as JSON.
    Align(AlignArgs),
    /// Run one of the synthetic experiments.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RepKind {
    Raw,
    Bitplanes,
    Lbp,
}

/// Solver settings shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Lucas-Kanade update rule.
    #[arg(long, default_value = "ic", value_parser = parse_variant)]
    pub variant: Variant,
    /// Warp model.
    #[arg(long, default_value = "homography", value_parser = parse_model)]
    pub model: WarpModel,
    /// Image representation.
    #[arg(long, value_enum, default_value = "bitplanes")]
    pub rep: RepKind,
    /// Comparison operator of the descriptor.
    #[arg(long, default_value = "gt", value_parser = parse_op)]
    pub op: ComparisonOp,
    /// Box-filter size applied to every descriptor channel (0 or 1 disables).
    #[arg(long, default_value_t = 0)]
    pub smooth: usize,
    /// Pyramid levels.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Maximum Gauss-Newton iterations per level.
    #[arg(long = "max-iters", default_value_t = 100)]
    pub max_iters: usize,
    /// Stop when the largest parameter update falls below this.
    #[arg(long = "param-tol", default_value_t = 1e-6)]
    pub param_tol: f64,
    /// Stop when the relative cost reduction falls below this.
    #[arg(long = "cost-tol", default_value_t = 1e-5)]
    pub cost_tol: f64,
    /// Warp precomputed descriptor channels instead of recomputing the
    /// descriptor on the warped image.
    #[arg(long = "warp-channels")]
    pub warp_channels: bool,
}

impl SolverArgs {
    pub fn representation(&self) -> Representation {
        match self.rep {
            RepKind::Raw => Representation::Raw,
            RepKind::Bitplanes => Representation::BitPlanes {
                op: self.op,
                smoothing: self.smooth,
            },
            RepKind::Lbp => Representation::Lbp { op: self.op },
        }
    }

    pub fn config(&self) -> Result<AlignConfig> {
        if self.smooth > 1 && self.rep != RepKind::Bitplanes {
            bail!("--smooth only applies to --rep bitplanes");
        }
        if self.smooth > 1 && self.smooth % 2 == 0 {
            bail!("--smooth must be odd, got {}", self.smooth);
        }
        let cfg = AlignConfig {
            variant: self.variant,
            model: self.model,
            representation: self.representation(),
            pyramid_levels: self.levels,
            max_iterations: self.max_iters,
            param_tol: self.param_tol,
            cost_tol: self.cost_tol,
            recompute_descriptors: !self.warp_channels,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Frame directory (sorted by name) or printf-style pattern such as
    /// `frames/frame_%04d.pgm`.
    pub input: String,
    /// Template rectangle in the first frame, `x,y,w,h`. Defaults to the
    /// region stored in `meta.json` next to the frames.
    #[arg(long, value_parser = parse_rect)]
    pub rect: Option<PixelRegion>,
    /// Ground-truth warps, one per frame (JSON lines or a JSON array).
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Write frames with the tracked quadrilateral drawn in.
    #[arg(long)]
    pub overlay: bool,
    /// Add per-frame milliseconds to the CSV (makes it non-reproducible).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    pub template: PathBuf,
    pub moving: PathBuf,
    #[arg(long, value_parser = parse_rect)]
    pub rect: PixelRegion,
    /// Initial warp as a JSON file (identity when omitted).
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    CostSurface,
    Snr,
    LbpBias,
    Precompute,
    SyntheticBench,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub kind: ExperimentKind,
    /// Directory of input images (PGM or PNG).
    #[arg(long, default_value = "data/images")]
    pub images: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trials (lbp-bias, precompute) or sequences (synthetic-bench).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads for trial-level parallelism.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Patch side for cost-surface and snr.
    #[arg(long, default_value_t = 64)]
    pub patch: usize,
    /// Largest shift in pixels for cost-surface and snr.
    #[arg(long, default_value_t = 2.0)]
    pub range: f64,
    /// Shift spacing in pixels for cost-surface and snr.
    #[arg(long, default_value_t = 0.25)]
    pub step: f64,
    /// Frames per synthetic sequence.
    #[arg(long, default_value_t = 50)]
    pub frames: usize,
    /// Template rectangle for synthetic-bench (centred 100x100 by default).
    #[arg(long, value_parser = parse_rect)]
    pub rect: Option<PixelRegion>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

fn parse_rect(s: &str) -> Result<PixelRegion, String> {
    s.parse().map_err(|e: bitplanes::Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: bitplanes::Error| e.to_string())
}

fn parse_model(s: &str) -> Result<WarpModel, String> {
    s.parse().map_err(|e: bitplanes::Error| e.to_string())
}

fn parse_op(s: &str) -> Result<ComparisonOp, String> {
    s.parse().map_err(|e: bitplanes::Error| e.to_string())
}
