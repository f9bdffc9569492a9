//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sce_core::models::{Negatives, Variant};
use sce_core::solver::{ScoreMode, TransferCondition};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "sce",
    version,
    args_override_self = true,
    about = "Sequence-consistency tests solved by naive networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a corpus of tests (JSON manifests and PGM images).
    Gen(GenArgs),
    /// Evaluate one model over the condition grid.
    Solve(SolveArgs),
    /// Evaluate several models over the same grid and compare totals.
    Ablate(AblateArgs),
    /// Pretrain on single conditions and evaluate transfer to every condition.
    PretrainMatrix(PretrainArgs),
    /// Score video frames for anomalies.
    Anomaly(AnomalyArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
    /// Measure solving throughput.
    Bench(BenchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Solve(_) => "solve",
            Command::Ablate(_) => "ablate",
            Command::PretrainMatrix(_) => "pretrain-matrix",
            Command::Anomaly(_) => "anomaly",
            Command::Gradcheck(_) => "gradcheck",
            Command::Bench(_) => "bench",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Gen(a) => &a.common,
            Command::Solve(a) => &a.common,
            Command::Ablate(a) => &a.common,
            Command::PretrainMatrix(a) => &a.common,
            Command::Anomaly(a) => &a.common,
            Command::Gradcheck(a) => &a.common,
            Command::Bench(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Global seed.
    #[arg(long, env = "SCE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all logical cores).
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "sce-out")]
    pub out: PathBuf,
    /// Exit with status 1 when an acceptance threshold is missed.
    #[arg(long)]
    pub check: bool,
    /// `key = value` file of defaults; command-line flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Which conditions of the 64-condition grid to run.
#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// Predictive features (`all` or a list of size, shade/color, number, shape).
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub predictive: Vec<String>,
    /// Keep only these distractor counts (0-4).
    #[arg(long, value_delimiter = ',')]
    pub difficulty: Vec<usize>,
    /// Let monotonic rules run downwards as well as upwards.
    #[arg(long)]
    pub bidirectional: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// Denominator of the contrastive loss.
    #[arg(long, default_value = "all")]
    pub negatives: Negatives,
    /// How choices are scored after the step.
    #[arg(long, default_value = "full")]
    pub score: ScoreMode,
    /// Optimization steps per test (1 for naive solving).
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    /// Override the variant's learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Tests per condition.
    #[arg(long, default_value_t = 10)]
    pub tests: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Model variant.
    #[arg(long, default_value = "mcpc")]
    pub model: Variant,
    /// Tests per condition (default 100, or 500 with --paper-scale).
    #[arg(long)]
    pub tests: Option<usize>,
    /// Large runs: 500 tests per condition.
    #[arg(long)]
    pub paper_scale: bool,
    /// Fill the tests_per_sec column (makes the CSV run-dependent).
    #[arg(long)]
    pub timing: bool,
    /// Also write an SVG bar chart.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Model variants to compare.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "mcpc,mcpc-nonres,mcpc-nocontrast,rn,rn-deep,mcpc-d1,mcpc-d10,mcpc-d100"
    )]
    pub models: Vec<Variant>,
    /// Tests per condition (default 100, or 500 with --paper-scale).
    #[arg(long)]
    pub tests: Option<usize>,
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "mcpc")]
    pub model: Variant,
    /// Training conditions, e.g. size-easy,shape-hard (default: all eight).
    #[arg(long, value_delimiter = ',')]
    pub train: Vec<TransferCondition>,
    /// Test conditions (default: all eight).
    #[arg(long, value_delimiter = ',')]
    pub test: Vec<TransferCondition>,
    /// Pretraining episodes per training condition.
    #[arg(long, default_value_t = 1000)]
    pub episodes: usize,
    /// Tests per cell (default 100, or 500 with --paper-scale).
    #[arg(long)]
    pub tests: Option<usize>,
    /// Repetitions (default 3, or 10 with --paper-scale).
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub paper_scale: bool,
    /// Let monotonic rules run downwards as well as upwards.
    #[arg(long)]
    pub bidirectional: bool,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnomalyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory of PGM/PNG frames.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub frames: Option<PathBuf>,
    /// Regex whose first capture group is the frame index (default: file-name order).
    #[arg(long)]
    pub pattern: Option<String>,
    /// Score generated videos with a known rule break instead of frames.
    #[arg(long)]
    pub synthetic: bool,
    /// Synthetic videos to score.
    #[arg(long, default_value_t = 10)]
    pub videos: usize,
    /// Frames per synthetic video.
    #[arg(long, default_value_t = 200)]
    pub length: usize,
    /// Rows removed from the top of every frame.
    #[arg(long, default_value_t = 30)]
    pub crop_top: usize,
    /// Independent runs per frame.
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Gaussian smoothing width in frames.
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    /// Preceding frames the model is stepped on.
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value = "mcpc")]
    pub model: Variant,
    /// Frame index where motion starts; reports mean scores before and after.
    #[arg(long)]
    pub onset: Option<usize>,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Sampled coordinates per parameter tensor.
    #[arg(long, default_value_t = 6)]
    pub budget: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', default_value = "mcpc,lstm-cpc")]
    pub models: Vec<Variant>,
    /// Pre-generated tests per measurement.
    #[arg(long, default_value_t = 64)]
    pub tests: usize,
    /// Thread counts to measure.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub thread_counts: Vec<usize>,
}
