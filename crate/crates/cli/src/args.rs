use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "flatmagic", version, about = "Flat magic-unitary experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Moments of the character laws of the fully split model over an abelian group.
    WeylMoments(WeylMomentsArgs),
    /// Flattening iteration from Haar-random starts.
    Sinkhorn(SinkhornArgs),
    /// Moments of the universal model against the Catalan numbers.
    Universal(UniversalArgs),
    /// Falsification harnesses.
    Conjectures(ConjecturesArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::WeylMoments(_) => "weyl-moments",
            Self::Sinkhorn(_) => "sinkhorn",
            Self::Universal(_) => "universal",
            Self::Conjectures(_) => "conjectures",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Self::WeylMoments(a) => &a.common,
            Self::Sinkhorn(a) => &a.common,
            Self::Universal(a) => &a.common,
            Self::Conjectures(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Master seed; sample k draws from its own stream (seed, k).
    #[arg(long)]
    pub seed: u64,
    /// Report file. Without it the report goes to stdout and the summary to stderr.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads (0 = all cores). Reports do not depend on it.
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    /// Diagonal Weyl form of the Gram matrix.
    Weyl,
    /// Normalized-trace moments of the random Gram matrix.
    Gram,
    /// Averaged transfer-matrix traces.
    Transfer,
    /// |Tr x|² for Haar x in U_n.
    Direct,
    /// All four.
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct WeylMomentsArgs {
    /// Abelian group: Z<n> factors joined by 'x', e.g. Z2, Z3, Z2xZ2.
    #[arg(long)]
    pub group: String,
    #[arg(long = "pmax", default_value_t = 4)]
    pub p_max: usize,
    /// Truncation order.
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, value_enum, default_value_t = Pipeline::Weyl)]
    pub pipeline: Pipeline,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trace {
    /// Per-run summaries only.
    Off,
    /// vol and F_2 at every iteration.
    Full,
    /// As full, plus F_3.
    F3,
}

#[derive(Debug, Args, Serialize)]
pub struct SinkhornArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    /// Column-defect tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long = "max-iters", default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = Trace::Full)]
    pub trace: Trace,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct UniversalArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: usize,
    #[arg(long = "pmax", default_value_t = 3)]
    pub p_max: usize,
    #[arg(long = "rmax", default_value_t = 6)]
    pub r_max: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    /// Tr(PR) + Tr(QS) >= Tr(P'Q') + Tr(R'S') on projection quadruples.
    #[value(name = "projection-inequality", alias = "66")]
    ProjectionInequality,
    /// F_p(x) >= F_p(Φ²(x)) on Haar tuples.
    #[value(name = "fp-monotone", alias = "65")]
    FpMonotone,
    /// vol never decreases along flattening.
    #[value(name = "volume-monotone", alias = "56")]
    VolumeMonotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// All constraints as stated.
    Literal,
    /// S = 0 with the orthogonality and intersection constraints only.
    SZeroRelaxed,
}

#[derive(Debug, Args, Serialize)]
pub struct ConjecturesArgs {
    #[arg(long, value_enum)]
    pub which: Which,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Quadruple mode (projection-inequality).
    #[arg(long, value_enum, default_value_t = Mode::SZeroRelaxed)]
    pub mode: Mode,
    /// Ambient dimension (projection-inequality).
    #[arg(long = "K", default_value_t = 6)]
    #[serde(rename = "K")]
    pub k: usize,
    /// Rank of P; defaults to max(1, K/3).
    #[arg(long = "rank-p")]
    pub rank_p: Option<usize>,
    /// Rank of Q; defaults to max(1, K/3).
    #[arg(long = "rank-q")]
    pub rank_q: Option<usize>,
    /// Rank of R in s-zero-relaxed mode; defaults to K - rank P.
    #[arg(long = "rank-r")]
    pub rank_r: Option<usize>,
    /// Literal mode with S = 0 (which forces P = 0).
    #[arg(long = "force-s-zero")]
    pub force_s_zero: bool,
    /// Grid size (fp-monotone, volume-monotone).
    #[arg(long = "N", default_value_t = 2)]
    #[serde(rename = "N")]
    pub n: usize,
    /// Moment order (fp-monotone).
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// Flattened samples on which F_p is also evaluated (fp-monotone).
    #[arg(long = "magic-points", default_value_t = 20)]
    pub magic_points: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}
