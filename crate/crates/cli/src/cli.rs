//! Argument definitions.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Parser)]
#[command(
    name = "kldsel",
    version,
    about = "Bias-reduced kernel density estimation and Kullback-Leibler model selection",
    after_help = "Exit codes: 0 success, 1 usage error, 2 data/domain error, 3 numeric error.\n\
                  KLDSEL_THREADS caps worker parallelism (0 = auto)."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// RNG seed; every randomized quantity is a pure function of it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Omit timestamps from the manifest (byte-identical reruns).
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

/// Bandwidth policy argument: `mcv`, `cv`, or a positive number.
#[derive(Debug, Clone)]
pub enum BandwidthArg {
    Mcv,
    Cv,
    Fixed(f64),
}

impl BandwidthArg {
    pub fn describe(&self) -> String {
        match self {
            BandwidthArg::Mcv => "mcv".to_string(),
            BandwidthArg::Cv => "cv".to_string(),
            BandwidthArg::Fixed(h) => format!("fixed:{h}"),
        }
    }
}

impl FromStr for BandwidthArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mcv" => Ok(BandwidthArg::Mcv),
            "cv" => Ok(BandwidthArg::Cv),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|h| h.is_finite() && *h > 0.0)
                .map(BandwidthArg::Fixed)
                .ok_or_else(|| format!("expected `mcv`, `cv`, or a positive number, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Poisson,
    Geometric,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleEstimator {
    Bootstrap,
    Plugin,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RateKind {
    BiasReduced,
    Classical,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HistModels {
    Both,
    Poisson,
    Geometric,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the classical and bias-reduced estimators on a grid.
    Density {
        /// Input file: one observation per line, `#` comments allowed.
        #[arg(long)]
        input: PathBuf,
        /// Bandwidth policy: `mcv`, `cv`, or a fixed positive value.
        #[arg(long, default_value = "mcv")]
        bandwidth: BandwidthArg,
        /// Number of grid points.
        #[arg(long, default_value_t = 512)]
        grid: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Select a bandwidth by (modified) cross-validation.
    Bandwidth {
        #[arg(long)]
        input: PathBuf,
        /// Objective: `mcv` or `cv`.
        #[arg(long, default_value = "mcv")]
        objective: BandwidthArg,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Estimate the divergence between the data and a fitted model.
    Kld {
        #[arg(long)]
        input: PathBuf,
        /// Candidate family to fit by maximum likelihood.
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long, default_value = "mcv")]
        bandwidth: BandwidthArg,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Goodness-of-fit test of one candidate model.
    Gof {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long, default_value = "mcv")]
        bandwidth: BandwidthArg,
        /// Significance level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Bootstrap resamples for the scale estimate.
        #[arg(long, default_value_t = 500)]
        resamples: usize,
        /// Scale estimator (plug-in is a diagnostic cross-check).
        #[arg(long, value_enum, default_value_t = ScaleEstimator::Bootstrap)]
        scale: ScaleEstimator,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Model selection test: Poisson (model 1) against Geometric (model 2).
    Select {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "mcv")]
        bandwidth: BandwidthArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 500)]
        resamples: usize,
        #[arg(long, value_enum, default_value_t = ScaleEstimator::Bootstrap)]
        scale: ScaleEstimator,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo selection experiment over the Poisson/Geometric mixture.
    Simulate {
        /// Mixture weight of the Poisson component, in [0, 1].
        #[arg(long)]
        pi: f64,
        /// Sample size per replication.
        #[arg(long)]
        n: usize,
        /// Number of replications.
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Bandwidth policy per replication.
        #[arg(long, default_value = "mcv")]
        policy: BandwidthArg,
        #[arg(long, default_value_t = 500)]
        resamples: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Pointwise mean-squared-error decay-rate experiment.
    Rate {
        /// Comma-separated sample sizes (at least four distinct).
        #[arg(long, value_delimiter = ',', default_value = "200,400,800,1600,3200")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 400)]
        reps: usize,
        /// Evaluation point.
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        /// Which estimator(s) to measure.
        #[arg(long, value_enum, default_value_t = RateKind::Both)]
        kind: RateKind,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Histogram bin counts with fitted model pmf overlay columns.
    Hist {
        /// Input file of nonnegative integer observations.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Generate a mixture sample instead of reading one.
        #[arg(long)]
        pi: Option<f64>,
        /// Sample size when generating.
        #[arg(long, default_value_t = 90)]
        n: usize,
        /// Which pmf overlays to fit.
        #[arg(long, value_enum, default_value_t = HistModels::Both)]
        models: HistModels,
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl ScaleEstimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScaleEstimator::Bootstrap => "bootstrap",
            ScaleEstimator::Plugin => "plugin",
        }
    }
}

impl RateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RateKind::BiasReduced => "bias_reduced",
            RateKind::Classical => "classical",
            RateKind::Both => "both",
        }
    }
}

impl HistModels {
    pub fn as_str(&self) -> &'static str {
        match self {
            HistModels::Both => "both",
            HistModels::Poisson => "poisson",
            HistModels::Geometric => "geometric",
        }
    }
}
