use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use susbayes::diagnostics::WeightScheme;
use susbayes::fe::SpectralScaling;
use susbayes::resampling::Scheme;

/// Environment variable naming the default parent directory for outputs.
pub const OUTPUT_DIR_ENV: &str = "SUSBAYES_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "susbayes", version, about = "Bayesian evidence and posterior sampling by subset simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One evidence run on a benchmark (subset simulation or fixed-c BUS).
    Run(RunArgs),
    /// Repeated independent runs with aggregate statistics.
    Study(StudyArgs),
    /// Finite-element model updating of the shear building.
    Femu(FemuArgs),
    /// Re-weight and resample the pooled samples of an earlier run.
    Resample(ResampleArgs),
}

/// Sampler settings shared by every subcommand; each overrides the file.
#[derive(Debug, Clone, Default, Args)]
pub struct SamplerArgs {
    /// TOML settings file; flags take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Level probability p_c.
    #[arg(long = "pc")]
    pub p_c: Option<f64>,
    /// Samples per level N.
    #[arg(long = "n")]
    pub n_samples: Option<usize>,
    /// Tolerance on the relative threshold increment.
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Tolerance on the last subarea's share of the evidence.
    #[arg(long)]
    pub eps2: Option<f64>,
    /// Maximum number of levels, level 0 included.
    #[arg(long)]
    pub max_levels: Option<usize>,
    /// Master RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Chains per adaptation batch as a fraction of the chain count.
    #[arg(long)]
    pub adapt_fraction: Option<f64>,
    /// Pooled posterior weights.
    #[arg(long, value_enum)]
    pub weights: Option<WeightArg>,
    /// Output directory [default: $SUSBAYES_OUTPUT_DIR/<name> or ./susbayes-output/<name>].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// eggbox, shells or norm_loggamma.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Parameter dimension [default: 2 for eggbox].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Run the fixed-c BUS baseline instead of evidence subset simulation.
    #[arg(long)]
    pub bus: bool,
    /// ln(1/c) for BUS [default: the benchmark's sup ln L].
    #[arg(long, allow_hyphen_values = true)]
    pub log_c_inv: Option<f64>,
    /// Equally weighted posterior samples to draw [default: round(N_ess)].
    #[arg(long)]
    pub resample_count: Option<usize>,
    /// Resampling scheme [default: multinomial].
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// eggbox, shells or norm_loggamma.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Parameter dimension [default: 2 for eggbox].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of independent runs R; run r uses seed + r.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Maximum worker threads [default: all cores].
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FemuArgs {
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Test case 1–6.
    #[arg(long)]
    pub case: Option<usize>,
    /// Directory holding dataset.json and psd.csv.
    #[arg(long, conflicts_with = "synthesize")]
    pub data: Option<PathBuf>,
    /// Generate synthetic data from the simulated damaged structure.
    #[arg(long)]
    pub synthesize: bool,
    /// Seed of the synthetic record [default: --seed].
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Averaging segments of the synthetic record.
    #[arg(long)]
    pub segments: Option<usize>,
    /// Spectral likelihood scaling [default: unscaled].
    #[arg(long, value_enum)]
    pub scaling: Option<ScalingArg>,
}

#[derive(Debug, Args)]
pub struct ResampleArgs {
    /// Output directory of an earlier `run`.
    #[arg(long)]
    pub input: PathBuf,
    /// Pooled posterior weights [default: mixture].
    #[arg(long, value_enum)]
    pub weights: Option<WeightArg>,
    /// Resampling scheme [default: multinomial].
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Samples to draw [default: round(Kish ESS of the weights)].
    #[arg(long)]
    pub count: Option<usize>,
    /// Resampling seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: <input>/resample-<weights>-seed<seed>].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightArg {
    Level,
    Mixture,
}

impl From<WeightArg> for WeightScheme {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Level => Self::Level,
            WeightArg::Mixture => Self::Mixture,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Multinomial,
    Systematic,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Multinomial => Self::Multinomial,
            SchemeArg::Systematic => Self::Systematic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    Unscaled,
    Wishart,
}

impl From<ScalingArg> for SpectralScaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::Unscaled => Self::Unscaled,
            ScalingArg::Wishart => Self::Wishart,
        }
    }
}
