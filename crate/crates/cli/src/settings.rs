//! TOML settings file merged with command-line overrides.
//!
//! Precedence, lowest first: built-in defaults, the settings file, flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use susbayes::benchmarks::{Benchmark, BenchmarkSpec};
use susbayes::diagnostics::WeightScheme;
use susbayes::fe::SpectralScaling;
use susbayes::resampling::Scheme;
use susbayes::RunConfig;

use crate::args::SamplerArgs;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SettingsFile {
    pub run: RunOverrides,
    pub target: TargetSection,
    pub posterior: PosteriorSection,
    pub study: StudySection,
    pub femu: FemuSection,
}

/// Optional replacements for every [`RunConfig`] field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOverrides {
    pub p_c: Option<f64>,
    pub n_samples: Option<usize>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub max_levels: Option<usize>,
    pub seed: Option<u64>,
    pub adapt_fraction: Option<f64>,
    pub tail_report: Option<bool>,
    pub lambda_warm_start: Option<bool>,
}

impl RunOverrides {
    fn from_args(a: &SamplerArgs) -> Self {
        Self {
            p_c: a.p_c,
            n_samples: a.n_samples,
            eps1: a.eps1,
            eps2: a.eps2,
            max_levels: a.max_levels,
            seed: a.seed,
            adapt_fraction: a.adapt_fraction,
            tail_report: None,
            lambda_warm_start: None,
        }
    }

    /// `self` with every value set in `top` replaced.
    fn overlay(&self, top: &Self) -> Self {
        Self {
            p_c: top.p_c.or(self.p_c),
            n_samples: top.n_samples.or(self.n_samples),
            eps1: top.eps1.or(self.eps1),
            eps2: top.eps2.or(self.eps2),
            max_levels: top.max_levels.or(self.max_levels),
            seed: top.seed.or(self.seed),
            adapt_fraction: top.adapt_fraction.or(self.adapt_fraction),
            tail_report: top.tail_report.or(self.tail_report),
            lambda_warm_start: top.lambda_warm_start.or(self.lambda_warm_start),
        }
    }

    pub fn apply(&self, base: RunConfig) -> RunConfig {
        RunConfig {
            p_c: self.p_c.unwrap_or(base.p_c),
            n_samples: self.n_samples.unwrap_or(base.n_samples),
            eps1: self.eps1.unwrap_or(base.eps1),
            eps2: self.eps2.unwrap_or(base.eps2),
            max_levels: self.max_levels.unwrap_or(base.max_levels),
            seed: self.seed.unwrap_or(base.seed),
            adapt_fraction: self.adapt_fraction.unwrap_or(base.adapt_fraction),
            tail_report: self.tail_report.unwrap_or(base.tail_report),
            lambda_warm_start: self.lambda_warm_start.unwrap_or(base.lambda_warm_start),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    pub benchmark: Option<String>,
    pub dim: Option<usize>,
    pub bus: Option<bool>,
    pub log_c_inv: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosteriorSection {
    pub weights: Option<WeightScheme>,
    pub scheme: Option<Scheme>,
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub runs: Option<usize>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FemuSection {
    pub case: Option<usize>,
    pub data: Option<PathBuf>,
    pub data_seed: Option<u64>,
    pub segments: Option<usize>,
    pub scaling: Option<SpectralScaling>,
}

/// Parse a settings file; parse errors carry the file name and line.
pub fn load(path: &Path) -> CliResult<SettingsFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read settings file {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Settings file (if any) plus the shared flags.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub file: SettingsFile,
    pub run: RunOverrides,
    pub weights: WeightScheme,
    pub output: Option<PathBuf>,
}

impl Resolved {
    pub fn new(args: &SamplerArgs) -> CliResult<Self> {
        let file = match &args.config {
            Some(p) => load(p)?,
            None => SettingsFile::default(),
        };
        let run = file.run.overlay(&RunOverrides::from_args(args));
        let weights = args.weights.map(Into::into).or(file.posterior.weights).unwrap_or_default();
        Ok(Self { file, run, weights, output: args.output.clone() })
    }

    /// Validated run configuration on top of `base`.
    pub fn config(&self, base: RunConfig) -> CliResult<RunConfig> {
        let config = self.run.apply(base);
        config.validate()?;
        Ok(config)
    }

    pub fn benchmark(&self, name: Option<&str>, dim: Option<usize>) -> CliResult<BenchmarkSpec> {
        let name = name
            .map(str::to_owned)
            .or_else(|| self.file.target.benchmark.clone())
            .ok_or_else(|| CliError::Validation("no benchmark given (use --benchmark or [target] benchmark)".into()))?;
        let benchmark: Benchmark = name.parse()?;
        let dim = dim.or(self.file.target.dim).or((benchmark == Benchmark::Eggbox).then_some(2)).ok_or_else(|| {
            CliError::Validation(format!("no dimension given for {benchmark} (use --dim or [target] dim)"))
        })?;
        Ok(BenchmarkSpec::new(benchmark, dim)?)
    }
}
