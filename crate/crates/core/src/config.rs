use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tuning parameters of one subset-simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Level probability `p_c`; `1 / p_c` and `n_samples * p_c` must be integers.
    pub p_c: f64,
    /// Samples per level `N`.
    pub n_samples: usize,
    /// Relative threshold-increment tolerance.
    pub eps1: f64,
    /// Tolerance on the last subarea's share of the evidence.
    pub eps2: f64,
    /// Maximum number of levels, level 0 included.
    pub max_levels: usize,
    pub seed: u64,
    /// Chains per adaptation batch as a fraction of the chain count.
    pub adapt_fraction: f64,
    /// Report the capped-off evidence above the final threshold.
    pub tail_report: bool,
    /// Carry the adapted scaling over to the next level instead of resetting it.
    pub lambda_warm_start: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p_c: 0.1,
            n_samples: 1000,
            eps1: 1e-5,
            eps2: 1e-3,
            max_levels: 50,
            seed: 0,
            adapt_fraction: 0.1,
            tail_report: true,
            lambda_warm_start: false,
        }
    }
}

pub const INITIAL_LAMBDA: f64 = 0.6;

fn as_integer(x: f64) -> Option<usize> {
    let r = x.round();
    ((x - r).abs() <= 1e-9 * x.abs().max(1.0) && r >= 1.0).then_some(r as usize)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_c > 0.0 && self.p_c < 1.0) {
            return Err(Error::Config(format!("p_c must lie in (0, 1), got {}", self.p_c)));
        }
        if as_integer(1.0 / self.p_c).is_none() {
            return Err(Error::Config(format!(
                "1/p_c must be a positive integer (chain length N_s), got 1/{} = {}",
                self.p_c,
                1.0 / self.p_c
            )));
        }
        if as_integer(self.n_samples as f64 * self.p_c).is_none() {
            return Err(Error::Config(format!(
                "N*p_c must be a positive integer (number of chains N_c), got {}*{} = {}",
                self.n_samples,
                self.p_c,
                self.n_samples as f64 * self.p_c
            )));
        }
        if !(self.eps1 > 0.0 && self.eps2 > 0.0) {
            return Err(Error::Config("eps1 and eps2 must be positive".into()));
        }
        if self.max_levels == 0 {
            return Err(Error::Config("max_levels must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.adapt_fraction) || self.adapt_fraction == 0.0 {
            return Err(Error::Config(format!(
                "adapt_fraction must lie in (0, 1], got {}",
                self.adapt_fraction
            )));
        }
        Ok(())
    }

    /// Number of chains `N_c = N * p_c`.
    pub fn n_chains(&self) -> usize {
        (self.n_samples as f64 * self.p_c).round() as usize
    }

    /// Chain length `N_s = 1 / p_c`.
    pub fn n_steps(&self) -> usize {
        (1.0 / self.p_c).round() as usize
    }

    /// Adaptation batch size `N_a`, clamped to `[1, N_c]`.
    pub fn batch_size(&self) -> usize {
        let n_c = self.n_chains();
        ((self.adapt_fraction * n_c as f64).round() as usize).clamp(1, n_c.max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.n_chains(), 100);
        assert_eq!(c.n_steps(), 10);
        assert_eq!(c.batch_size(), 10);
    }

    #[test]
    fn integrality_constraints() {
        let c = RunConfig { n_samples: 1005, ..Default::default() };
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("N*p_c"), "{msg}");

        let c = RunConfig { p_c: 0.3, ..Default::default() };
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("1/p_c"), "{msg}");

        let c = RunConfig { p_c: 0.2, n_samples: 500, ..Default::default() };
        c.validate().unwrap();
        assert_eq!((c.n_chains(), c.n_steps()), (100, 5));
    }

    #[test]
    fn batch_size_clamps() {
        let c = RunConfig { n_samples: 20, adapt_fraction: 0.1, ..Default::default() };
        assert_eq!(c.batch_size(), 1);
    }
}
