//! Fixed-`c` BUS baseline.
//!
//! Bayesian updating is recast as a rare-event problem on the augmented
//! space `(θ, π)` with `π ~ U(0, 1)`: the "failure" event
//! `π < c L(θ)` has probability `p_f = c z`. Standard subset simulation then
//! estimates `p_f` and `ẑ = c⁻¹ p̂_f`. The extra coordinate is carried as one
//! more standard-normal variable, `π = Φ(u_{d+1})`.
//!
//! Thresholds act on the score `s = ln L(θ) - ln c⁻¹ - ln π`, which is
//! non-negative exactly on the failure domain.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, INITIAL_LAMBDA};
use crate::cs_mh::{self, LevelPlan, Sample, Seed};
use crate::diagnostics::indicator_stats;
use crate::engine::{select_threshold, Termination};
use crate::error::{Error, Result};
use crate::math::log_phi;
use crate::model::{BayesProblem, EvalCounter};
use crate::rng;

/// One BUS level; `samples[..].log_lik` holds the score `s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusLevel {
    pub level_index: usize,
    /// Threshold `b_{i+1}` on `s`; 0 at the final level.
    pub threshold: f64,
    pub p_c_hat: f64,
    pub samples: Vec<Sample>,
    pub n_chains: usize,
    pub n_steps: usize,
    pub acceptance_rate: Option<f64>,
}

impl BusLevel {
    pub fn indicators(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| if s.log_lik >= self.threshold { 1.0 } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusRun {
    pub config: RunConfig,
    pub log_c_inv: f64,
    pub levels: Vec<BusLevel>,
    pub log_pf: f64,
    pub log_evidence: f64,
    pub n_likelihood_calls: u64,
    pub terminated_by: Termination,
}

impl BusRun {
    /// Posterior pool: last-level samples inside the failure domain,
    /// returned as standard-normal `θ` coordinates (the `π` coordinate dropped).
    pub fn posterior_u(&self) -> Vec<Vec<f64>> {
        let last = self.levels.last().expect("a BUS run has at least one level");
        last.samples
            .iter()
            .filter(|s| s.log_lik >= 0.0)
            .map(|s| s.u[..s.u.len() - 1].to_vec())
            .collect()
    }
}

/// Run fixed-`c` BUS with `ln c⁻¹ = log_c_inv >= sup ln L`.
pub fn run_bus(problem: &BayesProblem, log_c_inv: f64, config: &RunConfig) -> Result<BusRun> {
    config.validate()?;
    if !log_c_inv.is_finite() {
        return Err(Error::Config(format!("ln(1/c) must be finite, got {log_c_inv}")));
    }
    let d = problem.dim();
    let counter = EvalCounter::new();
    let score = |u: &[f64]| -> Result<f64> {
        if u.len() != d + 1 {
            return Err(Error::Contract(format!("augmented state must have length {}", d + 1)));
        }
        counter.bump();
        let theta = problem.prior().to_physical(&u[..d]);
        let log_lik = problem.log_likelihood(&theta)?;
        if log_lik > log_c_inv {
            return Err(Error::BoundViolation { theta, log_lik, log_c_inv });
        }
        Ok(log_lik - log_c_inv - log_phi(u[d]))
    };

    let n = config.n_samples;
    let n_c = config.n_chains();
    let n_s = config.n_steps();
    let mut level_rng = rng::level_stream(config.seed, 0);
    let us: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..=d).map(|_| level_rng.sample(StandardNormal)).collect())
        .collect();
    let scores: Vec<f64> = us.par_iter().map(|u| score(u)).collect::<Result<_>>()?;
    let mut samples: Vec<Sample> = us
        .into_iter()
        .zip(scores)
        .enumerate()
        .map(|(k, (u, s))| Sample { u, log_lik: s, chain: k, step: 0 })
        .collect();
    let (mut chains, mut steps, mut acceptance) = (n, 1, None);

    let mut levels = Vec::new();
    let mut log_pf = 0.0;
    let terminated_by = loop {
        let index = levels.len();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&a, &b| {
            let (sa, sb): (&Sample, &Sample) = (&samples[a], &samples[b]);
            sb.log_lik.total_cmp(&sa.log_lik).then(sa.chain.cmp(&sb.chain)).then(sa.step.cmp(&sb.step))
        });
        let sorted: Vec<f64> = order.iter().map(|&k| samples[k].log_lik).collect();
        let b = select_threshold(&sorted, n_c)?;
        let is_final = b >= 0.0;
        let threshold = if is_final { 0.0 } else { b };
        let count = samples.iter().filter(|s| s.log_lik >= threshold).count();
        let p_c_hat = count as f64 / samples.len() as f64;
        log_pf += p_c_hat.ln();
        let seeds: Vec<Seed> = order
            .iter()
            .take(n_c)
            .map(|&k| Seed { u: samples[k].u.clone(), log_lik: samples[k].log_lik })
            .collect();
        levels.push(BusLevel {
            level_index: index,
            threshold,
            p_c_hat,
            samples: std::mem::take(&mut samples),
            n_chains: chains,
            n_steps: steps,
            acceptance_rate: acceptance,
        });
        if is_final {
            break Termination::BothCriteria;
        }
        if levels.len() >= config.max_levels {
            break Termination::LevelCap;
        }
        if seeds.iter().any(|s| !(s.log_lik > b)) {
            return Err(Error::DegenerateLevel {
                level: index,
                reason: "tied scores at the intermediate threshold".into(),
            });
        }
        let plan = LevelPlan {
            threshold: b,
            n_steps: n_s,
            batch_size: config.batch_size(),
            lambda: INITIAL_LAMBDA,
            seed: config.seed,
            level: index + 1,
        };
        let out = cs_mh::run_level(&seeds, plan, &score)?;
        acceptance = Some(out.acceptance_rate());
        samples = out.samples;
        chains = n_c;
        steps = n_s;
    };

    Ok(BusRun {
        config: config.clone(),
        log_c_inv,
        levels,
        log_evidence: log_c_inv + log_pf,
        log_pf,
        n_likelihood_calls: counter.get(),
        terminated_by,
    })
}

/// BUS performance metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusMetrics {
    /// Per-level c.o.v. of `p̂_c^{(i)}` with chain correlation.
    pub delta_p: Vec<f64>,
    /// `δ_z = √(Σ δ_p²)`; the uncertainty of `c⁻¹` is ignored.
    pub cov_z: f64,
    /// `N · VAR[Ž]/VAR[Ẑ]` evaluated on the last level.
    pub n_ess: f64,
}

pub fn bus_metrics(run: &BusRun) -> BusMetrics {
    let mut delta_p = Vec::with_capacity(run.levels.len());
    let mut last_ratio = 1.0;
    for level in &run.levels {
        let ind = level.indicators();
        let (p, var, _, gamma, _) = indicator_stats(&ind, level.n_chains, level.n_steps);
        let n = ind.len() as f64;
        let d = if p > 0.0 { (var / (n * p * p) * (1.0 + gamma)).sqrt() } else { f64::INFINITY };
        delta_p.push(d);
        last_ratio = if var > 0.0 { 1.0 / (1.0 + gamma) } else { 1.0 };
    }
    BusMetrics {
        cov_z: delta_p.iter().map(|d| d * d).sum::<f64>().sqrt(),
        n_ess: run.config.n_samples as f64 * last_ratio,
        delta_p,
    }
}
