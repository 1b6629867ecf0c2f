//! Adaptive conditional-sampling Metropolis–Hastings.
//!
//! Generates correlated samples from the standard normal distribution
//! truncated to `{u : score(u) > threshold}`. The proposal
//! `v ~ N(rho * u, 1 - rho^2)` leaves the standard normal invariant, so the
//! acceptance test reduces to the threshold indicator.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Target acceptance rate of the scaling adaptation.
pub const TARGET_ACCEPTANCE: f64 = 0.44;

/// A state in standard-normal space with its score (log-likelihood for
/// the evidence sampler, limit-state value for the BUS baseline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub u: Vec<f64>,
    pub log_lik: f64,
    pub chain: usize,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptState {
    pub lambda: f64,
    pub sigma0: Vec<f64>,
    pub batch_size: usize,
    pub iter: usize,
    pub acceptance_history: Vec<f64>,
    pub lambda_history: Vec<f64>,
}

impl AdaptState {
    pub fn new(lambda: f64, sigma0: Vec<f64>, batch_size: usize) -> Self {
        Self {
            lambda,
            sigma0,
            batch_size: batch_size.max(1),
            iter: 0,
            acceptance_history: Vec::new(),
            lambda_history: Vec::new(),
        }
    }

    /// `min(lambda * sigma0, 1)` componentwise.
    pub fn sigma(&self) -> Vec<f64> {
        self.sigma0.iter().map(|s| (self.lambda * s).min(1.0)).collect()
    }

    pub fn rho(&self) -> Vec<f64> {
        sigma_to_rho(&self.sigma())
    }
}

pub fn sigma_to_rho(sigma: &[f64]) -> Vec<f64> {
    sigma.iter().map(|s| (1.0 - s * s).max(0.0).sqrt()).collect()
}

/// Componentwise sample standard deviation of the seeds; zero (or a single
/// seed) falls back to 1.
pub fn seed_std(seeds: &[&[f64]]) -> Vec<f64> {
    let n = seeds.len();
    let d = seeds.first().map_or(0, |s| s.len());
    (0..d)
        .map(|j| {
            if n < 2 {
                return 1.0;
            }
            let mean = seeds.iter().map(|s| s[j]).sum::<f64>() / n as f64;
            let var = seeds.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect()
}

/// Draw `v_j ~ N(rho_j u_j, 1 - rho_j^2)` independently per coordinate.
pub fn propose<R: Rng + ?Sized>(u: &[f64], rho: &[f64], rng: &mut R) -> Vec<f64> {
    u.iter()
        .zip(rho)
        .map(|(&uj, &r)| {
            let z: f64 = rng.sample(StandardNormal);
            r * uj + (1.0 - r * r).max(0.0).sqrt() * z
        })
        .collect()
}

/// `log lambda' = log lambda + (a_hat - 0.44) / sqrt(iter)`.
pub fn adapt_lambda(lambda: f64, a_hat: f64, iter: usize) -> f64 {
    (lambda.ln() + (a_hat - TARGET_ACCEPTANCE) / (iter.max(1) as f64).sqrt()).exp()
}

/// A chain starting point, already inside the target region.
#[derive(Debug, Clone)]
pub struct Seed {
    pub u: Vec<f64>,
    pub log_lik: f64,
}

#[derive(Debug, Clone)]
pub struct LevelOutput {
    /// Chain-major: chain `j`, step `t` (1-based) lives at `j * n_steps + t - 1`.
    pub samples: Vec<Sample>,
    pub adapt: AdaptState,
    pub accepted: usize,
    pub proposals: usize,
    /// Proposal standard deviation of the last batch.
    pub final_sigma: Vec<f64>,
}

impl LevelOutput {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// Parameters of one level's MCMC sweep.
#[derive(Debug, Clone, Copy)]
pub struct LevelPlan {
    pub threshold: f64,
    pub n_steps: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub seed: u64,
    pub level: usize,
}

/// Run one chain per seed for `n_steps` steps each, adapting the proposal
/// scale between batches of `batch_size` chains.
///
/// The seeds themselves are not emitted; the first stored state of each
/// chain is the outcome of its first proposal.
pub fn run_level<F>(seeds: &[Seed], plan: LevelPlan, score: &F) -> Result<LevelOutput>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if seeds.is_empty() {
        return Err(Error::Contract("run_level needs at least one seed".into()));
    }
    for (k, s) in seeds.iter().enumerate() {
        if !(s.log_lik > plan.threshold) {
            return Err(Error::Contract(format!(
                "seed {k} has score {} which does not exceed the threshold {}",
                s.log_lik, plan.threshold
            )));
        }
    }
    let n_c = seeds.len();
    let seed_refs: Vec<&[f64]> = seeds.iter().map(|s| s.u.as_slice()).collect();
    let sigma0 = seed_std(&seed_refs);

    let mut order: Vec<usize> = (0..n_c).collect();
    order.shuffle(&mut rng::level_stream(plan.seed, plan.level));

    let batch_size = plan.batch_size.clamp(1, n_c);
    let mut adapt = AdaptState::new(plan.lambda, sigma0, batch_size);
    let n_batches = (n_c / batch_size).max(1);

    let mut samples = Vec::with_capacity(n_c * plan.n_steps);
    let mut accepted_total = 0;
    let mut final_sigma = adapt.sigma();

    for b in 0..n_batches {
        let start = b * batch_size;
        // The last batch absorbs the remainder.
        let end = if b + 1 == n_batches { n_c } else { start + batch_size };
        let sigma = adapt.sigma();
        let rho = sigma_to_rho(&sigma);

        let chains: Vec<(Vec<Sample>, usize)> = (start..end)
            .into_par_iter()
            .map(|chain| {
                let seed = &seeds[order[chain]];
                let mut rng = rng::chain_stream(plan.seed, plan.level, chain);
                let mut u = seed.u.clone();
                let mut y = seed.log_lik;
                let mut out = Vec::with_capacity(plan.n_steps);
                let mut accepted = 0;
                for step in 1..=plan.n_steps {
                    let v = propose(&u, &rho, &mut rng);
                    let yv = score(&v)?;
                    if yv.is_nan() {
                        return Err(Error::Likelihood {
                            theta: v,
                            reason: "score is NaN".into(),
                        });
                    }
                    if yv > plan.threshold {
                        u = v;
                        y = yv;
                        accepted += 1;
                    }
                    out.push(Sample {
                        u: u.clone(),
                        log_lik: y,
                        chain,
                        step,
                    });
                }
                Ok((out, accepted))
            })
            .collect::<Result<_>>()?;

        let mut rate_sum = 0.0;
        for (out, accepted) in &chains {
            rate_sum += *accepted as f64 / plan.n_steps as f64;
            accepted_total += accepted;
            samples.extend_from_slice(out);
        }
        let a_hat = rate_sum / (end - start) as f64;
        adapt.iter += 1;
        adapt.acceptance_history.push(a_hat);
        adapt.lambda_history.push(adapt.lambda);
        final_sigma = sigma;
        adapt.lambda = adapt_lambda(adapt.lambda, a_hat, adapt.iter);
    }

    Ok(LevelOutput {
        samples,
        adapt,
        accepted: accepted_total,
        proposals: n_c * plan.n_steps,
        final_sigma,
    })
}
