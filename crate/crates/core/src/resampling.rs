//! Posterior expectations and equally weighted posterior samples from the
//! pooled, weighted samples of every level.
//!
//! Weights follow [`WeightScheme`]; the evidence and the prior density
//! cancel in every self-normalised use.

use rand::Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cs_mh::{propose, sigma_to_rho};
use crate::diagnostics::{log_weights, WeightScheme};
use crate::engine::SusRun;
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::BayesProblem;
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    pub log_lik: f64,
    pub level: usize,
    pub log_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPool {
    pub entries: Vec<PoolEntry>,
    pub log_weight_total: f64,
}

impl WeightedPool {
    pub fn from_entries(entries: Vec<PoolEntry>) -> Self {
        let lw: Vec<f64> = entries.iter().map(|e| e.log_weight).collect();
        Self { log_weight_total: log_sum_exp(&lw), entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Weights normalised to sum to one.
    pub fn normalized_weights(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| (e.log_weight - self.log_weight_total).exp())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.entries.first().map_or(0, |e| e.theta.len())
    }
}

/// Pool every sample of every level.
pub fn build_pool(run: &SusRun, problem: &BayesProblem, scheme: WeightScheme) -> WeightedPool {
    let entries = run
        .levels
        .iter()
        .flat_map(|level| level.samples.iter().map(move |s| (level.level_index, s)))
        .zip(log_weights(run, scheme))
        .map(|((level, s), log_weight)| PoolEntry {
            theta: problem.prior().to_physical(&s.u),
            u: s.u.clone(),
            log_lik: s.log_lik,
            level,
            log_weight,
        })
        .collect();
    WeightedPool::from_entries(entries)
}

/// Self-normalised estimate `Σ w g / Σ w`.
pub fn expectation(pool: &WeightedPool, g_values: &[f64]) -> Result<f64> {
    if g_values.len() != pool.len() {
        return Err(Error::Contract(format!(
            "{} function values for a pool of {} entries",
            g_values.len(),
            pool.len()
        )));
    }
    Ok(pool
        .normalized_weights()
        .iter()
        .zip(g_values)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, g)| w * g)
        .sum())
}

/// Posterior mean and variance of every coordinate of `θ`.
pub fn posterior_moments(pool: &WeightedPool) -> (Vec<f64>, Vec<f64>) {
    let w = pool.normalized_weights();
    let d = pool.dim();
    let mut mean = vec![0.0; d];
    for (e, wk) in pool.entries.iter().zip(&w) {
        for (m, t) in mean.iter_mut().zip(&e.theta) {
            *m += wk * t;
        }
    }
    let mut var = vec![0.0; d];
    for (e, wk) in pool.entries.iter().zip(&w) {
        for ((v, t), m) in var.iter_mut().zip(&e.theta).zip(&mean) {
            *v += wk * (t - m).powi(2);
        }
    }
    (mean, var)
}

/// Weighted `q`-quantile of coordinate `j`.
pub fn weighted_quantile(pool: &WeightedPool, j: usize, q: f64) -> f64 {
    let values: Vec<f64> = pool.entries.iter().map(|e| e.theta[j]).collect();
    weighted_quantile_of(&values, &pool.normalized_weights(), q)
}

/// Weighted `q`-quantile of `values` with normalised weights `w`: the
/// smallest value whose cumulative weight reaches `q`.
pub fn weighted_quantile_of(values: &[f64], w: &[f64], q: f64) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut acc = 0.0;
    for &k in &idx {
        acc += w[k];
        if acc >= q {
            return values[k];
        }
    }
    idx.last().map_or(f64::NAN, |&k| values[k])
}

/// Resampling scheme.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Independent draws with probability `w / Σw` (duplicates allowed).
    #[default]
    Multinomial,
    /// One uniform offset, `count` evenly spaced points on the weight CDF.
    Systematic,
}

/// Draw `count` pool indices with probabilities proportional to the weights.
pub fn resample_equal<R: Rng + ?Sized>(
    pool: &WeightedPool,
    count: usize,
    scheme: Scheme,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(Error::Config("resample count must be at least 1".into()));
    }
    if pool.log_weight_total == f64::NEG_INFINITY {
        return Err(Error::Domain("all pool weights are zero".into()));
    }
    let w = pool.normalized_weights();
    match scheme {
        Scheme::Multinomial => {
            let dist = WeightedAliasIndex::new(w).map_err(|e| Error::Domain(e.to_string()))?;
            Ok((0..count).map(|_| dist.sample(rng)).collect())
        }
        Scheme::Systematic => {
            let offset: f64 = rng.random();
            let mut out = Vec::with_capacity(count);
            let (mut k, mut cdf) = (0, w[0]);
            for m in 0..count {
                let target = (m as f64 + offset) / count as f64;
                while cdf < target && k + 1 < w.len() {
                    k += 1;
                    cdf += w[k];
                }
                out.push(k);
            }
            Ok(out)
        }
    }
}

/// Fraction of distinct indices among `indices`.
pub fn distinct_fraction(indices: &[usize]) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let mut v = indices.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len() as f64 / indices.len() as f64
}

/// A posterior state produced by rejuvenation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    pub log_lik: f64,
}

/// Advance each seed `steps` times with a posterior-invariant kernel: the
/// conditional-sampling proposal (which preserves the standard normal)
/// accepted with probability `min(1, L(v)/L(u))`. Every post-seed state is
/// emitted, seed-major. `sigma` is the proposal standard deviation per
/// coordinate, typically the last level's adapted value.
pub fn mcmc_rejuvenate(
    pool: &WeightedPool,
    seeds: &[usize],
    problem: &BayesProblem,
    sigma: &[f64],
    steps: usize,
    seed: u64,
) -> Result<Vec<PosteriorSample>> {
    if steps == 0 {
        return Ok(seeds
            .iter()
            .map(|&k| {
                let e = &pool.entries[k];
                PosteriorSample { u: e.u.clone(), theta: e.theta.clone(), log_lik: e.log_lik }
            })
            .collect());
    }
    let rho = sigma_to_rho(sigma);
    let chains: Vec<Vec<PosteriorSample>> = seeds
        .par_iter()
        .enumerate()
        .map(|(c, &k)| {
            let mut r: StreamRng = rng::stream(seed, u64::MAX - 1, c as u64);
            let e = &pool.entries[k];
            let (mut u, mut y) = (e.u.clone(), e.log_lik);
            let mut out = Vec::with_capacity(steps);
            for _ in 0..steps {
                let v = propose(&u, &rho, &mut r);
                let yv = problem.log_likelihood_in_u(&v)?;
                let a: f64 = r.random();
                if yv - y >= 0.0 || a.ln() < yv - y {
                    u = v;
                    y = yv;
                }
                out.push(PosteriorSample { theta: problem.prior().to_physical(&u), u: u.clone(), log_lik: y });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(chains.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PriorSpec;

    fn entry(log_lik: f64, level: usize, p_c: f64) -> PoolEntry {
        PoolEntry {
            u: vec![0.0],
            theta: vec![log_lik],
            log_lik,
            level,
            log_weight: level as f64 * p_c.ln() + log_lik,
        }
    }

    #[test]
    fn level_factor_in_weights() {
        let pool = WeightedPool::from_entries(vec![entry(0.5, 0, 0.1), entry(0.5, 1, 0.1)]);
        let w = pool.normalized_weights();
        assert!((w[0] / w[1] - 10.0).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expectation_examples() {
        let pool = WeightedPool::from_entries(vec![entry(1.0, 0, 0.1), entry(2.0, 0, 0.1), entry(0.0, 1, 0.1)]);
        assert!((expectation(&pool, &[1.0; 3]).unwrap() - 1.0).abs() < 1e-15);
        let flat = WeightedPool::from_entries((0..4).map(|_| entry(3.0, 0, 0.1)).collect());
        assert!((expectation(&flat, &[1.0, 2.0, 3.0, 6.0]).unwrap() - 3.0).abs() < 1e-12);
        assert!(expectation(&flat, &[1.0]).is_err());
    }

    #[test]
    fn degenerate_weights_resample_one_index() {
        let pool = WeightedPool::from_entries(vec![
            entry(0.0, 0, 0.1),
            entry(f64::NEG_INFINITY, 0, 0.1),
            entry(f64::NEG_INFINITY, 0, 0.1),
        ]);
        let mut r = rng::stream(1, 1, 1);
        for scheme in [Scheme::Multinomial, Scheme::Systematic] {
            let idx = resample_equal(&pool, 100, scheme, &mut r).unwrap();
            assert!(idx.iter().all(|&k| k == 0));
        }
    }

    #[test]
    fn zero_steps_returns_seeds() {
        let prior = PriorSpec::uniform_box(1, 0.0, 1.0).unwrap();
        let problem = BayesProblem::from_fn("c", prior, |_: &[f64]| 0.0);
        let pool = WeightedPool::from_entries(vec![entry(0.0, 0, 0.1), entry(0.0, 0, 0.1)]);
        let out = mcmc_rejuvenate(&pool, &[1, 0, 1], &problem, &[0.5], 0, 3).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].u, pool.entries[1].u);
    }

    #[test]
    fn distinct_fraction_examples() {
        assert_eq!(distinct_fraction(&[1, 1, 2, 3]), 0.75);
        assert_eq!(distinct_fraction(&[]), 0.0);
    }
}
