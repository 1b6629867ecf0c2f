//! Subset simulation for evidence estimation.
//!
//! The evidence `z = ∫ p_f(l) dl` is split into horizontal strips
//! `[l_i, l_{i+1}]` whose prior probabilities `p_i = p_c^i` are fixed in
//! advance while the log-likelihood thresholds `ℓ_i` are chosen adaptively.
//! Level 0 is direct Monte Carlo from the prior; every later level is
//! populated by parallel conditional-sampling chains seeded with the best
//! samples of the level below.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, INITIAL_LAMBDA};
use crate::cs_mh::{self, LevelPlan, Sample, Seed};
use crate::error::{Error, Result};
use crate::math::{log_expm1, log_mean_exp, log_sum_exp};
use crate::model::{BayesProblem, EvalCounter};
use crate::rng;

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Both the threshold-increment and the subarea-share tolerances were met.
    BothCriteria,
    /// The configured maximum number of levels was reached.
    LevelCap,
    /// No sample exceeded the next threshold: the likelihood is flat at its
    /// observed maximum and nothing is left above it.
    LikelihoodPlateau,
}

/// One completed level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level_index: usize,
    /// `ln p_i = i ln p_c`.
    pub log_p: f64,
    /// `ℓ_i`; `-inf` at level 0.
    pub log_ell: f64,
    /// `ℓ_{i+1}`, chosen from this level's samples.
    pub log_ell_next: f64,
    /// Chain-major layout; at level 0 every sample is its own chain.
    pub samples: Vec<Sample>,
    pub n_chains: usize,
    pub n_steps: usize,
    pub log_h_hat: f64,
    pub log_z_hat: f64,
    /// Fraction of samples with `ln L > ℓ_{i+1}`.
    pub p_c_hat: f64,
    pub acceptance_rate: Option<f64>,
    pub lambda_trace: Vec<f64>,
    pub acceptance_trace: Vec<f64>,
    /// Proposal standard deviation used by the last adaptation batch.
    pub proposal_sigma: Option<Vec<f64>>,
}

impl LevelRecord {
    pub fn log_f_values(&self) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| log_f(s.log_lik, self.log_ell, self.log_ell_next))
            .collect()
    }

    pub fn indicators(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.log_lik > self.log_ell_next).collect()
    }
}

/// Outcome of [`run`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SusRun {
    pub config: RunConfig,
    pub dim: usize,
    pub levels: Vec<LevelRecord>,
    pub log_evidence: f64,
    pub n_likelihood_calls: u64,
    pub terminated_by: Termination,
    /// Evidence above the final cap estimated from the last level; never
    /// added to `log_evidence`.
    pub tail_log_z: Option<f64>,
    pub warnings: Vec<String>,
}

impl SusRun {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn log_z_hats(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.log_z_hat).collect()
    }

    /// Points `(ℓ_i, ln p_i)` of the failure-probability function.
    pub fn fpf_points(&self) -> Vec<(f64, f64)> {
        self.levels.iter().map(|l| (l.log_ell_next, l.log_p + self.config.p_c.ln())).collect()
    }

    /// Proposal scale of the last MCMC level, if there was one.
    pub fn last_proposal_sigma(&self) -> Option<&[f64]> {
        self.levels.iter().rev().find_map(|l| l.proposal_sigma.as_deref())
    }
}

/// Midpoint between the `n_c`-th and `(n_c + 1)`-th largest values.
///
/// When the lower neighbour is `-inf` (zero likelihood) the threshold is
/// placed one unit below the upper neighbour instead.
pub fn select_threshold(log_liks_desc: &[f64], n_c: usize) -> Result<f64> {
    if n_c == 0 || log_liks_desc.len() < n_c + 1 {
        return Err(Error::Config(format!(
            "threshold selection needs at least n_c + 1 = {} values, got {}",
            n_c + 1,
            log_liks_desc.len()
        )));
    }
    let hi = log_liks_desc[n_c - 1];
    let lo = log_liks_desc[n_c];
    if hi == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if lo == f64::NEG_INFINITY {
        return Ok(hi - 1.0);
    }
    Ok(0.5 * (hi + lo))
}

/// `ln f_i` where `f_i = l_i * min(exp(ln L - ℓ_i) - 1, exp(ℓ_{i+1} - ℓ_i) - 1)`.
///
/// At level 0 (`ℓ_i = -inf`, `l_0 = 0`) this is `min(ln L, ℓ_{i+1})`.
pub fn log_f(log_lik: f64, ell_i: f64, ell_next: f64) -> Result<f64> {
    if ell_i == f64::NEG_INFINITY {
        return Ok(log_lik.min(ell_next));
    }
    if !(log_lik > ell_i) {
        return Err(Error::Contract(format!(
            "log-likelihood {log_lik} is not above the level threshold {ell_i}"
        )));
    }
    let capped = log_lik.min(ell_next);
    if capped <= ell_i {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(ell_i + log_expm1(capped - ell_i))
}

/// `(ln ĥ_i, ln ẑ_i)` with `ẑ_i = p_i * mean(f_i)`.
pub fn subarea_log(log_p: f64, log_liks: &[f64], ell_i: f64, ell_next: f64) -> Result<(f64, f64)> {
    let log_f: Vec<f64> = log_liks
        .iter()
        .map(|&y| log_f(y, ell_i, ell_next))
        .collect::<Result<_>>()?;
    let log_h = log_mean_exp(&log_f);
    Ok((log_h, log_p + log_h))
}

/// Relative threshold increment, guarded against a vanishing denominator.
pub fn relative_increment(ell_i: f64, ell_next: f64) -> f64 {
    if ell_i == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    (ell_next - ell_i).abs() / (ell_next + ell_i).abs().max(1e-300)
}

/// Both stopping rules: relative threshold increment `<= eps1` and the
/// newest subarea's share of the running evidence `<= eps2`.
pub fn check_convergence(ell_i: f64, ell_next: f64, log_z_list: &[f64], eps1: f64, eps2: f64) -> bool {
    let Some(&last) = log_z_list.last() else {
        return false;
    };
    let share = (last - log_sum_exp(log_z_list)).exp();
    relative_increment(ell_i, ell_next) <= eps1 && share <= eps2
}

fn sort_desc(samples: &[Sample]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.sort_by(|&a, &b| {
        let (sa, sb) = (&samples[a], &samples[b]);
        sb.log_lik
            .total_cmp(&sa.log_lik)
            .then(sa.chain.cmp(&sb.chain))
            .then(sa.step.cmp(&sb.step))
    });
    idx
}

struct LevelDraft {
    samples: Vec<Sample>,
    n_chains: usize,
    n_steps: usize,
    acceptance_rate: Option<f64>,
    lambda_trace: Vec<f64>,
    acceptance_trace: Vec<f64>,
    proposal_sigma: Option<Vec<f64>>,
}

fn close_level(
    draft: LevelDraft,
    level_index: usize,
    log_ell: f64,
    config: &RunConfig,
) -> Result<(LevelRecord, Vec<usize>)> {
    let order = sort_desc(&draft.samples);
    let sorted: Vec<f64> = order.iter().map(|&k| draft.samples[k].log_lik).collect();
    let n_c = config.n_chains();
    let log_ell_next = select_threshold(&sorted, n_c)?;
    if log_ell_next == f64::NEG_INFINITY {
        return Err(Error::Config(format!(
            "level {level_index}: fewer than N_c = {n_c} samples have non-zero likelihood; increase N"
        )));
    }
    let log_p = level_index as f64 * config.p_c.ln();
    let log_liks: Vec<f64> = draft.samples.iter().map(|s| s.log_lik).collect();
    let (log_h_hat, log_z_hat) = subarea_log(log_p, &log_liks, log_ell, log_ell_next)?;
    let above = log_liks.iter().filter(|&&y| y > log_ell_next).count();
    let record = LevelRecord {
        level_index,
        log_p,
        log_ell,
        log_ell_next,
        p_c_hat: above as f64 / log_liks.len() as f64,
        samples: draft.samples,
        n_chains: draft.n_chains,
        n_steps: draft.n_steps,
        log_h_hat,
        log_z_hat,
        acceptance_rate: draft.acceptance_rate,
        lambda_trace: draft.lambda_trace,
        acceptance_trace: draft.acceptance_trace,
        proposal_sigma: draft.proposal_sigma,
    };
    Ok((record, order))
}

/// Seeds for the next level: the `N_c` samples with the largest
/// log-likelihood. Ties at the cut leave fewer strict exceedances; those are
/// then reused cyclically so the chain count stays `N_c`.
fn collect_seeds(level: &LevelRecord, order: &[usize], n_c: usize) -> Vec<Seed> {
    let strict: Vec<&Sample> = order
        .iter()
        .map(|&k| &level.samples[k])
        .take(n_c)
        .filter(|s| s.log_lik > level.log_ell_next)
        .collect();
    (0..n_c)
        .map(|j| {
            let s = strict[j % strict.len()];
            Seed {
                u: s.u.clone(),
                log_lik: s.log_lik,
            }
        })
        .collect()
}

fn tail_log_z(level: &LevelRecord) -> Option<f64> {
    let excess: Vec<f64> = level
        .samples
        .iter()
        .map(|s| {
            if s.log_lik > level.log_ell_next {
                level.log_ell_next + log_expm1(s.log_lik - level.log_ell_next)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let v = level.log_p + log_mean_exp(&excess);
    v.is_finite().then_some(v)
}

/// Run subset simulation on `problem`.
pub fn run(problem: &BayesProblem, config: &RunConfig) -> Result<SusRun> {
    config.validate()?;
    let counter = EvalCounter::new();
    let score = |u: &[f64]| -> Result<f64> {
        counter.bump();
        problem.log_likelihood_in_u(u)
    };
    let d = problem.dim();
    let n = config.n_samples;
    let n_c = config.n_chains();
    let n_s = config.n_steps();

    let mut level_rng = rng::level_stream(config.seed, 0);
    let us: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| level_rng.sample(StandardNormal)).collect())
        .collect();
    let log_liks: Vec<f64> = us.par_iter().map(|u| score(u)).collect::<Result<_>>()?;
    if log_liks.iter().all(|&y| y == f64::NEG_INFINITY) {
        return Err(Error::Config(
            "every level-0 sample has zero likelihood; the threshold is undefined".into(),
        ));
    }
    let draft = LevelDraft {
        samples: us
            .into_iter()
            .zip(log_liks)
            .enumerate()
            .map(|(k, (u, log_lik))| Sample { u, log_lik, chain: k, step: 0 })
            .collect(),
        n_chains: n,
        n_steps: 1,
        acceptance_rate: None,
        lambda_trace: Vec::new(),
        acceptance_trace: Vec::new(),
        proposal_sigma: None,
    };

    let mut levels: Vec<LevelRecord> = Vec::new();
    let mut warnings = Vec::new();
    let mut lambda = INITIAL_LAMBDA;
    let (mut record, mut order) = close_level(draft, 0, f64::NEG_INFINITY, config)?;

    let terminated_by = loop {
        let ell_i = record.log_ell;
        let ell_next = record.log_ell_next;
        let plateau = record.p_c_hat == 0.0;
        let index = record.level_index;
        levels.push(record);
        let log_z: Vec<f64> = levels.iter().map(|l| l.log_z_hat).collect();

        if plateau {
            break Termination::LikelihoodPlateau;
        }
        if check_convergence(ell_i, ell_next, &log_z, config.eps1, config.eps2) {
            break Termination::BothCriteria;
        }
        if levels.len() >= config.max_levels {
            warnings.push(format!(
                "level cap of {} reached before convergence; the evidence may be truncated",
                config.max_levels
            ));
            break Termination::LevelCap;
        }

        let last = levels.last().expect("at least one level");
        let seeds = collect_seeds(last, &order, n_c);
        let plan = LevelPlan {
            threshold: ell_next,
            n_steps: n_s,
            batch_size: config.batch_size(),
            lambda: if config.lambda_warm_start { lambda } else { INITIAL_LAMBDA },
            seed: config.seed,
            level: index + 1,
        };
        let out = cs_mh::run_level(&seeds, plan, &score)?;
        lambda = out.adapt.lambda;
        let draft = LevelDraft {
            acceptance_rate: Some(out.acceptance_rate()),
            lambda_trace: out.adapt.lambda_history.clone(),
            acceptance_trace: out.adapt.acceptance_history.clone(),
            proposal_sigma: Some(out.final_sigma),
            samples: out.samples,
            n_chains: n_c,
            n_steps: n_s,
        };
        (record, order) = close_level(draft, index + 1, ell_next, config)?;
    };

    let log_evidence = log_sum_exp(&levels.iter().map(|l| l.log_z_hat).collect::<Vec<_>>());
    let tail = if config.tail_report {
        levels.last().and_then(tail_log_z)
    } else {
        None
    };
    Ok(SusRun {
        config: config.clone(),
        dim: d,
        levels,
        log_evidence,
        n_likelihood_calls: counter.get(),
        terminated_by,
        tail_log_z: tail,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PriorSpec;

    #[test]
    fn threshold_examples() {
        assert_eq!(select_threshold(&[5.0, 4.0, 3.0, 2.0, 1.0], 2).unwrap(), 3.5);
        assert_eq!(select_threshold(&[2.5; 6], 3).unwrap(), 2.5);
        assert!(select_threshold(&[1.0, 0.0], 2).is_err());
        assert_eq!(select_threshold(&[1.0, f64::NEG_INFINITY], 1).unwrap(), 0.0);
    }

    #[test]
    fn log_f_examples() {
        let ln2 = 2f64.ln();
        // Saturated cap: ln(l_{i+1} - l_i).
        let v = log_f(5.0, 0.0, ln2).unwrap();
        assert!((v - 0.0).abs() < 1e-15);
        // Level-0 branch.
        let v = log_f(1.5f64.ln(), f64::NEG_INFINITY, ln2).unwrap();
        assert!((v - 1.5f64.ln()).abs() < 1e-15);
        // exp(0) * min(1.5 - 1, 2 - 1) = 0.5.
        let v = log_f(1.5f64.ln(), 0.0, ln2).unwrap();
        assert!((v - 0.5f64.ln()).abs() < 1e-15);
        assert!(log_f(-1.0, 0.0, 1.0).is_err());
        assert!(log_f(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn log_f_is_accurate_for_tiny_gaps() {
        // l_i (exp(d) - 1) ≈ l_i d for a gap d of a few ulps around ℓ = 300.
        let y = 300.0 + 1e-12;
        let d = y - 300.0;
        let v = log_f(y, 300.0, 301.0).unwrap();
        assert!((v - (300.0 + d.ln())).abs() < 1e-9);
    }

    #[test]
    fn subarea_examples() {
        let ln2 = 2f64.ln();
        let (_, lz) = subarea_log(0.1f64.ln(), &[1.0, 2.0, 3.0], 0.0, ln2).unwrap();
        assert!((lz - 0.1f64.ln()).abs() < 1e-14);
        let (_, lz) = subarea_log(0.0, &[0.5f64.ln()], f64::NEG_INFINITY, 0.0).unwrap();
        assert!((lz - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn convergence_examples() {
        // Plateau with a negligible last subarea.
        assert!(check_convergence(2.0, 2.0, &[0.0, (1e-6f64).ln()], 1e-5, 1e-3));
        // Likelihood spike: big gap, tiny subarea.
        assert!(!check_convergence(1.0, 50.0, &[0.0, (1e-9f64).ln()], 1e-5, 1e-3));
        // Plateau scenario: tiny gap but half of the evidence in the last subarea.
        assert!(!check_convergence(2.0, 2.0 + 1e-9, &[0.0, 0.0], 1e-5, 1e-3));
        // Thresholds straddling zero stay well defined.
        assert!(!check_convergence(-1.0, 1.0, &[0.0, -50.0], 1e-5, 1e-3));
        assert!(!check_convergence(f64::NEG_INFINITY, 1.0, &[-50.0], 1e-5, 1e-3));
    }

    #[test]
    fn constant_likelihood_stops_after_level_zero() {
        let prior = PriorSpec::uniform_box(3, 0.0, 1.0).unwrap();
        let problem = BayesProblem::from_fn("const", prior, |_: &[f64]| 0.0);
        let run = run(&problem, &RunConfig { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(run.n_levels(), 1);
        assert_eq!(run.terminated_by, Termination::LikelihoodPlateau);
        assert!(run.log_evidence.abs() < 1e-3);
        assert_eq!(run.n_likelihood_calls, 1000);
        assert_eq!(run.tail_log_z, None);
    }

    #[test]
    fn zero_likelihood_everywhere_is_fatal() {
        let prior = PriorSpec::uniform_box(1, 0.0, 1.0).unwrap();
        let problem = BayesProblem::from_fn("zero", prior, |_: &[f64]| f64::NEG_INFINITY);
        assert!(matches!(run(&problem, &RunConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_config_rejected() {
        let prior = PriorSpec::uniform_box(1, 0.0, 1.0).unwrap();
        let problem = BayesProblem::from_fn("c", prior, |_: &[f64]| 0.0);
        let config = RunConfig { n_samples: 1001, ..Default::default() };
        assert!(matches!(run(&problem, &config), Err(Error::Config(_))));
    }

    #[test]
    fn level_cap_is_reported() {
        let prior = PriorSpec::uniform_box(2, -6.0, 6.0).unwrap();
        let problem = BayesProblem::from_fn("gauss", prior, |t: &[f64]| {
            -0.5 * (t[0] * t[0] + t[1] * t[1]) / 0.01
        });
        let config = RunConfig { max_levels: 2, seed: 1, ..Default::default() };
        let run = run(&problem, &config).unwrap();
        assert_eq!(run.n_levels(), 2);
        assert_eq!(run.terminated_by, Termination::LevelCap);
        assert_eq!(run.warnings.len(), 1);
        assert_eq!(run.n_likelihood_calls, 2000);
    }
}
