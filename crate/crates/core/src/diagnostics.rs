//! Single-run uncertainty quantification: coefficient of variation of the
//! evidence estimator and effective sample size of the weighted pool.
//!
//! Every level's subarea estimate is `ẑ_i = p̂_c^{(0)} ⋯ p̂_c^{(i-1)} ĥ_i`.
//! Within-chain autocorrelation inflates the variance of both `ĥ_i` and
//! `p̂_c^{(i)}`; the inflation is modelled by exponentially decaying
//! correlation through [`g_factor`].
//!
//! All variances are stored relative to the squared estimate (c.o.v.²) or
//! in log form, so that evidences of `e^{±700}` never overflow.

use serde::{Deserialize, Serialize};

use crate::engine::{LevelRecord, SusRun};
use crate::error::{Error, Result};
use crate::math::log_sum_exp;

/// Correlation-factor function
/// `g(ρ) = 2ρ{1 - ρ - (1 - ρ^{N_s})/N_s}/(1 - ρ)²`, i.e.
/// `2 Σ_{t=1}^{N_s-1} (1 - t/N_s) ρ^t`.
pub fn g_factor(rho: f64, n_s: usize) -> f64 {
    let n = n_s as f64;
    if n_s <= 1 || rho == 0.0 {
        return 0.0;
    }
    if rho >= 1.0 {
        return n - 1.0;
    }
    // The closed form cancels catastrophically near ρ = 1; the finite series
    // is exact there and cheap for realistic chain lengths.
    if 1.0 - rho < 1e-3 {
        return g_series(rho, n_s);
    }
    2.0 * rho * (1.0 - rho - (1.0 - rho.powi(n_s as i32)) / n) / (1.0 - rho).powi(2)
}

/// Direct series definition of [`g_factor`].
pub fn g_series(rho: f64, n_s: usize) -> f64 {
    let n = n_s as f64;
    (1..n_s)
        .map(|t| (1.0 - t as f64 / n) * rho.powi(t as i32))
        .sum::<f64>()
        * 2.0
}

/// Per-level ingredients of the variance estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    /// `ln ĥ_i`.
    pub log_h_hat: f64,
    pub p_c_hat: f64,
    /// `ln var[f_i]` (population variance over the level's samples).
    pub log_var_f: f64,
    /// `var[1_i] = p̂ (1 - p̂)`.
    pub var_ind: f64,
    pub rho_f1: f64,
    pub rho_f1_lag: f64,
    pub rho_h_lag1: f64,
    pub rho_p_lag1: f64,
    pub gamma_h: f64,
    pub gamma_p: f64,
    pub gamma_hp: f64,
    pub delta_h: f64,
    pub delta_p: f64,
    pub rho_hp: f64,
    /// Number of correlation estimates that were negative and clamped to 0.
    pub clamped: usize,
}

impl LevelStats {
    /// The same level with all correlation factors switched off.
    pub fn independent(&self) -> Self {
        let mut s = self.clone();
        s.gamma_h = 0.0;
        s.gamma_p = 0.0;
        s.gamma_hp = 0.0;
        s.delta_h = self.delta_h / (1.0 + self.gamma_h).sqrt();
        s.delta_p = self.delta_p / (1.0 + self.gamma_p).sqrt();
        s.rho_hp = self.rho_f1.clamp(-1.0, 1.0);
        s
    }
}

/// Chain-major series `x[j * n_s + t]` with its cross-sectional structure.
struct Chains<'a> {
    x: &'a [f64],
    n_c: usize,
    n_s: usize,
}

impl Chains<'_> {
    fn at(&self, j: usize, t: usize) -> f64 {
        self.x[j * self.n_s + t]
    }

    /// `(1/N_c) Σ_j a(j, t) b(j, t + lag)`, averaged with the symmetric
    /// counterpart when `sym` is set.
    fn cross_moment(&self, other: &Chains<'_>, t: usize, lag: usize, sym: bool) -> f64 {
        let n_c = self.n_c as f64;
        let fwd: f64 = (0..self.n_c).map(|j| self.at(j, t) * other.at(j, t + lag)).sum::<f64>() / n_c;
        if !sym {
            return fwd;
        }
        let bwd: f64 = (0..self.n_c).map(|j| self.at(j, t + lag) * other.at(j, t)).sum::<f64>() / n_c;
        0.5 * (fwd + bwd)
    }

    fn second_moment(&self, t: usize) -> f64 {
        self.cross_moment(self, t, 0, false)
    }
}

/// Time steps averaged by the lag-1 estimators: `t = 1 … N_s - 1`, or the
/// single cross-section when chains have length 1.
fn steps(n_s: usize) -> std::ops::Range<usize> {
    if n_s > 1 {
        0..n_s - 1
    } else {
        0..1
    }
}

/// Average of the finite ratios; `None` when no step had spread.
fn mean_finite(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values.flatten() {
        if v.is_finite() {
            sum += v;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 1e-14).then(|| num / den)
}

/// Lag-1 autocorrelation of a chain-major series with mean `mean`.
fn lag1_autocorrelation(c: &Chains<'_>, mean: f64) -> Option<f64> {
    if c.n_s < 2 {
        return Some(0.0);
    }
    mean_finite(steps(c.n_s).map(|t| {
        ratio(c.cross_moment(c, t, 1, false) - mean * mean, c.second_moment(t) - mean * mean)
    }))
}

fn cross_correlation(f: &Chains<'_>, h: f64, ind: &Chains<'_>, p: f64, lag: usize) -> Option<f64> {
    mean_finite(steps(f.n_s).map(|t| {
        let sf = f.second_moment(t) - h * h;
        let si = ind.second_moment(t) - p * p;
        if !(sf > 1e-14 && si > 1e-14) {
            return None;
        }
        Some((f.cross_moment(ind, t, lag, lag > 0) - h * p) / (sf.sqrt() * si.sqrt()))
    }))
}

/// Clamp a correlation estimate to `[0, 1]`, counting negative values.
fn clamp_rho(rho: Option<f64>, clamped: &mut usize) -> f64 {
    match rho {
        Some(r) if r < 0.0 => {
            *clamped += 1;
            0.0
        }
        Some(r) => r.min(1.0),
        None => 0.0,
    }
}

/// Statistics of an indicator series on a chain layout: `(p̂, var, ρ_lag1, γ)`.
pub(crate) fn indicator_stats(ind: &[f64], n_c: usize, n_s: usize) -> (f64, f64, f64, f64, usize) {
    let n = ind.len() as f64;
    let p = ind.iter().sum::<f64>() / n;
    let var = p * (1.0 - p);
    let mut clamped = 0;
    let chains = Chains { x: ind, n_c, n_s };
    let rho = if n_s > 1 {
        clamp_rho(lag1_autocorrelation(&chains, p), &mut clamped)
    } else {
        0.0
    };
    (p, var, rho, g_factor(rho, n_s), clamped)
}

fn compute_level_stats(level: &LevelRecord, allow_empty_p: bool) -> Result<LevelStats> {
    let n = level.samples.len();
    let (n_c, n_s) = (level.n_chains, level.n_steps);
    if n_c * n_s != n || n == 0 {
        return Err(Error::Contract(format!(
            "level {}: chain layout {n_c}x{n_s} does not match {n} samples",
            level.level_index
        )));
    }
    let log_f = level.log_f_values()?;
    let log_h = level.log_h_hat;
    if log_h == f64::NEG_INFINITY {
        return Err(Error::DegenerateLevel {
            level: level.level_index,
            reason: "all f values are zero (h = 0)".into(),
        });
    }
    // f normalised by its mean: all ratios below are scale free.
    let f: Vec<f64> = log_f.iter().map(|&lf| (lf - log_h).exp()).collect();
    let var_f_rel = f.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>() / n as f64;
    let ind: Vec<f64> = level.indicators().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let (p, var_ind, rho_p, gamma_p, mut clamped) = indicator_stats(&ind, n_c, n_s);
    if p == 0.0 && !allow_empty_p {
        return Err(Error::DegenerateLevel {
            level: level.level_index,
            reason: "no sample exceeds the next threshold (p_c = 0)".into(),
        });
    }

    let fc = Chains { x: &f, n_c, n_s };
    let ic = Chains { x: &ind, n_c, n_s };
    let rho_h = if n_s > 1 {
        clamp_rho(lag1_autocorrelation(&fc, 1.0), &mut clamped)
    } else {
        0.0
    };
    let gamma_h = g_factor(rho_h, n_s);

    // Zero-lag cross-correlation over the whole level; the per-step form is
    // used for the lagged term, which only exists on chains.
    let rho_f1 = if var_f_rel > 0.0 && var_ind > 0.0 {
        let cov = f.iter().zip(&ind).map(|(a, b)| a * b).sum::<f64>() / n as f64 - p;
        (cov / (var_f_rel.sqrt() * var_ind.sqrt())).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let rho_f1_lag = if n_s > 1 {
        clamp_rho(cross_correlation(&fc, 1.0, &ic, p, 1), &mut clamped)
    } else {
        0.0
    };
    let gamma_hp = g_factor(rho_f1_lag, n_s);

    let delta_h = (var_f_rel / n as f64 * (1.0 + gamma_h)).sqrt();
    let delta_p = if p > 0.0 {
        (var_ind / (n as f64 * p * p) * (1.0 + gamma_p)).sqrt()
    } else {
        0.0
    };
    let rho_hp = (rho_f1 * (1.0 + gamma_hp) / ((1.0 + gamma_h) * (1.0 + gamma_p)).sqrt()).clamp(-1.0, 1.0);

    Ok(LevelStats {
        log_h_hat: log_h,
        p_c_hat: p,
        log_var_f: var_f_rel.ln() + 2.0 * log_h,
        var_ind,
        rho_f1,
        rho_f1_lag,
        rho_h_lag1: rho_h,
        rho_p_lag1: rho_p,
        gamma_h,
        gamma_p,
        gamma_hp,
        delta_h,
        delta_p,
        rho_hp,
        clamped,
    })
}

/// Correlation-aware c.o.v. ingredients of one level.
pub fn level_stats(level: &LevelRecord) -> Result<LevelStats> {
    compute_level_stats(level, false)
}

/// `VAR[Ẑ] / ẑ²` from per-level subareas and statistics.
///
/// `COV[Ẑ_i, Ẑ_j] ≈ ẑ_i ẑ_j {δ_h,i² 1(i=j) + Σ_{ii<i} δ_p,ii² + ρ_hp,i δ_h,i δ_p,i 1(i<j)}`
/// for `i <= j`, mirrored for `j < i`.
pub fn relative_variance(log_z: &[f64], stats: &[LevelStats]) -> f64 {
    assert_eq!(log_z.len(), stats.len());
    let total = log_sum_exp(log_z);
    let w: Vec<f64> = log_z.iter().map(|lz| (lz - total).exp()).collect();
    let m = w.len();
    let mut prefix = vec![0.0; m];
    for i in 1..m {
        prefix[i] = prefix[i - 1] + stats[i - 1].delta_p.powi(2);
    }
    let mut var = 0.0;
    for i in 0..m {
        let s = &stats[i];
        var += w[i] * w[i] * (s.delta_h.powi(2) + prefix[i]);
        let cross = prefix[i] + s.rho_hp * s.delta_h * s.delta_p;
        for wj in &w[i + 1..] {
            var += 2.0 * w[i] * wj * cross;
        }
    }
    var.max(0.0)
}

/// `(ln VAR[Ẑ], ln VAR[Ž])`; the second keeps every correlation factor at 0.
pub fn evidence_variance(levels: &[LevelRecord], stats: &[LevelStats]) -> (f64, f64) {
    let log_z: Vec<f64> = levels.iter().map(|l| l.log_z_hat).collect();
    let total = log_sum_exp(&log_z);
    let indep: Vec<LevelStats> = stats.iter().map(LevelStats::independent).collect();
    let rel = relative_variance(&log_z, stats);
    let rel_check = relative_variance(&log_z, &indep);
    (rel.ln() + 2.0 * total, rel_check.ln() + 2.0 * total)
}

/// `ln((Σw)² / Σw²)` for log-weights.
pub fn log_weight_ess(log_w: &[f64]) -> Result<f64> {
    let lse = log_sum_exp(log_w);
    if lse == f64::NEG_INFINITY {
        return Err(Error::Domain("all weights are zero".into()));
    }
    let sq: Vec<f64> = log_w.iter().map(|w| 2.0 * w).collect();
    Ok(2.0 * lse - log_sum_exp(&sq))
}

/// `N_ess ≈ (Σw)²/Σw² · var[Ž]/var[Ẑ]`.
pub fn effective_sample_size(log_w: &[f64], log_var_check: f64, log_var_hat: f64) -> Result<f64> {
    let ratio = if log_var_hat == f64::NEG_INFINITY && log_var_check == f64::NEG_INFINITY {
        1.0
    } else if log_var_hat == f64::NEG_INFINITY {
        return Err(Error::Domain("estimator variance is zero".into()));
    } else {
        (log_var_check - log_var_hat).exp()
    };
    Ok(log_weight_ess(log_w)?.exp() * ratio)
}

/// Uncertainty summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub log_var_z_hat: f64,
    pub log_var_z_check: f64,
    /// c.o.v. `√VAR[Ẑ] / ẑ`; also the approximate standard deviation of `ln ẑ`.
    pub cov_z_hat: f64,
    pub cov_z_check: f64,
    pub n_ess: f64,
    pub levels: Vec<LevelStats>,
    pub clamped_correlations: usize,
}

/// How the samples of all levels are weighted when pooled into one
/// posterior sample set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `w = p_i L`, with `i` the level that produced the sample. Each level
    /// on its own is a valid importance sampler of the posterior restricted
    /// to `L > ℓ_i`; pooled, the restriction over-weights the high-likelihood
    /// region.
    Level,
    /// Deterministic-mixture weight `w = L / Σ_{i: L > ℓ_i} p_i⁻¹`: every
    /// sample is treated as a draw from the equal mixture of all level
    /// densities, which covers the whole posterior.
    #[default]
    Mixture,
}

/// Log posterior weights of every pooled sample, in level order.
pub fn log_weights(run: &SusRun, scheme: WeightScheme) -> Vec<f64> {
    let levels: Vec<(f64, f64)> = run.levels.iter().map(|l| (l.log_p, l.log_ell)).collect();
    let samples: Vec<(usize, f64)> = run
        .levels
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.samples.iter().map(move |s| (i, s.log_lik)))
        .collect();
    pooled_log_weights(&levels, &samples, scheme)
}

/// Log posterior weights from the level structure alone: `levels[i]` is
/// `(ln p_i, ℓ_i)` and every sample is `(level index, ln L)`.
pub fn pooled_log_weights(levels: &[(f64, f64)], samples: &[(usize, f64)], scheme: WeightScheme) -> Vec<f64> {
    match scheme {
        WeightScheme::Level => samples.iter().map(|&(i, y)| levels[i].0 + y).collect(),
        WeightScheme::Mixture => {
            let ells: Vec<f64> = levels.iter().map(|l| l.1).collect();
            // prefix[j] = ln Σ_{i<j} 1/p_i
            let mut prefix = vec![f64::NEG_INFINITY; ells.len() + 1];
            for (j, l) in levels.iter().enumerate() {
                prefix[j + 1] = log_sum_exp(&[prefix[j], -l.0]);
            }
            samples
                .iter()
                .map(|&(_, y)| {
                    let covered = ells.partition_point(|&e| e < y);
                    if covered == 0 {
                        f64::NEG_INFINITY
                    } else {
                        y - prefix[covered]
                    }
                })
                .collect()
        }
    }
}

/// Variance and ESS of a completed run.
///
/// The last level's `p̂_c` may be zero (plateau termination); its `δ_p`
/// never enters the variance, so it is reported as 0.
pub fn uncertainty(run: &SusRun, scheme: WeightScheme) -> Result<UncertaintyReport> {
    let m = run.levels.len();
    let stats: Vec<LevelStats> = run
        .levels
        .iter()
        .enumerate()
        .map(|(i, l)| compute_level_stats(l, i + 1 == m))
        .collect::<Result<_>>()?;
    let (log_var_hat, log_var_check) = evidence_variance(&run.levels, &stats);
    let n_ess = effective_sample_size(&log_weights(run, scheme), log_var_check, log_var_hat)?;
    Ok(UncertaintyReport {
        cov_z_hat: (0.5 * log_var_hat - run.log_evidence).exp(),
        cov_z_check: (0.5 * log_var_check - run.log_evidence).exp(),
        log_var_z_hat: log_var_hat,
        log_var_z_check: log_var_check,
        n_ess,
        clamped_correlations: stats.iter().map(|s| s.clamped).sum(),
        levels: stats,
    })
}
