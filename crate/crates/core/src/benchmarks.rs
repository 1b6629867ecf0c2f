//! Multi-modal benchmark likelihoods with independent evidence oracles.
//!
//! * `eggbox`: `ln L = (2 + cos(θ₁/2) cos(θ₂/2))⁵` on `U(0, 10π)²`.
//! * `shells`: two Gaussian shells of radius 2 and width 0.1 centred at
//!   `∓3.5` on the first axis, `U(-6, 6)^d`.
//! * `norm_loggamma`: a separable product with LogGamma / Normal mixtures
//!   in the first two coordinates, `U(-30, 30)^d`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use libm::lgamma;

use crate::error::{Error, Result};
use crate::math::{integrate, log_sum_exp, phi, LN_SQRT_2PI};
use crate::model::{BayesProblem, PriorSpec};

pub const SHELL_OFFSET: f64 = 3.5;
pub const SHELL_RADIUS: f64 = 2.0;
pub const SHELL_WIDTH: f64 = 0.1;
pub const MODE_OFFSET: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Eggbox,
    Shells,
    NormLoggamma,
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Eggbox => "eggbox",
            Self::Shells => "shells",
            Self::NormLoggamma => "norm_loggamma",
        })
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eggbox" => Ok(Self::Eggbox),
            "shells" => Ok(Self::Shells),
            "norm_loggamma" => Ok(Self::NormLoggamma),
            other => Err(Error::Config(format!(
                "unknown benchmark '{other}' (expected eggbox, shells or norm_loggamma)"
            ))),
        }
    }
}

/// A benchmark instance: likelihood family plus dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub name: Benchmark,
    pub dim: usize,
}

impl BenchmarkSpec {
    pub fn new(name: Benchmark, dim: usize) -> Result<Self> {
        let ok = match name {
            Benchmark::Eggbox => dim == 2,
            Benchmark::Shells => dim >= 2,
            Benchmark::NormLoggamma => dim >= 2 && dim % 2 == 0,
        };
        if !ok {
            let need = match name {
                Benchmark::Eggbox => "d = 2",
                Benchmark::Shells => "d >= 2",
                Benchmark::NormLoggamma => "even d >= 2",
            };
            return Err(Error::Config(format!("{name} requires {need}, got d = {dim}")));
        }
        Ok(Self { name, dim })
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self.name {
            Benchmark::Eggbox => (0.0, 10.0 * PI),
            Benchmark::Shells => (-6.0, 6.0),
            Benchmark::NormLoggamma => (-30.0, 30.0),
        }
    }

    pub fn prior(&self) -> PriorSpec {
        let (lo, hi) = self.bounds();
        PriorSpec::uniform_box(self.dim, lo, hi).expect("benchmark bounds are valid")
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        match self.name {
            Benchmark::Eggbox => eggbox_loglik(theta),
            Benchmark::Shells => shells_loglik(theta),
            Benchmark::NormLoggamma => norm_loggamma_loglik(theta),
        }
    }

    /// Reference evidence values from the literature, where tabulated.
    pub fn reference_log_evidence(&self) -> Option<f64> {
        match (self.name, self.dim) {
            (Benchmark::Eggbox, 2) => Some(235.86),
            (Benchmark::Shells, 2) => Some(-1.75),
            (Benchmark::Shells, 5) => Some(-5.67),
            (Benchmark::Shells, 10) => Some(-14.59),
            (Benchmark::Shells, 20) => Some(-36.09),
            (Benchmark::Shells, 30) => Some(-60.13),
            (Benchmark::NormLoggamma, 20) => Some(-81.89),
            _ => None,
        }
    }

    /// Upper bound of `ln L` over the prior box.
    pub fn log_lik_sup(&self) -> f64 {
        match self.name {
            Benchmark::Eggbox => 243.0,
            Benchmark::Shells => shells_loglik(&shell_peak(self.dim)),
            Benchmark::NormLoggamma => (0..self.dim).map(|j| coordinate_log_density(j, self.dim, MODE_OFFSET)).sum(),
        }
    }

    pub fn problem(&self) -> BayesProblem {
        let spec = *self;
        let problem = BayesProblem::from_fn(self.to_string(), self.prior(), move |t: &[f64]| spec.log_likelihood(t));
        match self.reference_log_evidence() {
            Some(z) => problem.with_reference_log_evidence(z),
            None => problem,
        }
    }
}

impl fmt::Display for BenchmarkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-d{}", self.name, self.dim)
    }
}

fn shell_peak(dim: usize) -> Vec<f64> {
    let mut t = vec![0.0; dim];
    t[0] = -SHELL_OFFSET + SHELL_RADIUS;
    t
}

/// `[2 + cos(θ₁/2) cos(θ₂/2)]⁵`.
pub fn eggbox_loglik(theta: &[f64]) -> f64 {
    (2.0 + (theta[0] / 2.0).cos() * (theta[1] / 2.0).cos()).powi(5)
}

/// `ln circ(θ; c, r, w)` with `c = (offset, 0, …, 0)`.
fn log_circ(theta: &[f64], offset: f64) -> f64 {
    let d2: f64 = (theta[0] - offset).powi(2) + theta[1..].iter().map(|x| x * x).sum::<f64>();
    let z = (d2.sqrt() - SHELL_RADIUS) / SHELL_WIDTH;
    -0.5 * z * z - LN_SQRT_2PI - SHELL_WIDTH.ln()
}

/// `ln[circ(θ; c₁) + circ(θ; c₂)]`.
pub fn shells_loglik(theta: &[f64]) -> f64 {
    log_sum_exp(&[log_circ(theta, -SHELL_OFFSET), log_circ(theta, SHELL_OFFSET)])
}

/// `ln LogGamma(x | loc, scale, shape)` with density
/// `exp(shape·s - e^s) / (scale Γ(shape))`, `s = (x - loc)/scale`.
/// Only `shape = 1` (`Γ(1) = 1`) is needed here.
pub fn log_loggamma(x: f64, loc: f64, scale: f64) -> f64 {
    let s = (x - loc) / scale;
    s - s.exp() - scale.ln()
}

pub fn log_normal(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - LN_SQRT_2PI - sd.ln()
}

/// Log-density of coordinate `j` (0-based) of the separable likelihood.
pub fn coordinate_log_density(j: usize, dim: usize, x: f64) -> f64 {
    let half = std::f64::consts::LN_2;
    match j {
        0 => log_sum_exp(&[
            log_loggamma(x, MODE_OFFSET, 1.0) - half,
            log_loggamma(x, -MODE_OFFSET, 1.0) - half,
        ]),
        1 => log_sum_exp(&[log_normal(x, MODE_OFFSET, 1.0) - half, log_normal(x, -MODE_OFFSET, 1.0) - half]),
        // 1-based indices 3 ..= (d + 2)/2.
        j if j < (dim + 2) / 2 => log_loggamma(x, MODE_OFFSET, 1.0),
        _ => log_normal(x, MODE_OFFSET, 1.0),
    }
}

pub fn norm_loggamma_loglik(theta: &[f64]) -> f64 {
    let d = theta.len();
    theta.iter().enumerate().map(|(j, &x)| coordinate_log_density(j, d, x)).sum()
}

/// CDF of a unit-scale, unit-shape LogGamma: `1 - exp(-e^s)`.
fn loggamma_cdf(x: f64, loc: f64) -> f64 {
    -(-(x - loc).exp()).exp_m1()
}

/// Untruncated CDF of the coordinate-`j` likelihood factor.
fn coordinate_cdf_raw(j: usize, dim: usize, x: f64) -> f64 {
    match j {
        0 => 0.5 * (loggamma_cdf(x, MODE_OFFSET) + loggamma_cdf(x, -MODE_OFFSET)),
        1 => 0.5 * (phi(x - MODE_OFFSET) + phi(x + MODE_OFFSET)),
        j if j < (dim + 2) / 2 => loggamma_cdf(x, MODE_OFFSET),
        _ => phi(x - MODE_OFFSET),
    }
}

/// Posterior marginal CDF of coordinate `j`: the likelihood factor
/// truncated to the prior interval.
pub fn norm_loggamma_marginal_cdf(j: usize, dim: usize, x: f64) -> f64 {
    let (lo, hi) = (-30.0, 30.0);
    let (a, b) = (coordinate_cdf_raw(j, dim, lo), coordinate_cdf_raw(j, dim, hi));
    ((coordinate_cdf_raw(j, dim, x.clamp(lo, hi)) - a) / (b - a)).clamp(0.0, 1.0)
}

/// Absolute tolerance of the oracle on `ln z`.
pub const ORACLE_LOG_TOL: f64 = 1e-3;

/// Piecewise integration over breakpoints. Pieces where the integrand
/// underflows contribute zero; the error check applies to the total.
fn quad_pieces(f: impl Fn(f64) -> f64 + Copy, points: &[f64]) -> Result<f64> {
    // A relative error of 1e-9 on the integral is far inside 1e-3 on its log.
    let (mut value, mut err) = (0.0, 0.0);
    for w in points.windows(2) {
        let (v, e) = integrate(f, w[0], w[1], 0.0, 1e-9, 20_000)?;
        value += v;
        err += e;
    }
    if !(value > 0.0) || err / value > ORACLE_LOG_TOL {
        return Err(Error::Quadrature { achieved: err / value.abs(), requested: ORACLE_LOG_TOL });
    }
    Ok(value)
}

/// Independent deterministic evidence `ln ∫ L π dθ` by adaptive quadrature.
///
/// * eggbox: nested 2-D quadrature with panels split at the peaks
///   (multiples of 2π), integrand scaled by `e^{-243}`;
/// * shells: exact radial reduction; each shell lies well inside the box so
///   `∫ circ dθ = S_{d-1} ∫ r^{d-1} N(r; 2, 0.1) dr`;
/// * norm_loggamma: product of 1-D quadratures.
pub fn oracle_log_evidence(spec: &BenchmarkSpec) -> Result<f64> {
    let (lo, hi) = spec.bounds();
    let log_volume = spec.dim as f64 * (hi - lo).ln();
    match spec.name {
        Benchmark::Eggbox => {
            let peak = 243.0;
            let breaks: Vec<f64> = (0..=5).map(|k| 2.0 * PI * k as f64).collect();
            let inner = |t1: f64| -> f64 {
                let c1 = (t1 / 2.0).cos();
                quad_pieces(move |t2: f64| ((2.0 + c1 * (t2 / 2.0).cos()).powi(5) - peak).exp(), &breaks)
                    .unwrap_or(f64::NAN)
            };
            let total = quad_pieces(inner, &breaks)?;
            if !total.is_finite() {
                return Err(Error::Quadrature { achieved: f64::NAN, requested: ORACLE_LOG_TOL });
            }
            Ok(peak + total.ln() - log_volume)
        }
        Benchmark::Shells => {
            let d = spec.dim as f64;
            // ln S_{d-1} = ln 2 + (d/2) ln π - ln Γ(d/2).
            let log_surface = std::f64::consts::LN_2 + 0.5 * d * PI.ln() - lgamma(0.5 * d);
            let r0 = SHELL_RADIUS;
            let radial = |r: f64| ((d - 1.0) * (r / r0).ln() + log_normal(r, r0, SHELL_WIDTH)).exp();
            let span = 20.0 * SHELL_WIDTH;
            let shell = quad_pieces(radial, &[(r0 - span).max(0.0), r0 - 3.0 * SHELL_WIDTH, r0, r0 + 3.0 * SHELL_WIDTH, r0 + span])?;
            let log_one = log_surface + (d - 1.0) * r0.ln() + shell.ln();
            Ok(std::f64::consts::LN_2 + log_one - log_volume)
        }
        Benchmark::NormLoggamma => {
            let mut total = 0.0;
            for j in 0..spec.dim {
                let f = |x: f64| coordinate_log_density(j, spec.dim, x).exp();
                let breaks = [lo, -20.0, -10.0, 0.0, 10.0, 20.0, hi];
                total += quad_pieces(f, &breaks)?.ln();
            }
            Ok(total - log_volume)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eggbox_values() {
        assert_eq!(eggbox_loglik(&[0.0, 0.0]), 243.0);
        assert!((eggbox_loglik(&[PI, PI]) - 32.0).abs() < 1e-12);
        assert!((eggbox_loglik(&[2.0 * PI, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shells_values() {
        let peak = -LN_SQRT_2PI - 0.1f64.ln();
        assert!((peak - 1.3836).abs() < 1e-4);
        assert!((shells_loglik(&[-1.5, 0.0]) - peak).abs() < 1e-12);
        let centre = peak - 112.5 + std::f64::consts::LN_2;
        assert!((shells_loglik(&[0.0, 0.0]) - centre).abs() < 1e-12);
        let a = shells_loglik(&[1.3, -0.4, 2.2]);
        let b = shells_loglik(&[-1.3, -0.4, 2.2]);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn norm_loggamma_values() {
        let v = coordinate_log_density(1, 20, 10.0);
        assert!((v - (0.5f64.ln() - LN_SQRT_2PI)).abs() < 1e-12);
        assert!((log_loggamma(10.0, 10.0, 1.0) + 1.0).abs() < 1e-15);
        let theta: Vec<f64> = (0..6).map(|j| j as f64 * 1.7 - 3.0).collect();
        let sum: f64 = theta.iter().enumerate().map(|(j, &x)| coordinate_log_density(j, 6, x)).sum();
        assert_eq!(norm_loggamma_loglik(&theta), sum);
        // Coordinates 3..=(d+2)/2 (1-based) are LogGamma, the rest normal.
        assert_eq!(coordinate_log_density(2, 6, 10.0), -1.0);
        assert_eq!(coordinate_log_density(3, 6, 10.0), -1.0);
        assert_eq!(coordinate_log_density(4, 6, 10.0), -LN_SQRT_2PI);
    }

    #[test]
    fn spec_validation() {
        assert!(BenchmarkSpec::new(Benchmark::Eggbox, 3).is_err());
        assert!(BenchmarkSpec::new(Benchmark::Shells, 1).is_err());
        assert!(BenchmarkSpec::new(Benchmark::NormLoggamma, 5).is_err());
        assert!(BenchmarkSpec::new(Benchmark::NormLoggamma, 20).is_ok());
        assert_eq!("shells".parse::<Benchmark>().unwrap(), Benchmark::Shells);
        assert!("nope".parse::<Benchmark>().is_err());
    }

    #[test]
    fn marginal_cdf_limits() {
        for j in 0..4 {
            assert_eq!(norm_loggamma_marginal_cdf(j, 4, -30.0), 0.0);
            assert!((norm_loggamma_marginal_cdf(j, 4, 30.0) - 1.0).abs() < 1e-15);
        }
        assert!((norm_loggamma_marginal_cdf(1, 4, 0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sup_bounds_hold() {
        let s = BenchmarkSpec::new(Benchmark::Shells, 2).unwrap();
        assert!((s.log_lik_sup() - 1.3836).abs() < 1e-3);
    }
}
