//! The Bayesian problem abstraction consumed by every sampler.
//!
//! Parameters live in two spaces: the physical space `theta`, where the
//! likelihood is defined, and the standard-normal space `u`, where all
//! sampling happens. The map between them is [`PriorSpec::to_physical`].

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::phi;

/// Independent uniform prior, one `(lower, upper)` interval per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    bounds: Vec<(f64, f64)>,
}

impl PriorSpec {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Prior("prior must have at least one dimension".into()));
        }
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Prior(format!(
                    "dimension {j}: need finite lower < upper, got ({lo}, {hi})"
                )));
            }
        }
        Ok(Self { bounds })
    }

    /// The same interval repeated `dim` times.
    pub fn uniform_box(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![(lower, upper); dim])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Log prior density, constant inside the box.
    pub fn log_density(&self) -> f64 {
        -self.bounds.iter().map(|(lo, hi)| (hi - lo).ln()).sum::<f64>()
    }

    /// `theta_j = lower_j + (upper_j - lower_j) * Phi(u_j)`.
    pub fn to_physical(&self, u: &[f64]) -> Vec<f64> {
        let mut theta = vec![0.0; self.bounds.len()];
        self.to_physical_into(u, &mut theta);
        theta
    }

    pub fn to_physical_into(&self, u: &[f64], theta: &mut [f64]) {
        debug_assert_eq!(u.len(), self.bounds.len());
        for ((t, &uj), &(lo, hi)) in theta.iter_mut().zip(u).zip(&self.bounds) {
            // Clamp guards against rounding just past the upper edge.
            *t = (lo + (hi - lo) * phi(uj)).clamp(lo, hi);
        }
    }
}

/// A natural-log likelihood `ln L(theta)`.
///
/// Implementations must be pure functions of `theta`; they are called
/// concurrently from several chains. `-inf` encodes zero likelihood.
pub trait LogLikelihood: Send + Sync {
    fn log_likelihood(&self, theta: &[f64]) -> Result<f64>;
}

impl<F> LogLikelihood for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        Ok(self(theta))
    }
}

/// Prior, likelihood and bookkeeping for one inference problem.
#[derive(Clone)]
pub struct BayesProblem {
    name: String,
    prior: PriorSpec,
    likelihood: Arc<dyn LogLikelihood>,
    reference_log_evidence: Option<f64>,
}

impl fmt::Debug for BayesProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BayesProblem")
            .field("name", &self.name)
            .field("prior", &self.prior)
            .field("reference_log_evidence", &self.reference_log_evidence)
            .finish_non_exhaustive()
    }
}

impl BayesProblem {
    pub fn new(name: impl Into<String>, prior: PriorSpec, likelihood: Arc<dyn LogLikelihood>) -> Self {
        Self {
            name: name.into(),
            prior,
            likelihood,
            reference_log_evidence: None,
        }
    }

    pub fn from_fn<F>(name: impl Into<String>, prior: PriorSpec, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(name, prior, Arc::new(f))
    }

    pub fn with_reference_log_evidence(mut self, value: f64) -> Self {
        self.reference_log_evidence = Some(value);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn reference_log_evidence(&self) -> Option<f64> {
        self.reference_log_evidence
    }

    /// `ln L(theta)`; NaN results are reported as errors rather than propagated.
    pub fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        let value = self.likelihood.log_likelihood(theta)?;
        if value.is_nan() {
            return Err(Error::Likelihood {
                theta: theta.to_vec(),
                reason: "likelihood returned NaN".into(),
            });
        }
        Ok(value)
    }

    /// `ln L(T(u))`.
    pub fn log_likelihood_in_u(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::Contract(format!(
                "u has length {}, problem dimension is {}",
                u.len(),
                self.dim()
            )));
        }
        let theta = self.prior.to_physical(u);
        self.log_likelihood(&theta)
    }
}

/// Thread-safe count of likelihood evaluations (accepted or not).
#[derive(Debug, Default)]
pub struct EvalCounter(AtomicU64);

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::phi_inv;

    #[test]
    fn prior_validation() {
        assert!(PriorSpec::new(vec![]).is_err());
        assert!(PriorSpec::new(vec![(1.0, 1.0)]).is_err());
        assert!(PriorSpec::new(vec![(0.0, f64::INFINITY)]).is_err());
        assert!(PriorSpec::new(vec![(0.0, 1.0), (-2.0, 3.0)]).is_ok());
    }

    #[test]
    fn median_maps_to_midpoint() {
        let pi = std::f64::consts::PI;
        let prior = PriorSpec::uniform_box(2, 0.0, 10.0 * pi).unwrap();
        let theta = prior.to_physical(&[0.0, 0.0]);
        assert!((theta[0] - 5.0 * pi).abs() < 1e-12);
        assert!((theta[1] - 5.0 * pi).abs() < 1e-12);
    }

    #[test]
    fn quantile_identity_and_limits() {
        let prior = PriorSpec::uniform_box(1, -6.0, 6.0).unwrap();
        let u = phi_inv(0.25).unwrap();
        assert!((prior.to_physical(&[u])[0] + 3.0).abs() < 1e-10);
        assert_eq!(prior.to_physical(&[40.0])[0], 6.0);
        assert_eq!(prior.to_physical(&[-40.0])[0], -6.0);
    }

    #[test]
    fn likelihood_in_u() {
        let prior = PriorSpec::uniform_box(3, 0.0, 1.0).unwrap();
        let constant = BayesProblem::from_fn("c", prior.clone(), |_: &[f64]| 7.0);
        assert_eq!(constant.log_likelihood_in_u(&[0.3, -1.0, 2.0]).unwrap(), 7.0);

        let zero = BayesProblem::from_fn("z", prior.clone(), |_: &[f64]| f64::NEG_INFINITY);
        assert_eq!(zero.log_likelihood_in_u(&[0.0; 3]).unwrap(), f64::NEG_INFINITY);

        let bad = BayesProblem::from_fn("nan", prior, |_: &[f64]| f64::NAN);
        assert!(matches!(
            bad.log_likelihood_in_u(&[0.0; 3]),
            Err(Error::Likelihood { .. })
        ));
        assert!(constant.log_likelihood_in_u(&[0.0; 2]).is_err());
    }
}
