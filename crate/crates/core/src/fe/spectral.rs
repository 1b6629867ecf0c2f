//! Modal PSD model and the frequency-domain likelihood of sample spectra.
//!
//! PSDs are in g²/Hz and mode shapes are normalised to unit story mass, so
//! modal forces are accelerations in g.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{Cholesky, DMatrix};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::building::ShearBuildingModel;
use crate::fe::cases::UpdatingCase;
use crate::fe::synth::SpectralDataset;
use crate::model::LogLikelihood;

/// Structural and spectral parameters `{α, ζ, S, S_e}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeParams {
    pub alpha: Vec<f64>,
    pub zeta: Vec<f64>,
    pub s: Vec<f64>,
    pub s_e: Vec<f64>,
}

impl FeParams {
    /// Split a flat vector laid out as `[α (N_d), ζ (N_m), S (N_m), S_e (N_c)]`.
    pub fn from_theta(theta: &[f64], n_stories: usize, n_modes: usize, n_channels: usize) -> Result<Self> {
        let dim = n_stories + 2 * n_modes + n_channels;
        if theta.len() != dim {
            return Err(Error::Contract(format!("θ has length {}, expected {dim}", theta.len())));
        }
        let (alpha, rest) = theta.split_at(n_stories);
        let (zeta, rest) = rest.split_at(n_modes);
        let (s, s_e) = rest.split_at(n_modes);
        Ok(Self { alpha: alpha.to_vec(), zeta: zeta.to_vec(), s: s.to_vec(), s_e: s_e.to_vec() })
    }

    pub fn to_theta(&self) -> Vec<f64> {
        [&self.alpha[..], &self.zeta, &self.s, &self.s_e].concat()
    }
}

/// Acceleration FRF `h = [(1 − β²) − i 2ζβ]⁻¹` with `β = f_i / f_k`.
pub fn frf(f_mode: f64, zeta: f64, f_k: f64) -> Result<Complex64> {
    if !(f_k > 0.0) || !(f_mode > 0.0) {
        return Err(Error::Domain(format!("frequencies must be positive (f_i = {f_mode}, f_k = {f_k})")));
    }
    let beta = f_mode / f_k;
    let den = Complex64::new(1.0 - beta * beta, -2.0 * zeta * beta);
    if den.norm() == 0.0 {
        return Err(Error::Domain(format!("undamped mode at {f_mode} Hz evaluated at resonance")));
    }
    Ok(den.inv())
}

/// Mean PSD matrix `E_k = Φ h_k S h_k* Φᵀ + S_e` for real shapes `phi`
/// (`N_c × N_m`) and natural frequencies `f_modes`.
///
/// With real shapes and diagonal `S` the matrix is real symmetric; it is
/// returned as a complex Hermitian matrix with zero imaginary part.
pub fn psd_mean(
    phi: &DMatrix<f64>,
    f_modes: &[f64],
    zeta: &[f64],
    s: &[f64],
    s_e: &[f64],
    f_k: f64,
) -> Result<DMatrix<Complex64>> {
    Ok(psd_mean_real(phi, f_modes, zeta, s, s_e, f_k)?.map(|x| Complex64::new(x, 0.0)))
}

/// Real form of [`psd_mean`].
pub fn psd_mean_real(
    phi: &DMatrix<f64>,
    f_modes: &[f64],
    zeta: &[f64],
    s: &[f64],
    s_e: &[f64],
    f_k: f64,
) -> Result<DMatrix<f64>> {
    let (n_c, n_m) = phi.shape();
    if f_modes.len() < n_m || zeta.len() != n_m || s.len() != n_m || s_e.len() != n_c {
        return Err(Error::Contract(format!(
            "PSD model for {n_c} channels and {n_m} modes got {} frequencies, {} ζ, {} S, {} S_e",
            f_modes.len(),
            zeta.len(),
            s.len(),
            s_e.len()
        )));
    }
    let mut gain = Vec::with_capacity(n_m);
    for i in 0..n_m {
        gain.push(s[i] * frf(f_modes[i], zeta[i], f_k)?.norm_sqr());
    }
    let mut e = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(s_e));
    for a in 0..n_c {
        for b in a..n_c {
            let v: f64 = (0..n_m).map(|i| phi[(a, i)] * gain[i] * phi[(b, i)]).sum();
            e[(a, b)] += v;
            if a != b {
                e[(b, a)] += v;
            }
        }
    }
    Ok(e)
}

/// `−ln det E − tr(E⁻¹ Ê)` for one frequency, or `None` if `E` is not
/// positive definite. Only the real part of `Ê` contributes because `E` is
/// real symmetric.
pub fn log_likelihood_term(e: DMatrix<f64>, e_hat_re: &DMatrix<f64>) -> Option<f64> {
    let chol = Cholesky::new(e)?;
    let l = chol.l_dirty();
    let mut log_det = 0.0;
    for j in 0..l.nrows() {
        let d = l[(j, j)];
        if !(d > 0.0) {
            return None;
        }
        log_det += 2.0 * d.ln();
    }
    let solved = chol.solve(e_hat_re);
    Some(-(log_det + solved.trace()))
}

/// How the summed spectral misfit is scaled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralScaling {
    /// `−Σ_k [ln det E_k + tr(E_k⁻¹ Ê_k)]` exactly as the negative
    /// log-likelihood is usually written for averaged spectra.
    #[default]
    Unscaled,
    /// The same sum multiplied by the segment count `M`, the complex-Wishart
    /// log-density of `Ê_k` with `M` degrees of freedom.
    Wishart,
}

/// Spectral log-likelihood of an [`UpdatingCase`] given a dataset.
#[derive(Debug)]
pub struct SpectralLikelihood {
    case: UpdatingCase,
    freqs: Vec<f64>,
    e_hat_re: Vec<DMatrix<f64>>,
    factor: f64,
    non_pd: AtomicU64,
}

impl SpectralLikelihood {
    pub fn new(case: UpdatingCase, dataset: &SpectralDataset, scaling: SpectralScaling) -> Result<Self> {
        let stories = case.measured_stories.clone();
        if dataset.channels != stories {
            return Err(Error::Dataset(format!(
                "dataset channels {:?} do not match case {} stories {:?}",
                dataset.channels, case.case_id, stories
            )));
        }
        let (lo, hi) = case.freq_band;
        if let Some(f) = dataset.freqs.iter().find(|&&f| f < lo - 1e-9 || f >= hi - 1e-9) {
            return Err(Error::Dataset(format!("frequency {f} Hz outside the case band [{lo}, {hi})")));
        }
        let factor = match scaling {
            SpectralScaling::Unscaled => 1.0,
            SpectralScaling::Wishart => dataset.n_segments as f64,
        };
        Ok(Self {
            case,
            freqs: dataset.freqs.clone(),
            e_hat_re: dataset.psd_matrices.iter().map(|m| m.map(|c| c.re)).collect(),
            factor,
            non_pd: AtomicU64::new(0),
        })
    }

    pub fn case(&self) -> &UpdatingCase {
        &self.case
    }

    /// Number of evaluations rejected because some `E_k` was not positive definite.
    pub fn non_pd_count(&self) -> u64 {
        self.non_pd.load(Ordering::Relaxed)
    }

    pub fn evaluate(&self, params: &FeParams) -> Result<f64> {
        let model = ShearBuildingModel::reference(&params.alpha)?;
        let modal = model.modal()?;
        let channels: Vec<usize> = self.case.measured_stories.iter().map(|s| s - 1).collect();
        let phi = modal.partial_shapes(&channels, self.case.modes_used);
        let mut total = 0.0;
        for (f_k, e_hat) in self.freqs.iter().zip(&self.e_hat_re) {
            let e = psd_mean_real(&phi, &modal.frequencies, &params.zeta, &params.s, &params.s_e, *f_k)?;
            match log_likelihood_term(e, e_hat) {
                Some(v) => total += v,
                None => {
                    self.non_pd.fetch_add(1, Ordering::Relaxed);
                    return Ok(f64::NEG_INFINITY);
                }
            }
        }
        Ok(self.factor * total)
    }
}

impl LogLikelihood for SpectralLikelihood {
    fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        let params = FeParams::from_theta(theta, self.case.n_stories(), self.case.modes_used, self.case.n_channels())?;
        self.evaluate(&params)
    }
}
