//! The six sensor/mode configurations and posterior summaries of an update.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::{uncertainty, WeightScheme};
use crate::engine::{run, Termination};
use crate::error::{Error, Result};
use crate::fe::building::{ShearBuildingModel, N_STORIES, TRUE_ALPHA};
use crate::fe::spectral::{FeParams, SpectralLikelihood, SpectralScaling};
use crate::fe::synth::SpectralDataset;
use crate::model::{BayesProblem, PriorSpec};
use crate::resampling::{build_pool, weighted_quantile_of};

/// Prior bounds of every parameter group.
pub const ALPHA_BOUNDS: (f64, f64) = (0.5, 1.0);
pub const ZETA_BOUNDS: (f64, f64) = (0.0, 0.1);
pub const S_BOUNDS: (f64, f64) = (0.0, 1e-8);
pub const S_E_BOUNDS: (f64, f64) = (0.0, 1e-8);

/// Frequency resolution of the stored spectra (Hz).
pub const FREQ_RESOLUTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdatingCase {
    pub case_id: usize,
    /// Measured stories, numbered from 1 at the ground floor.
    pub measured_stories: Vec<usize>,
    /// Modes `1..=modes_used` enter the PSD model.
    pub modes_used: usize,
    /// Frequency band `[low, high)` in Hz.
    pub freq_band: (f64, f64),
}

impl UpdatingCase {
    /// Cases 1–6: stories {9, 10}, {4, 7, 10} or all, with 5 or 10 modes.
    pub fn table(case_id: usize) -> Result<Self> {
        let stories = match case_id {
            1 | 2 => vec![9, 10],
            3 | 4 => vec![4, 7, 10],
            5 | 6 => (1..=N_STORIES).collect(),
            _ => return Err(Error::Config(format!("unknown case {case_id}; expected 1–6"))),
        };
        let (modes_used, freq_band) = if case_id % 2 == 1 { (5, (0.5, 8.5)) } else { (10, (0.5, 14.5)) };
        Ok(Self { case_id, measured_stories: stories, modes_used, freq_band })
    }

    pub fn all() -> Vec<Self> {
        (1..=6).map(|id| Self::table(id).expect("tabulated case")).collect()
    }

    pub fn n_stories(&self) -> usize {
        N_STORIES
    }

    pub fn n_channels(&self) -> usize {
        self.measured_stories.len()
    }

    /// `N_d + 2 N_m + N_c`.
    pub fn dimension(&self) -> usize {
        self.n_stories() + 2 * self.modes_used + self.n_channels()
    }

    /// Number of bins of width [`FREQ_RESOLUTION`] in the band.
    pub fn n_freq_points(&self) -> usize {
        ((self.freq_band.1 - self.freq_band.0) / FREQ_RESOLUTION).round() as usize
    }

    pub fn prior(&self) -> Result<PriorSpec> {
        let mut bounds = vec![ALPHA_BOUNDS; self.n_stories()];
        bounds.extend(std::iter::repeat_n(ZETA_BOUNDS, self.modes_used));
        bounds.extend(std::iter::repeat_n(S_BOUNDS, self.modes_used));
        bounds.extend(std::iter::repeat_n(S_E_BOUNDS, self.n_channels()));
        PriorSpec::new(bounds)
    }

    /// Parameter labels in `θ` order.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.n_stories()).map(|j| format!("alpha_{j}")).collect();
        names.extend((1..=self.modes_used).map(|i| format!("zeta_{i}")));
        names.extend((1..=self.modes_used).map(|i| format!("S_{i}")));
        names.extend(self.measured_stories.iter().map(|s| format!("S_e_{s}")));
        names
    }

    /// The data-generating parameter values restricted to this case.
    pub fn true_params(&self, zeta: f64, s: f64, s_e: f64) -> FeParams {
        FeParams {
            alpha: TRUE_ALPHA.to_vec(),
            zeta: vec![zeta; self.modes_used],
            s: vec![s; self.modes_used],
            s_e: vec![s_e; self.n_channels()],
        }
    }

    /// Bayesian problem over `θ` with the uniform prior of every group.
    pub fn problem(&self, data: &SpectralDataset, scaling: SpectralScaling) -> Result<(BayesProblem, Arc<SpectralLikelihood>)> {
        let lik = Arc::new(SpectralLikelihood::new(self.clone(), data, scaling)?);
        let problem = BayesProblem::new(format!("fe_case_{}", self.case_id), self.prior()?, lik.clone());
        Ok((problem, lik))
    }
}

/// Options of [`run_case`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeOptions {
    pub scaling: SpectralScaling,
    pub weights: WeightScheme,
}

/// Weighted posterior statistics of one scalar quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub cov: f64,
    pub q05: f64,
    pub q95: f64,
    /// Value used to generate the data, when known.
    pub truth: Option<f64>,
}

impl ParamSummary {
    fn from_weighted(name: String, values: &[f64], w: &[f64], truth: Option<f64>) -> Self {
        let mean: f64 = values.iter().zip(w).map(|(v, w)| v * w).sum();
        let var: f64 = values.iter().zip(w).map(|(v, w)| w * (v - mean).powi(2)).sum();
        let sd = var.sqrt();
        Self {
            name,
            mean,
            sd,
            cov: sd / mean.abs(),
            q05: weighted_quantile_of(values, w, 0.05),
            q95: weighted_quantile_of(values, w, 0.95),
            truth,
        }
    }

    /// Whether the truth lies in the 90 % credible interval.
    pub fn covers_truth(&self) -> Option<bool> {
        self.truth.map(|t| self.q05 <= t && t <= self.q95)
    }
}

/// Weighted histogram of one parameter over its prior range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    /// Posterior mass of each of the equal-width bins.
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn new(name: String, (lower, upper): (f64, f64), n_bins: usize, values: &[f64], w: &[f64]) -> Self {
        let mut mass = vec![0.0; n_bins];
        let width = (upper - lower) / n_bins as f64;
        for (v, wk) in values.iter().zip(w) {
            let b = (((v - lower) / width).floor().max(0.0) as usize).min(n_bins - 1);
            mass[b] += wk;
        }
        Self { name, lower, upper, mass }
    }

    /// `(low edge, high edge)` of bin `b`.
    pub fn edges(&self, b: usize) -> (f64, f64) {
        let width = (self.upper - self.lower) / self.mass.len() as f64;
        (self.lower + b as f64 * width, self.lower + (b + 1) as f64 * width)
    }
}

/// Bins per parameter histogram.
pub const HISTOGRAM_BINS: usize = 25;

/// Posterior summary of one model-updating run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: UpdatingCase,
    /// `ln ẑ` up to the constant dropped from the spectral likelihood.
    pub log_evidence: f64,
    pub cov_z_hat: f64,
    pub n_ess: f64,
    pub n_levels: usize,
    pub n_likelihood_calls: u64,
    pub terminated_by: Termination,
    pub non_pd_evaluations: u64,
    /// Every coordinate of `θ`, in `θ` order.
    pub parameters: Vec<ParamSummary>,
    /// Natural frequencies (Hz) of the modes used.
    pub frequencies: Vec<ParamSummary>,
    /// Damping ratios of the modes used.
    pub damping: Vec<ParamSummary>,
    /// Modal force PSDs (g²/Hz) of the modes used.
    pub modal_psd: Vec<ParamSummary>,
    /// One histogram per coordinate of `θ`.
    pub histograms: Vec<Histogram>,
}

impl CaseSummary {
    pub fn alpha(&self) -> &[ParamSummary] {
        &self.parameters[..N_STORIES]
    }

    /// Median posterior c.o.v. of the stiffness factors.
    pub fn median_alpha_cov(&self) -> f64 {
        let mut c: Vec<f64> = self.alpha().iter().map(|p| p.cov).collect();
        c.sort_by(f64::total_cmp);
        let n = c.len();
        if n % 2 == 1 { c[n / 2] } else { 0.5 * (c[n / 2 - 1] + c[n / 2]) }
    }
}

/// Truth used to annotate a summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTruth {
    pub params: FeParams,
    pub frequencies: Vec<f64>,
}

impl CaseTruth {
    pub fn new(params: FeParams) -> Result<Self> {
        let frequencies = ShearBuildingModel::reference(&params.alpha)?.modal()?.frequencies;
        Ok(Self { params, frequencies })
    }
}

/// Run subset simulation on `case` with `data` and summarise the posterior.
pub fn run_case(
    case: &UpdatingCase,
    config: &RunConfig,
    data: &SpectralDataset,
    options: FeOptions,
    truth: Option<&CaseTruth>,
) -> Result<CaseSummary> {
    let (problem, lik) = case.problem(data, options.scaling)?;
    let sus = run(&problem, config)?;
    let report = uncertainty(&sus, options.weights)?;
    let pool = build_pool(&sus, &problem, options.weights);
    let w_all = pool.normalized_weights();

    // Entries with negligible weight cannot move any statistic.
    let w_max = w_all.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..pool.len()).filter(|&k| w_all[k] > 1e-12 * w_max).collect();
    let w_sum: f64 = keep.iter().map(|&k| w_all[k]).sum();
    let w: Vec<f64> = keep.iter().map(|&k| w_all[k] / w_sum).collect();

    let truth_theta = truth.map(|t| t.params.to_theta());
    let bounds = problem.prior().bounds().to_vec();
    let (parameters, histograms): (Vec<_>, Vec<_>) = case
        .parameter_names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let values: Vec<f64> = keep.iter().map(|&k| pool.entries[k].theta[j]).collect();
            (
                ParamSummary::from_weighted(name.clone(), &values, &w, truth_theta.as_ref().map(|t| t[j])),
                Histogram::new(name, bounds[j], HISTOGRAM_BINS, &values, &w),
            )
        })
        .unzip();

    let n_m = case.modes_used;
    let freqs: Vec<Vec<f64>> = keep
        .par_iter()
        .map(|&k| {
            let modal = ShearBuildingModel::reference(&pool.entries[k].theta[..N_STORIES])?.modal()?;
            Ok(modal.frequencies[..n_m].to_vec())
        })
        .collect::<Result<_>>()?;
    let frequencies = (0..n_m)
        .map(|i| {
            let values: Vec<f64> = freqs.iter().map(|f| f[i]).collect();
            ParamSummary::from_weighted(format!("f_{}", i + 1), &values, &w, truth.map(|t| t.frequencies[i]))
        })
        .collect();
    let group = |offset: usize, label: &str| -> Vec<ParamSummary> {
        (0..n_m)
            .map(|i| {
                let j = offset + i;
                let values: Vec<f64> = keep.iter().map(|&k| pool.entries[k].theta[j]).collect();
                ParamSummary::from_weighted(format!("{label}_{}", i + 1), &values, &w, truth_theta.as_ref().map(|t| t[j]))
            })
            .collect()
    };

    Ok(CaseSummary {
        case: case.clone(),
        log_evidence: sus.log_evidence,
        cov_z_hat: report.cov_z_hat,
        n_ess: report.n_ess,
        n_levels: sus.n_levels(),
        n_likelihood_calls: sus.n_likelihood_calls,
        terminated_by: sus.terminated_by,
        non_pd_evaluations: lik.non_pd_count(),
        parameters,
        frequencies,
        damping: group(N_STORIES, "zeta"),
        modal_psd: group(N_STORIES + n_m, "S"),
        histograms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_match_the_case_table() {
        let dims: Vec<usize> = UpdatingCase::all().iter().map(UpdatingCase::dimension).collect();
        assert_eq!(dims, vec![22, 32, 23, 33, 30, 40]);
        let nf: Vec<usize> = UpdatingCase::all().iter().map(UpdatingCase::n_freq_points).collect();
        assert_eq!(nf, vec![80, 140, 80, 140, 80, 140]);
        assert!(UpdatingCase::table(7).is_err());
    }

    #[test]
    fn prior_follows_parameter_layout() {
        let case = UpdatingCase::table(3).unwrap();
        let prior = case.prior().unwrap();
        assert_eq!(prior.dim(), 23);
        assert_eq!(prior.bounds()[0], ALPHA_BOUNDS);
        assert_eq!(prior.bounds()[10], ZETA_BOUNDS);
        assert_eq!(prior.bounds()[15], S_BOUNDS);
        assert_eq!(prior.bounds()[22], S_E_BOUNDS);
        assert_eq!(case.parameter_names()[22], "S_e_10");
    }

    #[test]
    fn histogram_mass_lands_in_the_right_bins() {
        let h = Histogram::new("x".into(), (0.0, 1.0), 4, &[0.1, 0.3, 0.99, 1.0], &[0.25; 4]);
        assert_eq!(h.mass, vec![0.25, 0.25, 0.0, 0.5]);
        assert_eq!(h.edges(1), (0.25, 0.5));
    }

    #[test]
    fn median_of_alpha_cov() {
        let p = |cov| ParamSummary { name: String::new(), mean: 1.0, sd: cov, cov, q05: 0.0, q95: 0.0, truth: None };
        let s = CaseSummary {
            case: UpdatingCase::table(1).unwrap(),
            log_evidence: 0.0,
            cov_z_hat: 0.0,
            n_ess: 0.0,
            n_levels: 0,
            n_likelihood_calls: 0,
            terminated_by: Termination::BothCriteria,
            non_pd_evaluations: 0,
            parameters: (0..10).map(|j| p(j as f64)).collect(),
            frequencies: vec![],
            damping: vec![],
            modal_psd: vec![],
            histograms: vec![],
        };
        assert_eq!(s.median_alpha_cov(), 4.5);
    }
}
