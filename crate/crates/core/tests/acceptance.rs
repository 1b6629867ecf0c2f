//! Acceptance criteria, one test per criterion.
//!
//! Each test prints a single `criterion N: PASS|FAIL` line with the measured
//! values before asserting. The repeated-run criteria take minutes and are
//! ignored by default; run the whole suite with
//! `cargo test --release -p susbayes --test acceptance -- --include-ignored --nocapture --test-threads 1`.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use susbayes::benchmarks::{
    log_normal, norm_loggamma_marginal_cdf, oracle_log_evidence, Benchmark, BenchmarkSpec,
};
use susbayes::bus::{bus_metrics, run_bus};
use susbayes::cs_mh::{run_level, LevelPlan, Seed};
use susbayes::diagnostics::{g_factor, g_series, uncertainty, WeightScheme};
use susbayes::engine::subarea_log;
use susbayes::fe::{run_case, CaseSummary, CaseTruth, FeOptions, SyntheticConfig, UpdatingCase, TRUE_ALPHA};
use susbayes::math::{integrate, mean_var, normal_pdf, phi};
use susbayes::resampling::{build_pool, resample_equal, Scheme};
use susbayes::rng::stream;
use susbayes::{run, BayesProblem, PriorSpec, RunConfig};

fn report(criterion: usize, pass: bool, detail: String) {
    println!("criterion {criterion}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Outcome of one repeated-run study.
struct Study {
    log_z: Vec<f64>,
    n_cal: Vec<f64>,
    predicted_cov: Vec<f64>,
    ess_ratio: Vec<f64>,
}

impl Study {
    fn run(spec: &BenchmarkSpec, runs: u64, base: RunConfig) -> Self {
        let problem = spec.problem();
        let rows: Vec<(f64, f64, f64, f64)> = (0..runs)
            .into_par_iter()
            .map(|r| {
                let config = RunConfig { seed: base.seed + r, ..base.clone() };
                let result = run(&problem, &config).unwrap();
                let u = uncertainty(&result, WeightScheme::default()).unwrap();
                let n_cal = result.n_likelihood_calls as f64;
                (result.log_evidence, n_cal, u.cov_z_hat, u.n_ess / n_cal)
            })
            .collect();
        Self {
            log_z: rows.iter().map(|r| r.0).collect(),
            n_cal: rows.iter().map(|r| r.1).collect(),
            predicted_cov: rows.iter().map(|r| r.2).collect(),
            ess_ratio: rows.iter().map(|r| r.3).collect(),
        }
    }

    fn mean_log_z(&self) -> f64 {
        mean_var(&self.log_z).0
    }

    /// Sample c.o.v. of `ln ẑ` across runs.
    fn cov_log_z(&self) -> f64 {
        let (m, v) = sample_mean_var(&self.log_z);
        v.sqrt() / m.abs()
    }

    /// Sample c.o.v. of `ẑ` across runs.
    fn cov_z(&self) -> f64 {
        let shift = self.mean_log_z();
        let z: Vec<f64> = self.log_z.iter().map(|l| (l - shift).exp()).collect();
        let (m, v) = sample_mean_var(&z);
        v.sqrt() / m
    }
}

fn sample_mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (m, v) = mean_var(x);
    (m, v * n / (n - 1.0))
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn shells(dim: usize) -> BenchmarkSpec {
    BenchmarkSpec::new(Benchmark::Shells, dim).unwrap()
}

fn shells_2d_study() -> &'static Study {
    static STUDY: OnceLock<Study> = OnceLock::new();
    STUDY.get_or_init(|| Study::run(&shells(2), 200, RunConfig { seed: 1, ..Default::default() }))
}

/// One-dimensional toy: standard-normal likelihood, uniform prior on (−6, 6).
fn normal_toy() -> BayesProblem {
    BayesProblem::from_fn("normal-toy", PriorSpec::uniform_box(1, -6.0, 6.0).unwrap(), |t: &[f64]| {
        log_normal(t[0], 0.0, 1.0)
    })
}

const TOY_LOG_SUP: f64 = -0.918_938_533_204_672_7;

/// Half-width of `{θ : ln N(θ; 0, 1) > ℓ}`.
fn toy_half_width(ell: f64) -> f64 {
    (-2.0 * (ell - TOY_LOG_SUP)).sqrt()
}

#[test]
fn criterion_01_oracle_agreement() {
    let table = [
        (Benchmark::Eggbox, 2, 235.86),
        (Benchmark::Shells, 2, -1.75),
        (Benchmark::Shells, 5, -5.67),
        (Benchmark::Shells, 10, -14.59),
        (Benchmark::Shells, 20, -36.09),
        (Benchmark::Shells, 30, -60.13),
        (Benchmark::NormLoggamma, 20, -81.89),
    ];
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (name, dim, expected) in table {
        let value = oracle_log_evidence(&BenchmarkSpec::new(name, dim).unwrap()).unwrap();
        worst = worst.max((value - expected).abs());
        detail.push(format!("{name} d{dim} {value:.3}"));
    }
    report(1, worst <= 0.02, format!("max |Δ| = {worst:.4} ({})", detail.join(", ")));
}

#[test]
#[ignore = "200 repeated runs"]
fn criterion_02_shells_2d_evidence() {
    let s = shells_2d_study();
    let mean = s.mean_log_z();
    let cov = s.cov_log_z();
    let n_cal = mean_var(&s.n_cal).0;
    let pass = (mean + 1.75).abs() <= 0.05 && (0.02..=0.08).contains(&cov) && (3.5e3..=5.5e3).contains(&n_cal);
    report(2, pass, format!("mean ln ẑ {mean:.4}, c.o.v. {:.2}%, mean N_cal {n_cal:.0}", 100.0 * cov));
}

#[test]
#[ignore = "50 repeated runs"]
fn criterion_03_eggbox_evidence() {
    let s = Study::run(&BenchmarkSpec::new(Benchmark::Eggbox, 2).unwrap(), 50, RunConfig { seed: 1, ..Default::default() });
    let mean = s.mean_log_z();
    let cov = s.cov_log_z();
    let pass = (mean - 235.86).abs() <= 0.5 && cov <= 0.005;
    report(3, pass, format!("mean ln ẑ {mean:.3}, c.o.v. {:.3}%, mean N_cal {:.0}", 100.0 * cov, mean_var(&s.n_cal).0));
}

#[test]
#[ignore = "50 repeated runs at N = 7000"]
fn criterion_04_shells_10d_evidence() {
    // N = 7000 matches the likelihood budget of the reference comparison;
    // at N = 1000 the spread of ln ẑ is about 3%.
    let config = RunConfig { n_samples: 7000, seed: 1, ..Default::default() };
    let s = Study::run(&shells(10), 50, config);
    let mean = s.mean_log_z();
    let cov = s.cov_log_z();
    let pass = (mean + 14.59).abs() <= 0.3 && cov <= 0.02;
    report(4, pass, format!("mean ln ẑ {mean:.3}, c.o.v. {:.2}%, mean N_cal {:.0}", 100.0 * cov, mean_var(&s.n_cal).0));
}

#[test]
#[ignore = "200 repeated runs"]
fn criterion_05_variance_calibration() {
    let s = shells_2d_study();
    let predicted = median(&s.predicted_cov);
    let empirical = s.cov_z();
    let ratio = predicted / empirical;
    report(
        5,
        (0.5..=2.0).contains(&ratio),
        format!("median predicted c.o.v. {:.2}%, empirical c.o.v. of ẑ {:.2}%, ratio {ratio:.3}", 100.0 * predicted, 100.0 * empirical),
    );
}

#[test]
#[ignore = "2 × 100 repeated runs"]
fn criterion_06_ess_ratio() {
    let sh = Study::run(&shells(10), 100, RunConfig { seed: 1, ..Default::default() });
    let nl = Study::run(
        &BenchmarkSpec::new(Benchmark::NormLoggamma, 20).unwrap(),
        100,
        RunConfig { seed: 1, max_levels: 200, ..Default::default() },
    );
    let (r_sh, r_nl) = (mean_var(&sh.ess_ratio).0, mean_var(&nl.ess_ratio).0);
    let within = |r: f64, target: f64| (r / target - 1.0).abs() <= 0.5;
    report(
        6,
        within(r_sh, 0.0435) && within(r_nl, 0.0183),
        format!("shells d10 N_ess/N_cal {:.2}% (target 4.35%), norm_loggamma d20 {:.2}% (target 1.83%)", 100.0 * r_sh, 100.0 * r_nl),
    );
}

#[test]
fn criterion_07_fixed_threshold_unbiasedness() {
    let problem = normal_toy();
    // Level thresholds ℓ_0 = −∞ < ℓ_1 < ℓ_2 < ℓ_3 held fixed.
    let ells = [f64::NEG_INFINITY, -4.0, -2.0, -1.2];
    let n = 100;
    let reps = 1000;
    let log_p = |ell: f64| {
        if ell == f64::NEG_INFINITY {
            0.0
        } else {
            (2.0 * toy_half_width(ell) / 12.0).ln()
        }
    };
    let mut detail = Vec::new();
    let mut pass = true;
    for i in 0..3 {
        let (ell, ell_next) = (ells[i], ells[i + 1]);
        let (l_i, l_next) = (ell.exp(), ell_next.exp());
        // Quadrature of the capped subarea ∫_{L > l_i} (min(L, l_{i+1}) − l_i) π dθ.
        let outer = if i == 0 { 6.0 } else { toy_half_width(ell) };
        let inner = toy_half_width(ell_next);
        let f = |t: f64| (normal_pdf(t).min(l_next) - l_i).max(0.0) / 12.0;
        let quad: f64 = [(-outer, -inner), (-inner, inner), (inner, outer)]
            .iter()
            .map(|&(a, b)| integrate(f, a, b, 1e-15, 1e-12, 200).unwrap().0)
            .sum();
        let estimates: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(700 + i as u64, r, 0);
                let mut log_liks = Vec::with_capacity(n);
                while log_liks.len() < n {
                    let u: f64 = rng.sample(StandardNormal);
                    let y = problem.log_likelihood_in_u(&[u]).unwrap();
                    if y > ell {
                        log_liks.push(y);
                    }
                }
                subarea_log(log_p(ell), &log_liks, ell, ell_next).unwrap().1.exp()
            })
            .collect();
        let (mean, var) = sample_mean_var(&estimates);
        let se = (var / reps as f64).sqrt();
        let z = (mean - quad) / se;
        pass &= z.abs() <= 3.0;
        detail.push(format!("ẑ_{i} {mean:.5e} vs {quad:.5e} ({z:+.2} SE)"));
    }
    report(7, pass, detail.join(", "));
}

#[test]
fn criterion_08_cs_mh_stationarity() {
    let n_c = 2000;
    let n_s = 10;
    let plan = |threshold: f64, seed: u64| LevelPlan { threshold, n_steps: n_s, batch_size: 200, lambda: 0.6, seed, level: 1 };
    let score = |u: &[f64]| Ok(u[0]);

    // Truncated target u > a, seeded exactly from it by rejection sampling.
    let a = 1.2816;
    let mut rng = stream(81, 0, 0);
    let mut seeds = Vec::new();
    while seeds.len() < n_c {
        let u: f64 = rng.sample(StandardNormal);
        if u > a {
            seeds.push(Seed { u: vec![u], log_lik: u });
        }
    }
    let out = run_level(&seeds, plan(a, 82), &score).unwrap();
    let tail = 1.0 - phi(a);
    let mu = normal_pdf(a) / tail;
    let var = 1.0 + a * mu - mu * mu;
    // Standard errors from the spread of chain means.
    let chain_means = |g: &dyn Fn(f64) -> f64| -> Vec<f64> {
        out.samples.chunks(n_s).map(|c| c.iter().map(|s| g(s.u[0])).sum::<f64>() / n_s as f64).collect()
    };
    let m1 = chain_means(&|u| u);
    let m2 = chain_means(&|u| (u - mu).powi(2));
    let z_of = |m: &[f64], target: f64| {
        let (mean, v) = sample_mean_var(m);
        (mean, (mean - target) / (v / m.len() as f64).sqrt())
    };
    let (mean, z_mean) = z_of(&m1, mu);
    let (second, z_var) = z_of(&m2, var);

    // ℓ = −∞: every proposal accepted; the final chain states are
    // independent across chains.
    let mut rng = stream(83, 0, 0);
    let free: Vec<Seed> = (0..n_c)
        .map(|_| {
            let u: f64 = rng.sample(StandardNormal);
            Seed { u: vec![u], log_lik: u }
        })
        .collect();
    let out = run_level(&free, plan(f64::NEG_INFINITY, 84), &score).unwrap();
    let mut last: Vec<f64> = out.samples.chunks(n_s).map(|c| c[n_s - 1].u[0]).collect();
    last.sort_by(f64::total_cmp);
    let n = last.len() as f64;
    let ks = last
        .iter()
        .enumerate()
        .map(|(i, &x)| (phi(x) - i as f64 / n).max((i + 1) as f64 / n - phi(x)))
        .fold(0.0, f64::max);
    let ks_crit = 1.628 / n.sqrt();

    let pass = z_mean.abs() <= 3.0 && z_var.abs() <= 3.0 && ks < ks_crit && out.accepted == out.proposals;
    report(
        8,
        pass,
        format!(
            "mean {mean:.4} vs {mu:.4} ({z_mean:+.2} SE), variance {second:.4} vs {var:.4} ({z_var:+.2} SE), KS {ks:.4} < {ks_crit:.4}"
        ),
    );
}

#[test]
fn criterion_09_g_factor_closed_form() {
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let rho = k as f64 / 10.0;
        for n_s in [2, 5, 10, 20] {
            worst = worst.max((g_factor(rho, n_s) - g_series(rho, n_s)).abs());
        }
    }
    let limits = [2, 5, 10, 20]
        .iter()
        .all(|&n_s| g_factor(0.0, n_s) == 0.0 && (g_factor(1.0 - 1e-12, n_s) - (n_s as f64 - 1.0)).abs() < 1e-6);
    report(9, worst <= 1e-12 && limits, format!("max |closed − series| = {worst:.2e}, limits hold: {limits}"));
}

#[test]
#[ignore = "long norm_loggamma run"]
fn criterion_10_posterior_marginals() {
    let spec = BenchmarkSpec::new(Benchmark::NormLoggamma, 20).unwrap();
    let problem = spec.problem();
    let config = RunConfig { seed: 1, max_levels: 200, ..Default::default() };
    let result = run(&problem, &config).unwrap();
    let scheme = WeightScheme::default();
    let pool = build_pool(&result, &problem, scheme);
    let count = uncertainty(&result, scheme).unwrap().n_ess.round().max(1.0) as usize;
    let idx = resample_equal(&pool, count, Scheme::Multinomial, &mut stream(config.seed, u64::MAX - 2, 0)).unwrap();
    // Equiprobable bins under each analytic marginal, at least 5 expected per bin.
    let bins = (count / 5).clamp(2, 20);
    let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
    let mut failed = Vec::new();
    let mut worst: f64 = 0.0;
    for j in 0..20 {
        let mut observed = vec![0usize; bins];
        for &k in &idx {
            let q = norm_loggamma_marginal_cdf(j, 20, pool.entries[k].theta[j]);
            observed[((q * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let expected = count as f64 / bins as f64;
        let chi2: f64 = observed.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        worst = worst.max(chi2);
        if chi2 > critical {
            failed.push(j + 1);
        }
    }
    report(
        10,
        failed.is_empty(),
        format!(
            "{count} resampled points, {bins} bins, critical χ² {critical:.1}, worst {worst:.1}, failing coordinates {failed:?}"
        ),
    );
}

fn fe_case(id: usize) -> CaseSummary {
    let case = UpdatingCase::table(id).unwrap();
    let data = susbayes::fe::synthesize_dataset(&SyntheticConfig::default(), &case).unwrap();
    let truth = CaseTruth::new(case.true_params(0.01, 1e-10, 1e-10)).unwrap();
    let config = RunConfig { seed: 1, max_levels: 300, ..Default::default() };
    run_case(&case, &config, &data, FeOptions::default(), Some(&truth)).unwrap()
}

#[test]
#[ignore = "four model-updating cases"]
fn criterion_11_fe_model_updating() {
    const REFERENCE_HZ: [f64; 10] = [0.920, 2.848, 4.594, 6.114, 7.784, 9.268, 10.609, 11.218, 11.993, 12.941];
    let cases: Vec<CaseSummary> = (3..=6).map(fe_case).collect();
    let case4 = &cases[1];
    let worst_freq = case4
        .frequencies
        .iter()
        .zip(REFERENCE_HZ)
        .map(|(p, f)| (p.mean - f).abs() / f)
        .fold(0.0, f64::max);
    let covered = case4.frequencies.iter().filter(|p| p.covers_truth() == Some(true)).count();
    let worst_alpha = cases[2..]
        .iter()
        .flat_map(|c| c.alpha().iter().zip(TRUE_ALPHA).map(|(p, t)| (p.mean - t).abs()))
        .fold(0.0, f64::max);
    let covs: Vec<f64> = cases.iter().map(CaseSummary::median_alpha_cov).collect();
    let monotone = covs.windows(2).all(|w| w[1] <= w[0]);
    let pass = worst_freq <= 0.01 && covered == 10 && worst_alpha <= 0.03 && monotone;
    report(
        11,
        pass,
        format!(
            "case 4 max frequency error {:.2}%, {covered}/10 truths in 90% CI; cases 5–6 max |α − α̃| {worst_alpha:.4}; median α c.o.v. cases 3–6 {:?}",
            100.0 * worst_freq,
            covs.iter().map(|c| format!("{:.2}%", 100.0 * c)).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_12_bus_cross_check() {
    let config = RunConfig { seed: 12, ..Default::default() };
    let shells_spec = shells(2);
    let targets = [("normal toy", normal_toy(), TOY_LOG_SUP), ("shells d2", shells_spec.problem(), shells_spec.log_lik_sup())];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, problem, log_sup) in targets {
        let sus = run(&problem, &config).unwrap();
        let sus_cov = uncertainty(&sus, WeightScheme::default()).unwrap().cov_z_hat;
        let bus = run_bus(&problem, log_sup, &config).unwrap();
        let metrics = bus_metrics(&bus);
        let combined = (sus_cov.powi(2) + metrics.cov_z.powi(2)).sqrt();
        let gap = (sus.log_evidence - bus.log_evidence).abs();
        let ess_ok = metrics.n_ess.is_finite() && metrics.n_ess > 0.0;
        pass &= gap <= 3.0 * combined && ess_ok;
        detail.push(format!(
            "{name}: SuS {:.4} vs BUS {:.4} (|Δ| {gap:.4} ≤ {:.4}), BUS N_ess {:.0} ({:.1}% of N_cal)",
            sus.log_evidence,
            bus.log_evidence,
            3.0 * combined,
            metrics.n_ess,
            100.0 * metrics.n_ess / bus.n_likelihood_calls as f64
        ));
    }
    report(12, pass, detail.join("; "));
}
