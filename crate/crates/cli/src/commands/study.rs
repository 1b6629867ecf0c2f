//! `study`: R independent runs aggregated into evidence and ESS statistics.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use susbayes::diagnostics::uncertainty;
use susbayes::RunConfig;

use crate::args::StudyArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use crate::output::{opt, output_dir, CsvTable};
use crate::settings::Resolved;

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Outcome of one run of a study.
#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub run: usize,
    pub seed: u64,
    pub log_evidence: Option<f64>,
    pub n_likelihood_calls: Option<u64>,
    pub n_levels: Option<usize>,
    pub cov_z_hat: Option<f64>,
    pub n_ess: Option<f64>,
    pub error: Option<String>,
}

/// Aggregates over the successful runs. Dispersion statistics need at
/// least two runs and are absent otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub runs_ok: usize,
    pub runs_failed: usize,
    pub mean_log_z: Option<f64>,
    pub sd_log_z: Option<f64>,
    /// `sd(ln ẑ) / |mean(ln ẑ)|`.
    pub cov_log_z: Option<f64>,
    /// `sd(ẑ) / mean(ẑ)`.
    pub cov_z: Option<f64>,
    pub mean_predicted_cov_z: Option<f64>,
    pub median_predicted_cov_z: Option<f64>,
    pub mean_n_cal: Option<f64>,
    pub mean_ess_over_ncal: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn sd(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    (v.len() >= 2).then(|| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

fn median(v: &[f64]) -> Option<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(s[n / 2]),
        _ => Some(0.5 * (s[n / 2 - 1] + s[n / 2])),
    }
}

pub fn summarize(rows: &[RunRow]) -> StudySummary {
    let ok: Vec<&RunRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let log_z: Vec<f64> = ok.iter().filter_map(|r| r.log_evidence).collect();
    let n_cal: Vec<f64> = ok.iter().filter_map(|r| r.n_likelihood_calls.map(|n| n as f64)).collect();
    let predicted: Vec<f64> = ok.iter().filter_map(|r| r.cov_z_hat).collect();
    let ratio: Vec<f64> = ok
        .iter()
        .filter_map(|r| Some(r.n_ess? / r.n_likelihood_calls? as f64))
        .collect();
    let mean_log_z = mean(&log_z);
    let sd_log_z = sd(&log_z);
    // Linear-scale c.o.v. computed relative to the largest estimate.
    let cov_z = log_z.iter().copied().reduce(f64::max).and_then(|top| {
        let z: Vec<f64> = log_z.iter().map(|l| (l - top).exp()).collect();
        Some(sd(&z)? / mean(&z)?)
    });
    StudySummary {
        runs_ok: ok.len(),
        runs_failed: rows.len() - ok.len(),
        cov_log_z: sd_log_z.zip(mean_log_z).map(|(s, m)| s / m.abs()),
        mean_log_z,
        sd_log_z,
        cov_z,
        mean_predicted_cov_z: mean(&predicted),
        median_predicted_cov_z: median(&predicted),
        mean_n_cal: mean(&n_cal),
        mean_ess_over_ncal: mean(&ratio),
    }
}

pub fn execute(args: &StudyArgs) -> CliResult<()> {
    let resolved = Resolved::new(&args.sampler)?;
    let spec = resolved.benchmark(args.benchmark.as_deref(), args.dim)?;
    let config = resolved.config(RunConfig::default())?;
    let runs = args.runs.or(resolved.file.study.runs).unwrap_or(1);
    if runs == 0 {
        return Err(CliError::Validation("runs must be at least 1".into()));
    }
    let workers = args.workers.or(resolved.file.study.workers);
    let weights = resolved.weights;
    let dir = output_dir(resolved.output.as_deref(), &format!("study-{spec}-seed{}-r{runs}", config.seed))?;

    let problem = spec.problem();
    let one = |r: usize| -> RunRow {
        let seed = config.seed.wrapping_add(r as u64);
        let cfg = RunConfig { seed, ..config.clone() };
        let outcome = susbayes::run(&problem, &cfg).and_then(|sus| Ok((uncertainty(&sus, weights)?, sus)));
        match outcome {
            Ok((rep, sus)) => RunRow {
                run: r,
                seed,
                log_evidence: Some(sus.log_evidence),
                n_likelihood_calls: Some(sus.n_likelihood_calls),
                n_levels: Some(sus.n_levels()),
                cov_z_hat: Some(rep.cov_z_hat),
                n_ess: Some(rep.n_ess),
                error: None,
            },
            Err(e) => RunRow {
                run: r,
                seed,
                log_evidence: None,
                n_likelihood_calls: None,
                n_levels: None,
                cov_z_hat: None,
                n_ess: None,
                error: Some(e.to_string()),
            },
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    let rows: Vec<RunRow> = pool.install(|| (0..runs).into_par_iter().map(one).collect());
    let summary = summarize(&rows);

    let mut table = CsvTable::new(&["run", "seed", "log_evidence", "n_likelihood_calls", "n_levels", "cov_z_hat", "n_ess", "error"])?;
    for r in &rows {
        table.row([
            r.run.to_string(),
            r.seed.to_string(),
            opt(r.log_evidence),
            r.n_likelihood_calls.map(|n| n.to_string()).unwrap_or_default(),
            r.n_levels.map(|n| n.to_string()).unwrap_or_default(),
            opt(r.cov_z_hat),
            opt(r.n_ess),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    let mut files = vec![table.save(&dir, RUNS_FILE)?];
    let pct = |x: Option<f64>| opt(x.map(|v| 100.0 * v));
    let mut sum = CsvTable::new(&[
        "benchmark",
        "dim",
        "runs_ok",
        "runs_failed",
        "analytical",
        "mean_log_z",
        "sd_log_z",
        "cov_log_z_pct",
        "cov_z_pct",
        "mean_predicted_cov_z_pct",
        "median_predicted_cov_z_pct",
        "mean_n_cal",
        "mean_ess_over_ncal_pct",
    ])?;
    sum.row([
        spec.name.to_string(),
        spec.dim.to_string(),
        summary.runs_ok.to_string(),
        summary.runs_failed.to_string(),
        opt(spec.reference_log_evidence()),
        opt(summary.mean_log_z),
        opt(summary.sd_log_z),
        pct(summary.cov_log_z),
        pct(summary.cov_z),
        pct(summary.mean_predicted_cov_z),
        pct(summary.median_predicted_cov_z),
        opt(summary.mean_n_cal),
        pct(summary.mean_ess_over_ncal),
    ])?;
    files.push(sum.save(&dir, SUMMARY_FILE)?);

    let mut manifest = Manifest::new("study");
    manifest.set("target", json!({ "benchmark": spec.name, "dim": spec.dim }))?;
    manifest.set("config", &config)?;
    manifest.set("runs", runs)?;
    manifest.set("weights", weights)?;
    manifest.set("results", &summary)?;
    manifest.files(&files)?;
    manifest.write(&dir)?;
    println!("{}", dir.display());
    if summary.runs_ok == 0 {
        return Err(CliError::Runtime(format!("all {runs} runs failed; see {}", dir.join(RUNS_FILE).display())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(log_z: f64) -> RunRow {
        RunRow {
            run: 0,
            seed: 0,
            log_evidence: Some(log_z),
            n_likelihood_calls: Some(100),
            n_levels: Some(3),
            cov_z_hat: Some(0.1),
            n_ess: Some(10.0),
            error: None,
        }
    }

    #[test]
    fn single_run_has_no_dispersion() {
        let s = summarize(&[row(-2.0)]);
        assert_eq!(s.cov_log_z, None);
        assert_eq!(s.cov_z, None);
        assert_eq!(s.mean_log_z, Some(-2.0));
        assert_eq!(s.mean_ess_over_ncal, Some(0.1));
    }

    #[test]
    fn failures_are_counted_not_averaged() {
        let mut bad = row(0.0);
        bad.error = Some("boom".into());
        let s = summarize(&[row(-1.0), row(-3.0), bad]);
        assert_eq!((s.runs_ok, s.runs_failed), (2, 1));
        assert_eq!(s.mean_log_z, Some(-2.0));
        assert!((s.cov_log_z.unwrap() - 2f64.sqrt() / 2.0).abs() < 1e-12);
    }
}
