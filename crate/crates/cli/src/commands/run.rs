//! `run`: one evidence estimate with its pooled and resampled posterior.

use serde_json::json;
use susbayes::benchmarks::BenchmarkSpec;
use susbayes::bus::{bus_metrics, run_bus};
use susbayes::diagnostics::{uncertainty, WeightScheme};
use susbayes::resampling::{build_pool, distinct_fraction, posterior_moments, resample_equal, Scheme};
use susbayes::{rng, RunConfig};

use super::theta_header;
use crate::args::RunArgs;
use crate::error::CliResult;
use crate::manifest::Manifest;
use crate::output::{num, opt, output_dir, CsvTable, FileRecord};
use crate::settings::Resolved;

pub const SAMPLES_FILE: &str = "samples.csv";
pub const LEVELS_FILE: &str = "levels.csv";
pub const POSTERIOR_FILE: &str = "posterior.csv";
pub const FPF_FILE: &str = "fpf.csv";

/// Stream index reserved for posterior resampling.
const RESAMPLE_STREAM: u64 = u64::MAX - 2;

pub fn execute(args: &RunArgs) -> CliResult<()> {
    let resolved = Resolved::new(&args.sampler)?;
    let spec = resolved.benchmark(args.benchmark.as_deref(), args.dim)?;
    let config = resolved.config(RunConfig::default())?;
    let bus = args.bus || resolved.file.target.bus.unwrap_or(false);
    let name = format!("{}-{spec}-seed{}", if bus { "bus" } else { "run" }, config.seed);
    let dir = output_dir(resolved.output.as_deref(), &name)?;

    let mut manifest = Manifest::new(if bus { "run --bus" } else { "run" });
    manifest.set("target", json!({ "benchmark": spec.name, "dim": spec.dim }))?;
    manifest.set("config", &config)?;
    if bus {
        let log_c_inv = args.log_c_inv.or(resolved.file.target.log_c_inv).unwrap_or_else(|| spec.log_lik_sup());
        run_bus_target(&spec, &config, log_c_inv, &dir, &mut manifest)?;
    } else {
        let scheme = args.scheme.map(Into::into).or(resolved.file.posterior.scheme).unwrap_or_default();
        let count = args.resample_count.or(resolved.file.posterior.count);
        run_sus_target(&spec, &config, resolved.weights, scheme, count, &dir, &mut manifest)?;
    }
    manifest.write(&dir)?;
    println!("{}", dir.display());
    Ok(())
}

fn run_sus_target(
    spec: &BenchmarkSpec,
    config: &RunConfig,
    weights: WeightScheme,
    scheme: Scheme,
    count: Option<usize>,
    dir: &std::path::Path,
    manifest: &mut Manifest,
) -> CliResult<()> {
    let problem = spec.problem();
    let sus = susbayes::run(&problem, config)?;
    let report = uncertainty(&sus, weights)?;
    let pool = build_pool(&sus, &problem, weights);
    let count = count.unwrap_or_else(|| report.n_ess.round().max(1.0) as usize);
    let mut r = rng::stream(config.seed, RESAMPLE_STREAM, 0);
    let picks = resample_equal(&pool, count, scheme, &mut r)?;
    let (mean, var) = posterior_moments(&pool);
    let d = spec.dim;

    let mut files: Vec<FileRecord> = Vec::new();
    let mut header: Vec<String> = ["level", "chain", "step", "log_lik", "log_weight"].map(String::from).to_vec();
    header.extend(theta_header(d));
    let mut samples = CsvTable::new(&header)?;
    let pooled = sus.levels.iter().flat_map(|l| l.samples.iter().map(move |s| (l.level_index, s)));
    for ((level, s), e) in pooled.zip(&pool.entries) {
        let mut row = vec![level.to_string(), s.chain.to_string(), s.step.to_string(), num(s.log_lik), num(e.log_weight)];
        row.extend(e.theta.iter().map(|&t| num(t)));
        samples.row(row)?;
    }
    files.push(samples.save(dir, SAMPLES_FILE)?);

    let mut levels = CsvTable::new(&[
        "level", "log_p", "log_ell", "log_ell_next", "p_c_hat", "log_z_hat", "acceptance_rate", "n_chains", "n_steps",
    ])?;
    for l in &sus.levels {
        levels.row([
            l.level_index.to_string(),
            num(l.log_p),
            num(l.log_ell),
            num(l.log_ell_next),
            num(l.p_c_hat),
            num(l.log_z_hat),
            opt(l.acceptance_rate),
            l.n_chains.to_string(),
            l.n_steps.to_string(),
        ])?;
    }
    files.push(levels.save(dir, LEVELS_FILE)?);

    let mut fpf = CsvTable::new(&["log_ell", "log_p_f"])?;
    for (ell, log_p) in sus.fpf_points() {
        fpf.row([num(ell), num(log_p)])?;
    }
    files.push(fpf.save(dir, FPF_FILE)?);

    let mut post = CsvTable::new(&theta_header(d))?;
    for &i in &picks {
        post.row(pool.entries[i].theta.iter().map(|&t| num(t)))?;
    }
    files.push(post.save(dir, POSTERIOR_FILE)?);

    let n_cal = sus.n_likelihood_calls as f64;
    manifest.set(
        "results",
        json!({
            "log_evidence": sus.log_evidence,
            "reference_log_evidence": spec.reference_log_evidence(),
            "n_levels": sus.n_levels(),
            "n_likelihood_calls": sus.n_likelihood_calls,
            "terminated_by": sus.terminated_by,
            "tail_log_z": sus.tail_log_z,
            "warnings": sus.warnings,
            "cov_z_hat": report.cov_z_hat,
            "cov_z_check": report.cov_z_check,
            "clamped_correlations": report.clamped_correlations,
            "n_ess": report.n_ess,
            "ess_per_call": report.n_ess / n_cal,
            "weights": weights,
            "resample_scheme": scheme,
            "resample_count": count,
            "resample_distinct_fraction": distinct_fraction(&picks),
            "posterior_mean": mean,
            "posterior_sd": var.iter().map(|v| v.sqrt()).collect::<Vec<_>>(),
        }),
    )?;
    manifest.files(&files)
}

fn run_bus_target(
    spec: &BenchmarkSpec,
    config: &RunConfig,
    log_c_inv: f64,
    dir: &std::path::Path,
    manifest: &mut Manifest,
) -> CliResult<()> {
    let problem = spec.problem();
    let bus = run_bus(&problem, log_c_inv, config)?;
    let metrics = bus_metrics(&bus);
    let mut files = Vec::new();
    let mut post = CsvTable::new(&theta_header(spec.dim))?;
    for u in bus.posterior_u() {
        post.row(problem.prior().to_physical(&u).iter().map(|&t| num(t)))?;
    }
    files.push(post.save(dir, POSTERIOR_FILE)?);
    let mut levels = CsvTable::new(&["level", "threshold", "p_c_hat", "acceptance_rate", "delta_p"])?;
    for (l, d) in bus.levels.iter().zip(&metrics.delta_p) {
        levels.row([l.level_index.to_string(), num(l.threshold), num(l.p_c_hat), opt(l.acceptance_rate), num(*d)])?;
    }
    files.push(levels.save(dir, LEVELS_FILE)?);
    manifest.set(
        "results",
        json!({
            "log_evidence": bus.log_evidence,
            "reference_log_evidence": spec.reference_log_evidence(),
            "log_c_inv": bus.log_c_inv,
            "log_pf": bus.log_pf,
            "n_levels": bus.levels.len(),
            "n_likelihood_calls": bus.n_likelihood_calls,
            "terminated_by": bus.terminated_by,
            "cov_z": metrics.cov_z,
            "n_ess": metrics.n_ess,
        }),
    )?;
    manifest.files(&files)
}
