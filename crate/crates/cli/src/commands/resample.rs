//! `resample`: re-weight the pooled samples of an earlier `run` and draw an
//! equally weighted posterior sample.

use std::path::Path;

use serde_json::json;
use susbayes::diagnostics::{log_weight_ess, pooled_log_weights};
use susbayes::resampling::{distinct_fraction, posterior_moments, resample_equal, PoolEntry, WeightedPool};
use susbayes::rng;

use super::run::{LEVELS_FILE, POSTERIOR_FILE, SAMPLES_FILE};
use super::theta_header;
use crate::args::ResampleArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use crate::output::{num, output_dir, CsvTable};

const RESAMPLE_STREAM: u64 = u64::MAX - 3;

fn parse(field: &str, what: &str) -> CliResult<f64> {
    field.trim().parse().map_err(|_| CliError::Validation(format!("invalid {what} '{field}'")))
}

fn read_levels(dir: &Path) -> CliResult<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(dir.join(LEVELS_FILE))
        .map_err(|e| CliError::Validation(format!("{}: {e}", dir.join(LEVELS_FILE).display())))?;
    let h = r.headers()?.clone();
    let col = |name: &str| {
        h.iter().position(|c| c == name).ok_or_else(|| CliError::Validation(format!("{LEVELS_FILE} has no column {name}")))
    };
    let (lp, le) = (col("log_p")?, col("log_ell")?);
    r.records().map(|rec| {
        let rec = rec?;
        Ok((parse(&rec[lp], "log_p")?, parse(&rec[le], "log_ell")?))
    })
    .collect()
}

/// `(level, ln L, θ)` of every pooled sample.
fn read_samples(dir: &Path) -> CliResult<(Vec<(usize, f64)>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(dir.join(SAMPLES_FILE))
        .map_err(|e| CliError::Validation(format!("{}: {e}", dir.join(SAMPLES_FILE).display())))?;
    let h = r.headers()?.clone();
    let theta_cols: Vec<usize> = h.iter().enumerate().filter(|(_, c)| c.starts_with("theta_")).map(|(i, _)| i).collect();
    let (lv, ll) = (
        h.iter().position(|c| c == "level").ok_or_else(|| CliError::Validation("samples need a level column".into()))?,
        h.iter().position(|c| c == "log_lik").ok_or_else(|| CliError::Validation("samples need a log_lik column".into()))?,
    );
    let (mut keys, mut thetas) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let level: usize =
            rec[lv].parse().map_err(|_| CliError::Validation(format!("invalid level '{}'", &rec[lv])))?;
        keys.push((level, parse(&rec[ll], "log_lik")?));
        thetas.push(theta_cols.iter().map(|&c| parse(&rec[c], "theta")).collect::<CliResult<Vec<_>>>()?);
    }
    Ok((keys, thetas))
}

pub fn execute(args: &ResampleArgs) -> CliResult<()> {
    let levels = read_levels(&args.input)?;
    let (keys, thetas) = read_samples(&args.input)?;
    if let Some(&(bad, _)) = keys.iter().find(|(l, _)| *l >= levels.len()) {
        return Err(CliError::Validation(format!("sample level {bad} exceeds the {} recorded levels", levels.len())));
    }
    let weights = args.weights.map(Into::into).unwrap_or_default();
    let scheme = args.scheme.map(Into::into).unwrap_or_default();
    let seed = args.seed.unwrap_or(0);
    let log_w = pooled_log_weights(&levels, &keys, weights);
    let kish = log_weight_ess(&log_w)?;
    let count = args.count.unwrap_or_else(|| kish.round().max(1.0) as usize);
    let dim = thetas.first().map_or(0, Vec::len);
    let pool = WeightedPool::from_entries(
        keys.iter()
            .zip(thetas)
            .zip(&log_w)
            .map(|((&(level, log_lik), theta), &log_weight)| PoolEntry { u: Vec::new(), theta, log_lik, level, log_weight })
            .collect(),
    );
    let mut r = rng::stream(seed, RESAMPLE_STREAM, 0);
    let picks = resample_equal(&pool, count, scheme, &mut r)?;
    let (mean, var) = posterior_moments(&pool);

    let name = format!("resample-{}-seed{seed}", json!(weights).as_str().unwrap_or("weights"));
    let dir = match &args.output {
        Some(p) => output_dir(Some(p), &name)?,
        None => output_dir(Some(&args.input.join(&name)), &name)?,
    };
    let mut post = CsvTable::new(&theta_header(dim))?;
    for &i in &picks {
        post.row(pool.entries[i].theta.iter().map(|&t| num(t)))?;
    }
    let files = vec![post.save(&dir, POSTERIOR_FILE)?];
    let mut manifest = Manifest::new("resample");
    manifest.set("input", &args.input)?;
    manifest.set(
        "results",
        json!({
            "weights": weights,
            "scheme": scheme,
            "seed": seed,
            "pool_size": pool.len(),
            "kish_ess": kish,
            "count": count,
            "distinct_fraction": distinct_fraction(&picks),
            "posterior_mean": mean,
            "posterior_sd": var.iter().map(|v| v.sqrt()).collect::<Vec<_>>(),
        }),
    )?;
    manifest.files(&files)?;
    manifest.write(&dir)?;
    println!("{}", dir.display());
    Ok(())
}
