//! `femu`: model updating of one test case with a Table-5-style report.

use serde_json::json;
use susbayes::fe::{run_case, CaseSummary, CaseTruth, FeOptions, SpectralDataset, SyntheticConfig, UpdatingCase};
use susbayes::fe::synth::synthesize_full;
use susbayes::RunConfig;

use crate::args::FemuArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use crate::output::{num, opt, output_dir, CsvTable, FileRecord};
use crate::settings::Resolved;

/// Model-updating runs need many more levels than the benchmarks.
pub const DEFAULT_MAX_LEVELS: usize = 300;
pub const MODAL_FILE: &str = "modal.csv";
pub const PARAMETERS_FILE: &str = "parameters.csv";
pub const HISTOGRAMS_FILE: &str = "histograms.csv";
pub const DATASET_DIR: &str = "dataset";

pub fn execute(args: &FemuArgs) -> CliResult<()> {
    let resolved = Resolved::new(&args.sampler)?;
    let case_id = args
        .case
        .or(resolved.file.femu.case)
        .ok_or_else(|| CliError::Validation("no case given (use --case 1..6)".into()))?;
    let case = UpdatingCase::table(case_id)?;
    let config = resolved.config(RunConfig { max_levels: DEFAULT_MAX_LEVELS, ..RunConfig::default() })?;
    let options = FeOptions {
        scaling: args.scaling.map(Into::into).or(resolved.file.femu.scaling).unwrap_or_default(),
        weights: resolved.weights,
    };
    let dir = output_dir(resolved.output.as_deref(), &format!("femu-case{case_id}-seed{}", config.seed))?;

    let data_path = args.data.clone().or(resolved.file.femu.data.clone());
    let (data, truth, source) = match (args.synthesize, data_path) {
        (true, _) => {
            let synth = SyntheticConfig {
                seed: args.data_seed.or(resolved.file.femu.data_seed).unwrap_or(config.seed),
                n_segments: args.segments.or(resolved.file.femu.segments).unwrap_or(SyntheticConfig::default().n_segments),
                ..SyntheticConfig::default()
            };
            let full = synthesize_full(&synth)?;
            full.save(&dir.join(DATASET_DIR))?;
            let truth = CaseTruth::new(case.true_params(synth.zeta[0], synth.s[0], synth.s_e))?;
            (full.for_case(&case)?, Some(truth), json!({ "synthetic": synth }))
        }
        (false, Some(path)) => {
            let loaded = SpectralDataset::load(&path)
                .map_err(|e| CliError::Validation(format!("cannot load dataset {}: {e}", path.display())))?;
            (loaded.for_case(&case)?, None, json!({ "path": path }))
        }
        (false, None) => return Err(CliError::Validation("give either --data <dir> or --synthesize".into())),
    };

    let summary = run_case(&case, &config, &data, options, truth.as_ref())?;
    let files = write_tables(&summary, &dir)?;
    let mut manifest = Manifest::new("femu");
    manifest.set("case", &case)?;
    manifest.set("config", &config)?;
    manifest.set("options", options)?;
    manifest.set("data", source)?;
    manifest.set(
        "note",
        "log_evidence omits the parameter-independent constant of the spectral likelihood",
    )?;
    manifest.set("results", &summary)?;
    manifest.files(&files)?;
    manifest.write(&dir)?;
    println!("{}", dir.display());
    Ok(())
}

fn write_tables(s: &CaseSummary, dir: &std::path::Path) -> CliResult<Vec<FileRecord>> {
    let mut modal = CsvTable::new(&[
        "mode",
        "f_true_hz",
        "f_mean_hz",
        "f_cov_pct",
        "f_q05_hz",
        "f_q95_hz",
        "zeta_true_pct",
        "zeta_mean_pct",
        "zeta_cov_pct",
        "s_true_ug2_per_hz",
        "s_mean_ug2_per_hz",
        "s_cov_pct",
    ])?;
    let micro_g2 = 1e12;
    for i in 0..s.case.modes_used {
        let (f, z, p) = (&s.frequencies[i], &s.damping[i], &s.modal_psd[i]);
        modal.row([
            (i + 1).to_string(),
            opt(f.truth),
            num(f.mean),
            num(100.0 * f.cov),
            num(f.q05),
            num(f.q95),
            opt(z.truth.map(|v| 100.0 * v)),
            num(100.0 * z.mean),
            num(100.0 * z.cov),
            opt(p.truth.map(|v| micro_g2 * v)),
            num(micro_g2 * p.mean),
            num(100.0 * p.cov),
        ])?;
    }
    let mut params = CsvTable::new(&["name", "truth", "mean", "sd", "cov", "q05", "q95"])?;
    for p in &s.parameters {
        params.row([p.name.clone(), opt(p.truth), num(p.mean), num(p.sd), num(p.cov), num(p.q05), num(p.q95)])?;
    }
    let mut hist = CsvTable::new(&["name", "bin", "low", "high", "mass"])?;
    for h in &s.histograms {
        for (b, m) in h.mass.iter().enumerate() {
            let (lo, hi) = h.edges(b);
            hist.row([h.name.clone(), b.to_string(), num(lo), num(hi), num(*m)])?;
        }
    }
    Ok(vec![modal.save(dir, MODAL_FILE)?, params.save(dir, PARAMETERS_FILE)?, hist.save(dir, HISTOGRAMS_FILE)?])
}
