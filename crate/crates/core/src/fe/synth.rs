//! Synthetic ambient-vibration records and their averaged sample spectra.
//!
//! Modal accelerations are generated in the frequency domain: each modal
//! force is a discrete white-noise sequence whose one-sided PSD equals `S_i`
//! (variance `S_i f_s / 2`), its spectrum is multiplied by the acceleration
//! FRF on every FFT bin, the modes are superposed with the mass-normalised
//! shapes and transformed back. The record is circular, hence stationary
//! from its first sample, and the FRF is applied exactly at every bin.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::building::{ShearBuildingModel, N_STORIES, TRUE_ALPHA};
use crate::fe::cases::UpdatingCase;
use crate::fe::spectral::frf;
use crate::rng;

/// Averaged sample PSD matrices `Ê_k` at frequencies `f_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDataset {
    pub freqs: Vec<f64>,
    pub psd_matrices: Vec<DMatrix<Complex64>>,
    pub n_segments: usize,
    /// Measured stories, numbered from 1 at the ground floor.
    pub channels: Vec<usize>,
    pub sampling_rate: f64,
}

/// File header of a persisted dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub channels: Vec<usize>,
    pub n_segments: usize,
    pub sampling_rate: f64,
    pub n_freq: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct PsdRecord {
    k: usize,
    freq: f64,
    row: usize,
    col: usize,
    re: f64,
    im: f64,
}

pub const HEADER_FILE: &str = "dataset.json";
pub const PSD_FILE: &str = "psd.csv";

impl SpectralDataset {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Keep the stories `channels` and the frequencies in `[low, high)`.
    pub fn restrict(&self, channels: &[usize], band: (f64, f64)) -> Result<Self> {
        let rows: Vec<usize> = channels
            .iter()
            .map(|c| {
                self.channels
                    .iter()
                    .position(|x| x == c)
                    .ok_or_else(|| Error::Dataset(format!("story {c} is not measured in this dataset")))
            })
            .collect::<Result<_>>()?;
        let tol = 1e-9;
        let (mut freqs, mut psd_matrices) = (Vec::new(), Vec::new());
        for (f, m) in self.freqs.iter().zip(&self.psd_matrices) {
            if *f >= band.0 - tol && *f < band.1 - tol {
                freqs.push(*f);
                psd_matrices.push(DMatrix::from_fn(rows.len(), rows.len(), |a, b| m[(rows[a], rows[b])]));
            }
        }
        Ok(Self {
            freqs,
            psd_matrices,
            n_segments: self.n_segments,
            channels: channels.to_vec(),
            sampling_rate: self.sampling_rate,
        })
    }

    /// Restriction to the stories and band of `case`.
    pub fn for_case(&self, case: &UpdatingCase) -> Result<Self> {
        self.restrict(&case.measured_stories, case.freq_band)
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            channels: self.channels.clone(),
            n_segments: self.n_segments,
            sampling_rate: self.sampling_rate,
            n_freq: self.freqs.len(),
        }
    }

    /// Write `dataset.json` and `psd.csv` (one row per matrix entry) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join(HEADER_FILE))?), &self.header())?;
        let mut w = csv::Writer::from_path(dir.join(PSD_FILE)).map_err(|e| Error::Dataset(e.to_string()))?;
        for (k, (f, m)) in self.freqs.iter().zip(&self.psd_matrices).enumerate() {
            for row in 0..m.nrows() {
                for col in 0..m.ncols() {
                    let c = m[(row, col)];
                    w.serialize(PsdRecord { k, freq: *f, row, col, re: c.re, im: c.im })
                        .map_err(|e| Error::Dataset(e.to_string()))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header: DatasetHeader = serde_json::from_reader(File::open(dir.join(HEADER_FILE))?)?;
        let n = header.channels.len();
        let mut freqs = vec![f64::NAN; header.n_freq];
        let mut psd_matrices = vec![DMatrix::zeros(n, n); header.n_freq];
        let mut r = csv::Reader::from_path(dir.join(PSD_FILE)).map_err(|e| Error::Dataset(e.to_string()))?;
        for rec in r.deserialize() {
            let rec: PsdRecord = rec.map_err(|e| Error::Dataset(e.to_string()))?;
            if rec.k >= header.n_freq || rec.row >= n || rec.col >= n {
                return Err(Error::Dataset(format!("entry ({}, {}, {}) out of range", rec.k, rec.row, rec.col)));
            }
            freqs[rec.k] = rec.freq;
            psd_matrices[rec.k][(rec.row, rec.col)] = Complex64::new(rec.re, rec.im);
        }
        if freqs.iter().any(|f| f.is_nan()) {
            return Err(Error::Dataset("missing frequency points".into()));
        }
        Ok(Self {
            freqs,
            psd_matrices,
            n_segments: header.n_segments,
            channels: header.channels,
            sampling_rate: header.sampling_rate,
        })
    }
}

/// Generating settings for a synthetic record of the full building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub alpha: Vec<f64>,
    /// Damping ratio of every mode.
    pub zeta: Vec<f64>,
    /// Modal force PSD of every mode (g²/Hz).
    pub s: Vec<f64>,
    /// Channel-noise PSD (g²/Hz), identical on every story.
    pub s_e: f64,
    pub sampling_rate: f64,
    pub n_segments: usize,
    /// Samples per segment; `sampling_rate / segment_len` is the frequency resolution.
    pub segment_len: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    /// The simulated damaged structure: 1 % damping, 10⁻¹⁰ g²/Hz modal force
    /// and noise PSDs, 50 Hz sampling, 200 segments of 10 s.
    fn default() -> Self {
        Self {
            alpha: TRUE_ALPHA.to_vec(),
            zeta: vec![0.01; N_STORIES],
            s: vec![1e-10; N_STORIES],
            s_e: 1e-10,
            sampling_rate: 50.0,
            n_segments: 200,
            segment_len: 500,
            seed: 2024,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self, f_max: f64) -> Result<()> {
        if self.zeta.len() != self.alpha.len() || self.s.len() != self.alpha.len() {
            return Err(Error::Config("ζ and S need one entry per mode".into()));
        }
        if self.n_segments == 0 || self.segment_len < 2 {
            return Err(Error::Config("need at least one segment of two samples".into()));
        }
        if !(self.sampling_rate > 2.0 * f_max) {
            return Err(Error::Config(format!(
                "sampling rate {} Hz is below twice the highest natural frequency {f_max:.3} Hz",
                self.sampling_rate
            )));
        }
        if self.s.iter().chain([&self.s_e]).any(|&v| !(v >= 0.0)) || self.zeta.iter().any(|&z| !(z >= 0.0)) {
            return Err(Error::Config("PSDs and damping ratios must be non-negative".into()));
        }
        Ok(())
    }
}

/// Acceleration records of every story, one column per story.
pub fn synthesize_response(cfg: &SyntheticConfig) -> Result<DMatrix<f64>> {
    let modal = ShearBuildingModel::reference(&cfg.alpha)?.modal()?;
    let n_dof = cfg.alpha.len();
    cfg.validate(*modal.frequencies.last().expect("at least one mode"))?;
    let len = cfg.n_segments * cfg.segment_len;
    let dt = 1.0 / cfg.sampling_rate;
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);

    let mut channel_spectra = vec![vec![Complex64::new(0.0, 0.0); len]; n_dof];
    for mode in 0..n_dof {
        if cfg.s[mode] == 0.0 {
            continue;
        }
        let sd = (cfg.s[mode] * cfg.sampling_rate / 2.0).sqrt();
        let mut r = rng::stream(cfg.seed, 1, mode as u64);
        let mut buf: Vec<Complex64> =
            (0..len).map(|_| Complex64::new(sd * r.sample::<f64, _>(StandardNormal), 0.0)).collect();
        forward.process(&mut buf);
        buf[0] = Complex64::new(0.0, 0.0);
        for j in 1..=len / 2 {
            let f = j as f64 / (len as f64 * dt);
            let h = frf(modal.frequencies[mode], cfg.zeta[mode], f)?;
            if 2 * j == len {
                buf[j] *= h.norm();
            } else {
                buf[j] *= h;
                buf[len - j] *= h.conj();
            }
        }
        for (c, spec) in channel_spectra.iter_mut().enumerate() {
            let phi = modal.mode_shapes[(c, mode)];
            for (x, b) in spec.iter_mut().zip(&buf) {
                *x += b * phi;
            }
        }
    }

    let noise_sd = (cfg.s_e * cfg.sampling_rate / 2.0).sqrt();
    let mut out = DMatrix::zeros(len, n_dof);
    for (c, spec) in channel_spectra.iter_mut().enumerate() {
        inverse.process(spec);
        let mut r = rng::stream(cfg.seed, 2, c as u64);
        for (t, x) in spec.iter().enumerate() {
            out[(t, c)] = x.re / len as f64 + noise_sd * r.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(out)
}

/// Averaged sample PSD `Ê_k = (1/M) Σ_r F_k^r F_k^{r*}` with the scaled DFT
/// `F_k = √(2Δt/n) Σ_j x_j exp(−i2πjk/n)` over `M` non-overlapping segments
/// of `n` samples, for bins `k = 0..=n/2`.
pub fn sample_psd(
    records: &DMatrix<f64>,
    stories: &[usize],
    n_segments: usize,
    segment_len: usize,
    sampling_rate: f64,
) -> Result<SpectralDataset> {
    if n_segments * segment_len > records.nrows() {
        return Err(Error::Config(format!(
            "{n_segments} segments of {segment_len} samples exceed a record of {}",
            records.nrows()
        )));
    }
    if stories.len() != records.ncols() {
        return Err(Error::Contract("one story label per record column is required".into()));
    }
    let n_c = records.ncols();
    let n_bins = segment_len / 2 + 1;
    let scale = (2.0 / (sampling_rate * segment_len as f64)).sqrt();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let mut acc = vec![DMatrix::<Complex64>::zeros(n_c, n_c); n_bins];
    let mut f_seg = vec![vec![Complex64::new(0.0, 0.0); segment_len]; n_c];
    for r in 0..n_segments {
        for (c, buf) in f_seg.iter_mut().enumerate() {
            for (j, x) in buf.iter_mut().enumerate() {
                *x = Complex64::new(records[(r * segment_len + j, c)] * scale, 0.0);
            }
            fft.process(buf);
        }
        for (k, m) in acc.iter_mut().enumerate() {
            for a in 0..n_c {
                for b in 0..n_c {
                    m[(a, b)] += f_seg[a][k] * f_seg[b][k].conj();
                }
            }
        }
    }
    let inv_m = 1.0 / n_segments as f64;
    Ok(SpectralDataset {
        freqs: (0..n_bins).map(|k| k as f64 * sampling_rate / segment_len as f64).collect(),
        psd_matrices: acc.into_iter().map(|m| m * Complex64::new(inv_m, 0.0)).collect(),
        n_segments,
        channels: stories.to_vec(),
        sampling_rate,
    })
}

/// Full-building dataset (all stories, all bins up to Nyquist).
pub fn synthesize_full(cfg: &SyntheticConfig) -> Result<SpectralDataset> {
    let records = synthesize_response(cfg)?;
    let stories: Vec<usize> = (1..=cfg.alpha.len()).collect();
    sample_psd(&records, &stories, cfg.n_segments, cfg.segment_len, cfg.sampling_rate)
}

/// Dataset of `case`: the full record restricted to its stories and band.
pub fn synthesize_dataset(cfg: &SyntheticConfig, case: &UpdatingCase) -> Result<SpectralDataset> {
    synthesize_full(cfg)?.for_case(case)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticConfig {
        SyntheticConfig { n_segments: 40, seed, ..Default::default() }
    }

    #[test]
    fn no_excitation_gives_zero_spectra() {
        let cfg = SyntheticConfig { s: vec![0.0; 10], s_e: 0.0, ..small(1) };
        let d = synthesize_full(&cfg).unwrap();
        assert!(d.psd_matrices.iter().all(|m| m.iter().all(|c| c.norm() == 0.0)));
    }

    #[test]
    fn white_noise_channels_have_flat_unit_spectrum() {
        let cfg = SyntheticConfig { s: vec![0.0; 10], s_e: 3.0, ..small(2) };
        let d = synthesize_full(&cfg).unwrap();
        let inner = &d.psd_matrices[1..d.psd_matrices.len() - 1];
        let n = (inner.len() * 10) as f64;
        let diag: Vec<f64> = inner.iter().flat_map(|m| (0..10).map(move |c| m[(c, c)].re)).collect();
        let mean = diag.iter().sum::<f64>() / n;
        let sd = (diag.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 3.0).abs() < 3.0 * sd / n.sqrt(), "mean {mean}");
        let off: f64 = inner.iter().map(|m| m[(0, 1)].re).sum::<f64>() / inner.len() as f64;
        assert!(off.abs() < 3.0 * 3.0 / (40.0 * inner.len() as f64).sqrt());
    }

    #[test]
    fn sample_spectra_are_hermitian_psd() {
        let d = synthesize_full(&small(3)).unwrap();
        for m in &d.psd_matrices {
            let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
            assert!((m - m.adjoint()).iter().all(|c| c.norm() <= 1e-12 * scale));
            let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = herm.map(|c| c.re).symmetric_eigenvalues();
            assert!(eig.iter().all(|&l| l >= -1e-9 * scale));
        }
    }

    #[test]
    fn bands_have_tabulated_sizes() {
        let d = synthesize_full(&small(4)).unwrap();
        assert_eq!(d.restrict(&[9, 10], (0.5, 8.5)).unwrap().freqs.len(), 80);
        let d14 = d.restrict(&[4, 7, 10], (0.5, 14.5)).unwrap();
        assert_eq!(d14.freqs.len(), 140);
        assert!((d14.freqs[0] - 0.5).abs() < 1e-12 && (d14.freqs[139] - 14.4).abs() < 1e-9);
        assert!(d.restrict(&[11], (0.5, 8.5)).is_err());
    }

    #[test]
    fn nyquist_violation_is_rejected() {
        let cfg = SyntheticConfig { sampling_rate: 20.0, ..small(5) };
        assert!(matches!(synthesize_full(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn regeneration_is_deterministic() {
        let a = synthesize_full(&small(6)).unwrap();
        let b = synthesize_full(&small(6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn persistence_round_trip() {
        let d = synthesize_full(&small(7)).unwrap().restrict(&[4, 7, 10], (0.5, 8.5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.save(dir.path()).unwrap();
        assert_eq!(SpectralDataset::load(dir.path()).unwrap(), d);
    }
}
