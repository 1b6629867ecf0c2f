//! Shear-type building: stiffness assembly and modal analysis.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of stories of the reference building.
pub const N_STORIES: usize = 10;
/// Base story stiffness, 2×10⁶ kN/m in N/m.
pub const K0: f64 = 2.0e9;
/// Story mass, 1000 t in kg.
pub const STORY_MASS: f64 = 1.0e6;
/// Stiffness factors of the simulated damaged structure.
pub const TRUE_ALPHA: [f64; N_STORIES] = [0.71, 0.84, 0.57, 0.78, 0.84, 0.80, 0.93, 0.89, 0.76, 0.76];

/// Tridiagonal shear-building stiffness for story stiffnesses `k0 α_j`;
/// story 1 is attached to the ground.
pub fn assemble_stiffness(alpha: &[f64], k0: f64) -> Result<DMatrix<f64>> {
    if alpha.is_empty() {
        return Err(Error::Domain("at least one story is required".into()));
    }
    if let Some(j) = alpha.iter().position(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::Domain(format!("stiffness factor α_{} = {} must be positive", j + 1, alpha[j])));
    }
    let n = alpha.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        let above = if j + 1 < n { alpha[j + 1] } else { 0.0 };
        k[(j, j)] = k0 * (alpha[j] + above);
        if j + 1 < n {
            k[(j, j + 1)] = -k0 * alpha[j + 1];
            k[(j + 1, j)] = -k0 * alpha[j + 1];
        }
    }
    Ok(k)
}

/// Natural frequencies (ascending, Hz) and full mass-normalised mode shapes
/// (one column per mode).
#[derive(Debug, Clone, PartialEq)]
pub struct ModalData {
    pub frequencies: Vec<f64>,
    pub mode_shapes: DMatrix<f64>,
}

impl ModalData {
    /// Rows `channels` (0-based) of the first `n_modes` shapes.
    pub fn partial_shapes(&self, channels: &[usize], n_modes: usize) -> DMatrix<f64> {
        DMatrix::from_fn(channels.len(), n_modes, |r, c| self.mode_shapes[(channels[r], c)])
    }
}

/// Solve `K φ = ω² M φ` for a diagonal mass matrix `masses`.
///
/// Shapes satisfy `Φᵀ M Φ = I`; each is signed so that its largest-magnitude
/// component is positive.
pub fn modal_analysis(k: &DMatrix<f64>, masses: &[f64]) -> Result<ModalData> {
    let n = masses.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::Contract(format!("stiffness is {}×{}, mass has {n} entries", k.nrows(), k.ncols())));
    }
    if masses.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Domain("masses must be positive".into()));
    }
    let scale: Vec<f64> = masses.iter().map(|m| 1.0 / m.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| scale[i] * k[(i, j)] * scale[j]);
    let eig = SymmetricEigen::try_new(a, 1e-14, 10_000)
        .ok_or_else(|| Error::LinearAlgebra("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut frequencies = Vec::with_capacity(n);
    let mut shapes = DMatrix::zeros(n, n);
    for (col, &m) in order.iter().enumerate() {
        let omega2 = eig.eigenvalues[m];
        if !(omega2 > 0.0) {
            return Err(Error::LinearAlgebra(format!("non-positive eigenvalue {omega2}")));
        }
        frequencies.push(omega2.sqrt() / (2.0 * std::f64::consts::PI));
        let v = eig.eigenvectors.column(m);
        let peak = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if peak < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            shapes[(i, col)] = sign * scale[i] * v[i];
        }
    }
    Ok(ModalData { frequencies, mode_shapes: shapes })
}

/// The 10-story shear building with story stiffnesses `k0 α_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearBuildingModel {
    pub k0: f64,
    pub masses: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl ShearBuildingModel {
    pub fn new(alpha: Vec<f64>, k0: f64, masses: Vec<f64>) -> Result<Self> {
        if alpha.len() != masses.len() {
            return Err(Error::Contract(format!("{} stiffness factors for {} stories", alpha.len(), masses.len())));
        }
        assemble_stiffness(&alpha, k0)?;
        Ok(Self { k0, masses, alpha })
    }

    /// Reference building (`k0` = 2×10⁶ kN/m, 1000 t per story) with factors `alpha`.
    pub fn reference(alpha: &[f64]) -> Result<Self> {
        Self::new(alpha.to_vec(), K0, vec![STORY_MASS; alpha.len()])
    }

    pub fn stiffness(&self) -> Result<DMatrix<f64>> {
        assemble_stiffness(&self.alpha, self.k0)
    }

    /// Modal data with masses expressed in units of [`STORY_MASS`], so that
    /// mode shapes are dimensionless and modal forces are accelerations
    /// ("per unit mass").
    pub fn modal(&self) -> Result<ModalData> {
        let k = self.stiffness()? / STORY_MASS;
        let m: Vec<f64> = self.masses.iter().map(|m| m / STORY_MASS).collect();
        modal_analysis(&k, &m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_story_stiffness() {
        let k = assemble_stiffness(&[1.0, 1.0], 1.0).unwrap();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]));
        let k3 = assemble_stiffness(&[3.0, 3.0], 1.0).unwrap();
        assert_eq!(k3, k * 3.0);
        assert!(assemble_stiffness(&[1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn two_story_frequencies() {
        let k = assemble_stiffness(&[1.0, 1.0], 1.0).unwrap();
        let modal = modal_analysis(&k, &[1.0, 1.0]).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let s5 = 5f64.sqrt();
        assert!((modal.frequencies[0] - ((3.0 - s5) / 2.0).sqrt() / two_pi).abs() < 1e-14);
        assert!((modal.frequencies[1] - ((3.0 + s5) / 2.0).sqrt() / two_pi).abs() < 1e-14);
    }

    #[test]
    fn true_structure_matches_reference_frequencies() {
        let modal = ShearBuildingModel::reference(&TRUE_ALPHA).unwrap().modal().unwrap();
        let table = [0.920, 2.848, 4.594, 6.114, 7.784, 9.268, 10.609, 11.218, 11.993, 12.941];
        for (f, t) in modal.frequencies.iter().zip(table) {
            // Tabulated values agree to about 0.1 %.
            assert!((f - t).abs() / t < 1.5e-3, "{f} vs {t}");
        }
    }

    #[test]
    fn shapes_are_mass_normalised_eigenvectors() {
        let model = ShearBuildingModel::reference(&TRUE_ALPHA).unwrap();
        let modal = model.modal().unwrap();
        let k = model.stiffness().unwrap() / STORY_MASS;
        let phi = &modal.mode_shapes;
        let gram = phi.transpose() * phi;
        assert!((gram - DMatrix::identity(10, 10)).abs().max() < 1e-10);
        for (i, f) in modal.frequencies.iter().enumerate() {
            let w2 = (2.0 * std::f64::consts::PI * f).powi(2);
            let kphi = &k * phi.column(i);
            let resid = (&kphi - phi.column(i) * w2).norm() / kphi.norm();
            assert!(resid < 1e-8);
            let peak = phi.column(i).iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(peak > 0.0);
        }
    }
}
