//! Finite-element model updating of a shear building from ambient-vibration
//! spectra.

pub mod building;
pub mod cases;
pub mod spectral;
pub mod synth;

pub use building::{assemble_stiffness, modal_analysis, ModalData, ShearBuildingModel, TRUE_ALPHA};
pub use cases::{run_case, CaseSummary, CaseTruth, FeOptions, Histogram, ParamSummary, UpdatingCase};
pub use spectral::{frf, psd_mean, FeParams, SpectralLikelihood, SpectralScaling};
pub use synth::{synthesize_dataset, synthesize_full, SpectralDataset, SyntheticConfig};
