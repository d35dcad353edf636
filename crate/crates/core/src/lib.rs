//! Bayesian state tomography for one and two polarization qubits.
//!
//! The pipeline is: build an [`model::ExperimentConfig`] from settings,
//! instrument parameters and counts; construct a [`model::TomographyModel`];
//! draw posterior samples with [`sampler::sample`]; then reduce the trace with
//! [`posterior::summarize_state`] and check it with [`posterior::ppc`].

pub mod ad;
pub mod crosstalk;
pub mod linalg;
pub mod model;
pub mod optics;
pub mod posterior;
pub mod qstate;
pub mod sampler;
pub mod simulate;

pub use crosstalk::{FluxEstimate, InstrumentParams};
pub use linalg::{CMat, RMat};
pub use model::{ExperimentConfig, SigmaMode, Setup, TomographyModel, Uncertainty1Q, Uncertainty2Q};
pub use optics::{Port, SettingRow1Q, Settings2Q, SettingsTable, TableKind, WaveplateRow};
pub use posterior::{PpcOptions, PpcResult, QuantitySummary, StateSummary};
pub use qstate::{DensityMatrix, Elements1Q, Elements2Q, Qubits, Stokes1Q, StokesJoint, TParams};
pub use sampler::{SamplerConfig, SamplerKind, Trace};
pub use simulate::{SimSpec, Simulation};
