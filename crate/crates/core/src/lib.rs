//! Surface-loss extraction for superconducting coplanar-waveguide
//! resonators.
//!
//! Measured TLS-limited quality factors of several resonator geometries are
//! attributed to four dielectric regions (metal-substrate, substrate-air,
//! metal-air and the silicon bulk) through the linear participation model
//! `1/Q_TLS = Σ_r p_r tan δ_r`, inverted under a non-negativity constraint
//! inside a Monte-Carlo loop over the measurement uncertainty.
//!
//! The pipeline is [`ingest`] → [`qtls`] → [`sle`] → [`bounds`], with
//! [`predict`] for forward checks and loss budgets and [`synth`] for
//! synthetic datasets with known answers.

pub mod bounds;
pub mod domain;
pub mod ingest;
pub mod plot;
pub mod predict;
pub mod qtls;
pub mod region;
pub mod sle;
pub mod stats;
pub mod synth;

pub use domain::{
    BoundMethod, DesignId, DesignKind, EnsembleStats, ExtractionConfig, LossTangentEstimate,
    ParticipationMatrix, RecordIssue, RecordStatus, ResolvabilityRule, ResonatorMeasurement,
    Units, Violation,
};
pub use ingest::reference::ReferenceSet;
pub use region::{Region, RegionArray};
pub use sle::{extract, extract_serial, solve_nnls, ExtractionResult};

/// Producer string written into every output file.
pub const GENERATED_BY: &str = concat!("surfloss ", env!("CARGO_PKG_VERSION"));

/// Validates a participation matrix; empty when every invariant holds.
pub fn validate_matrix(matrix: &ParticipationMatrix) -> Vec<Violation> {
    matrix.validate()
}
