//! Shared fixtures for the benchmarks.

use surfloss::qtls::{ensemble_table, RecordPolicy};
use surfloss::synth::{generate, HighPowerModel, SynthSpec};
use surfloss::{EnsembleStats, ParticipationMatrix, ReferenceSet};

/// Reference matrix and ensembles synthesized from its published tangents.
pub fn fixture(set: ReferenceSet, noise: f64, n_per_design: usize) -> (ParticipationMatrix, Vec<EnsembleStats>) {
    let matrix = set.matrix();
    let spec = SynthSpec {
        matrix: matrix.clone(),
        true_tangents: set.ground_truth(),
        n_per_design,
        relative_noise: noise,
        q_hp_model: HighPowerModel::Fixed(5e6),
        rng_seed: 1,
    };
    let measurements = generate(&spec).expect("reference spec is valid");
    let stats = ensemble_table(&measurements, matrix.designs(), RecordPolicy::ExcludeFlagged)
        .expect("synthetic ensembles are non-empty");
    (matrix, stats)
}
