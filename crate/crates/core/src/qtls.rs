//! TLS-limited quality factors and per-design ensemble statistics.

use crate::domain::{DesignId, EnsembleStats, RecordStatus, ResonatorMeasurement};
use crate::stats::mean_and_std;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QtlsError {
    #[error("quality factors must be positive and Q_LP finite (Q_LP = {q_lp}, Q_HP = {q_hp})")]
    Domain { q_lp: f64, q_hp: f64 },
    #[error("not TLS-limited: Q_HP = {q_hp} does not exceed Q_LP = {q_lp}")]
    NotTlsLimited { q_lp: f64, q_hp: f64 },
    #[error("no valid measurements for {0}")]
    EmptyEnsemble(DesignId),
    #[error("{count} unusable measurement(s) for {design} in strict mode (first: {resonator_id})")]
    UnusableInStrictMode {
        design: DesignId,
        resonator_id: String,
        count: usize,
    },
}

/// TLS-limited quality factor from low- and high-power internal Q:
/// `1 / (1/q_lp - 1/q_hp)`.
///
/// Evaluated as `q_lp * q_hp / (q_hp - q_lp)`, which is exact whenever the
/// product and difference are representable. `q_hp = ∞` returns `q_lp`.
pub fn q_tls(q_lp: f64, q_hp: f64) -> Result<f64, QtlsError> {
    if !(q_lp > 0.0 && q_lp.is_finite()) || !(q_hp > 0.0) {
        return Err(QtlsError::Domain { q_lp, q_hp });
    }
    if q_hp <= q_lp {
        return Err(QtlsError::NotTlsLimited { q_lp, q_hp });
    }
    if q_hp.is_infinite() {
        return Ok(q_lp);
    }
    let product = q_lp * q_hp;
    if product.is_finite() {
        Ok(product / (q_hp - q_lp))
    } else {
        Ok(q_lp / (1.0 - q_lp / q_hp))
    }
}

/// Which records enter an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordPolicy {
    /// Flagged and rejected records are skipped.
    #[default]
    ExcludeFlagged,
    /// Any flagged or rejected record of the design is an error.
    Strict,
}

/// Mean Q_TLS, standard error of the mean and count for one design.
pub fn ensemble_stats(
    measurements: &[ResonatorMeasurement],
    design: &DesignId,
) -> Result<EnsembleStats, QtlsError> {
    ensemble_stats_with(measurements, design, RecordPolicy::ExcludeFlagged)
}

pub fn ensemble_stats_with(
    measurements: &[ResonatorMeasurement],
    design: &DesignId,
    policy: RecordPolicy,
) -> Result<EnsembleStats, QtlsError> {
    let mut values = Vec::new();
    let mut unusable: Vec<&ResonatorMeasurement> = Vec::new();
    for m in measurements.iter().filter(|m| &m.design == design) {
        match m.status() {
            RecordStatus::Valid => values.push(q_tls(m.q_lp, m.q_hp)?),
            _ => unusable.push(m),
        }
    }
    if policy == RecordPolicy::Strict {
        if let Some(first) = unusable.first() {
            return Err(QtlsError::UnusableInStrictMode {
                design: design.clone(),
                resonator_id: first.resonator_id.clone(),
                count: unusable.len(),
            });
        }
    }
    let (mean, std) =
        mean_and_std(&values).ok_or_else(|| QtlsError::EmptyEnsemble(design.clone()))?;
    let n = values.len();
    Ok(EnsembleStats {
        design: design.clone(),
        mean_q_tls: mean,
        std_err_q_tls: if n > 1 { std / (n as f64).sqrt() } else { 0.0 },
        n_resonators: n,
    })
}

/// Ensemble statistics for every design in `designs`, in that order.
pub fn ensemble_table(
    measurements: &[ResonatorMeasurement],
    designs: &[DesignId],
    policy: RecordPolicy,
) -> Result<Vec<EnsembleStats>, QtlsError> {
    designs
        .iter()
        .map(|d| ensemble_stats_with(measurements, d, policy))
        .collect()
}
