//! Forward loss model, predicted Q_TLS for goodness-of-fit plots, and
//! per-design loss budgets.

use serde::{Deserialize, Serialize};

use crate::domain::{DesignId, EnsembleStats, ParticipationMatrix};
use crate::region::{Region, RegionArray};
use crate::sle::ExtractionResult;
use crate::stats::mean_and_std;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictError {
    #[error("no measured ensemble for {0}")]
    MissingMeasurement(DesignId),
}

/// Inverse Q_TLS of one design: `Σ_r p_r tan δ_r`.
pub fn forward_loss(participation: &RegionArray<f64>, tangents: &RegionArray<f64>) -> f64 {
    participation.dot(tangents)
}

/// Per-region terms `p_r tan δ_r`.
pub fn loss_terms(participation: &RegionArray<f64>, tangents: &RegionArray<f64>) -> RegionArray<f64> {
    RegionArray::from_fn(|r| participation[r] * tangents[r])
}

/// Predicted Q_TLS of one design across Monte-Carlo samples. An infinite
/// mean means no sample predicted any loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedQ {
    pub design: DesignId,
    pub mean_q_tls: f64,
    pub std_q_tls: f64,
}

fn loss_factors(result: &ExtractionResult, tangents: &RegionArray<f64>) -> RegionArray<f64> {
    let scale = &result.config.region_scale;
    RegionArray::from_fn(|r| tangents[r] / scale[r])
}

/// Predicted Q_TLS per design. Uses the retained per-sample tangents when
/// present; otherwise propagates the per-region spread to first order.
pub fn predict_q(matrix: &ParticipationMatrix, result: &ExtractionResult) -> Vec<PredictedQ> {
    matrix
        .designs()
        .iter()
        .zip(matrix.rows())
        .map(|(design, row)| {
            let (mean, std) = match &result.per_sample_tangents {
                Some(samples) => {
                    let q: Vec<f64> = samples
                        .iter()
                        .map(|t| forward_loss(row, &loss_factors(result, t)))
                        .filter(|&loss| loss > 0.0)
                        .map(|loss| 1.0 / loss)
                        .collect();
                    mean_and_std(&q).unwrap_or((f64::INFINITY, 0.0))
                }
                None => {
                    let means = loss_factors(result, &result.means());
                    let stds = loss_factors(result, &result.estimates.map(|_, e| e.std));
                    let loss = forward_loss(row, &means);
                    if loss > 0.0 {
                        let spread = Region::ALL
                            .iter()
                            .map(|&r| (row[r] * stds[r]).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        (1.0 / loss, spread / (loss * loss))
                    } else {
                        (f64::INFINITY, 0.0)
                    }
                }
            };
            if mean.is_infinite() {
                log::warn!("{design}: zero predicted loss, Q_TLS is unbounded");
            }
            PredictedQ {
                design: design.clone(),
                mean_q_tls: mean,
                std_q_tls: std,
            }
        })
        .collect()
}

/// Measured loss of one design next to the predicted per-region split.
///
/// `total_loss` is the measured `1 / mean Q_TLS`; the components come from
/// the model and need not add up to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub design: DesignId,
    pub total_loss: f64,
    pub predicted_total_loss: f64,
    pub per_region_loss: RegionArray<f64>,
    pub dominant_region: Region,
}

pub fn dominant_region(terms: &RegionArray<f64>) -> Region {
    Region::ALL
        .into_iter()
        .max_by(|&a, &b| terms[a].total_cmp(&terms[b]).then(b.cmp(&a)))
        .expect("four regions")
}

pub fn loss_budget(
    matrix: &ParticipationMatrix,
    result: &ExtractionResult,
    measured: &[EnsembleStats],
) -> Result<Vec<LossBudget>, PredictError> {
    let tangents = loss_factors(result, &result.means());
    matrix
        .designs()
        .iter()
        .zip(matrix.rows())
        .map(|(design, row)| {
            let stats = measured
                .iter()
                .find(|s| &s.design == design)
                .ok_or_else(|| PredictError::MissingMeasurement(design.clone()))?;
            let terms = loss_terms(row, &tangents);
            Ok(LossBudget {
                design: design.clone(),
                total_loss: 1.0 / stats.mean_q_tls,
                predicted_total_loss: terms.sum(),
                per_region_loss: terms,
                dominant_region: dominant_region(&terms),
            })
        })
        .collect()
}

/// Measured-versus-predicted data for one dataset. Dispersions are stored
/// raw; plots draw `horizontal_error_bar_multiplier × std_q_tls` horizontally
/// and one standard error vertically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub generated_by: String,
    pub label: String,
    pub horizontal_error_bar_multiplier: f64,
    pub predicted: Vec<PredictedQ>,
    pub measured: Vec<EnsembleStats>,
}

impl PredictReport {
    pub fn new(label: impl Into<String>, predicted: Vec<PredictedQ>, measured: Vec<EnsembleStats>) -> Self {
        PredictReport {
            generated_by: crate::GENERATED_BY.to_string(),
            label: label.into(),
            horizontal_error_bar_multiplier: 2.0,
            predicted,
            measured,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSet {
    pub label: String,
    pub budgets: Vec<LossBudget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub generated_by: String,
    pub datasets: Vec<BudgetSet>,
}

impl BudgetReport {
    pub fn new(datasets: Vec<BudgetSet>) -> Self {
        BudgetReport {
            generated_by: crate::GENERATED_BY.to_string(),
            datasets,
        }
    }
}
