//! Resolvability of extracted tangents and upper bounds for the ones that
//! drown in the Monte-Carlo spread.
//!
//! The bound for a region is the tangent that, together with the smallest
//! plausible contribution of every other region (`mean - 2 std`), accounts
//! for the largest plausible loss of the design accentuating that region
//! (`1 / (mean Q_TLS - standard error)`).

use crate::domain::{
    BoundMethod, DesignId, DesignKind, EnsembleStats, ExtractionConfig, LossTangentEstimate,
    ParticipationMatrix, ResolvabilityRule,
};
use crate::region::{Region, RegionArray};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundError {
    #[error("bound not meaningful for {region}: other regions' minima already explain the measured loss (remainder {remainder:e})")]
    NotMeaningful { region: Region, remainder: f64 },
    #[error("mean Q_TLS {mean} does not exceed its standard error {std_err} for {design}")]
    Domain {
        design: DesignId,
        mean: f64,
        std_err: f64,
    },
    #[error("{design} is not the accentuating design for {region}")]
    WrongDesign { design: DesignId, region: Region },
    #[error("{0} is not a row of the participation matrix")]
    UnknownDesign(DesignId),
    #[error("no {design} row in the participation matrix to bound {0}", design = DesignKind::accentuating(*.0))]
    NoAccentuatingDesign(Region),
    #[error("participation of {region} in {design} is zero")]
    ZeroParticipation { design: DesignId, region: Region },
}

/// Whether an extracted tangent stands clear of its Monte-Carlo spread.
pub fn is_resolvable(mean: f64, std: f64, rule: &ResolvabilityRule) -> bool {
    if !(mean > 0.0) {
        return false;
    }
    if mean - rule.sigma_multiple * std < 0.0 {
        return false;
    }
    !(rule.std_exceeds_mean && std > mean)
}

/// Largest `target` tangent consistent with the accentuating design's
/// measured Q_TLS, given the other regions' estimates.
///
/// `stats` must belong to the design accentuating `target`. Other regions
/// contribute `p_r (mean_r - 2 std_r)`, clamped at zero under
/// [`BoundMethod::ClampedMinima`].
pub fn upper_bound(
    matrix: &ParticipationMatrix,
    stats: &EnsembleStats,
    estimates: &RegionArray<LossTangentEstimate>,
    target: Region,
    method: BoundMethod,
) -> Result<f64, BoundError> {
    if stats.design.design != DesignKind::accentuating(target) {
        return Err(BoundError::WrongDesign {
            design: stats.design.clone(),
            region: target,
        });
    }
    let row = matrix
        .row_of(&stats.design)
        .map(|i| matrix.row(i))
        .ok_or_else(|| BoundError::UnknownDesign(stats.design.clone()))?;
    let p_target = row[target];
    if !(p_target > 0.0) {
        return Err(BoundError::ZeroParticipation {
            design: stats.design.clone(),
            region: target,
        });
    }
    let lowest_q = stats.mean_q_tls - stats.std_err_q_tls;
    if !(lowest_q > 0.0) {
        return Err(BoundError::Domain {
            design: stats.design.clone(),
            mean: stats.mean_q_tls,
            std_err: stats.std_err_q_tls,
        });
    }
    let others: f64 = Region::ALL
        .into_iter()
        .filter(|&r| r != target)
        .map(|r| row[r] * minimum_tangent(&estimates[r], method))
        .sum();
    let remainder = 1.0 / lowest_q - others;
    if !(remainder > 0.0) {
        return Err(BoundError::NotMeaningful {
            region: target,
            remainder,
        });
    }
    Ok(remainder / p_target)
}

fn minimum_tangent(e: &LossTangentEstimate, method: BoundMethod) -> f64 {
    let low = e.mean - 2.0 * e.std;
    match method {
        BoundMethod::ClampedMinima => low.max(0.0),
        BoundMethod::Literal => low,
    }
}

/// Turns per-region Monte-Carlo moments into estimates: applies the
/// resolvability rule and attaches an upper bound to every unresolvable
/// region.
///
/// `stats` is aligned with the matrix rows. Moments are in scaled (tangent)
/// units; bounds are computed on loss factors and scaled back. When the
/// other regions' minima already exceed the measured loss the bound falls
/// back to the accentuating design's loss alone, `1 / ((mean - se) p)`.
pub fn finalize_estimates(
    matrix: &ParticipationMatrix,
    stats: &[EnsembleStats],
    moments: &RegionArray<(f64, f64)>,
    config: &ExtractionConfig,
) -> Result<RegionArray<LossTangentEstimate>, BoundError> {
    let scale = &config.region_scale;
    let mut estimates = moments.map(|region, &(mean, std)| LossTangentEstimate {
        region,
        mean,
        std,
        resolvable: is_resolvable(mean, std, &config.resolvability_rule),
        upper_bound: None,
    });
    let loss_factors = estimates.map(|r, e| LossTangentEstimate {
        mean: e.mean / scale[r],
        std: e.std / scale[r],
        ..e.clone()
    });

    for region in Region::ALL {
        if estimates[region].resolvable {
            continue;
        }
        let row = matrix
            .accentuating_row(region)
            .ok_or(BoundError::NoAccentuatingDesign(region))?;
        let design_stats = &stats[row];
        let bound = match upper_bound(
            matrix,
            design_stats,
            &loss_factors,
            region,
            config.bound_method,
        ) {
            Ok(b) => b,
            Err(BoundError::NotMeaningful { .. }) => {
                log::warn!(
                    "{region}: other regions explain the loss of {}; bounding by that design's loss alone",
                    design_stats.design
                );
                let lowest_q = design_stats.mean_q_tls - design_stats.std_err_q_tls;
                1.0 / lowest_q / matrix.row(row)[region]
            }
            Err(e) => return Err(e),
        };
        estimates[region].upper_bound = Some(bound * scale[region]);
    }
    Ok(estimates)
}
