//! Surface-loss extraction: Monte-Carlo sampling of the measured Q_TLS
//! ensembles followed by a non-negative inversion of the participation
//! model for every sample.
//!
//! Each iteration draws every design's Q_TLS from a normal distribution
//! centred on the ensemble mean with the standard error as width
//! (non-positive draws are redrawn), solves `P x = 1/Q` for `x ≥ 0`, and
//! records the per-region tangents. Random streams are keyed by
//! `(seed, iteration, design)` and rows are solved in sorted design order,
//! so the result is bit-identical under any row order and any split of
//! iterations over threads.

pub mod nnls;

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{self, BoundError};
use crate::domain::{
    ConfigError, DesignId, EnsembleStats, ExtractionConfig, LossTangentEstimate,
    ParticipationMatrix,
};
use crate::region::{Region, RegionArray};
use crate::stats::mean_and_std;

pub use nnls::{condition_number, kkt_violation, NnlsError, NnlsSolution, NnlsSolver};

/// Condition numbers above this flag a near-degenerate set of designs.
pub const CONDITION_WARNING: f64 = 1e6;

/// Redraw budget per design per iteration before the iteration is dropped.
const MAX_REDRAWS: u32 = 1000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no ensemble statistics for {0}")]
    MissingStats(DesignId),
    #[error("no inverse quality factor supplied for {0}")]
    MissingLoss(DesignId),
    #[error("invalid ensemble statistics for {design}: mean {mean}, standard error {std_err}")]
    InvalidStats {
        design: DesignId,
        mean: f64,
        std_err: f64,
    },
    #[error("invalid loss value {value} for {design}")]
    InvalidLoss { design: DesignId, value: f64 },
    #[error("participation matrix failed validation: {0}")]
    InvalidMatrix(String),
    #[error("all {0} Monte-Carlo samples were rejected")]
    AllSamplesRejected(usize),
    #[error(transparent)]
    Solver(#[from] NnlsError),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

/// Tangents from one non-negative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSolve {
    pub tangents: RegionArray<f64>,
    pub residual_norm: f64,
    pub kkt_violation: f64,
    /// Largest over smallest singular value of the participation matrix.
    pub condition_number: f64,
}

/// One Monte-Carlo draw of Q_TLS, one value per design in the order of
/// [`MonteCarlo::designs`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    pub q_tls: Vec<f64>,
    pub redraws: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub estimates: RegionArray<LossTangentEstimate>,
    pub samples_kept: usize,
    /// Non-positive draws that were redrawn.
    pub rejected_draws: u64,
    pub condition_diagnostic: f64,
    pub ill_conditioned: bool,
    /// Scaled tangents of every kept sample, in iteration order.
    #[serde(skip)]
    pub per_sample_tangents: Option<Vec<RegionArray<f64>>>,
    pub config: ExtractionConfig,
}

impl ExtractionResult {
    pub fn means(&self) -> RegionArray<f64> {
        self.estimates.map(|_, e| e.mean)
    }

    pub fn estimate_list(&self) -> Vec<LossTangentEstimate> {
        self.estimates.values().cloned().collect()
    }
}

pub fn to_dmatrix(matrix: &ParticipationMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(matrix.n_rows(), Region::COUNT, |i, j| {
        matrix.row(i)[Region::ALL[j]]
    })
}

fn canonical_order(matrix: &ParticipationMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..matrix.n_rows()).collect();
    order.sort_by(|&a, &b| matrix.designs()[a].cmp(&matrix.designs()[b]));
    order
}

/// Non-negative least-squares tangents for `P x ≈ inverse_q`.
///
/// Rows are taken in sorted design order, so the answer does not depend on
/// the order of the matrix rows.
pub fn solve_nnls(
    matrix: &ParticipationMatrix,
    inverse_q: &BTreeMap<DesignId, f64>,
) -> Result<RegionSolve, ExtractError> {
    let matrix = &matrix.permuted(&canonical_order(matrix));
    let mut rhs = Vec::with_capacity(matrix.n_rows());
    for d in matrix.designs() {
        let v = *inverse_q.get(d).ok_or_else(|| ExtractError::MissingLoss(d.clone()))?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(ExtractError::InvalidLoss {
                design: d.clone(),
                value: v,
            });
        }
        rhs.push(v);
    }
    let a = to_dmatrix(matrix);
    let sol = nnls::nnls(&a, &rhs)?;
    Ok(RegionSolve {
        tangents: RegionArray::from_fn(|r| sol.x[r.index()]),
        residual_norm: sol.residual_norm,
        kkt_violation: sol.kkt_violation,
        condition_number: condition_number(&a),
    })
}

/// Stable 64-bit key of a design, independent of its row position.
pub(crate) fn design_stream_key(design: &DesignId) -> u64 {
    let digest = Sha256::digest(design.key().as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

fn stream_rng(seed: u64, iteration: u64, design_key: u64) -> ChaCha8Rng {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(&iteration.to_le_bytes());
    s[16..24].copy_from_slice(&design_key.to_le_bytes());
    ChaCha8Rng::from_seed(s)
}

/// Sampling distribution of one design's Q_TLS.
#[derive(Debug, Clone)]
enum QDistribution {
    Fixed(f64),
    Normal(Normal<f64>),
}

/// A prepared Monte-Carlo extraction over one matrix and its ensembles.
#[derive(Debug, Clone)]
pub struct MonteCarlo<'a> {
    /// Input matrix with rows in sorted design order.
    matrix: ParticipationMatrix,
    config: &'a ExtractionConfig,
    stats: Vec<EnsembleStats>,
    distributions: Vec<QDistribution>,
    stream_keys: Vec<u64>,
    solver: NnlsSolver,
}

impl<'a> MonteCarlo<'a> {
    pub fn new(
        matrix: &'a ParticipationMatrix,
        stats: &[EnsembleStats],
        config: &'a ExtractionConfig,
    ) -> Result<Self, ExtractError> {
        config.validate()?;
        let violations = matrix.validate();
        if !violations.is_empty() {
            let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(ExtractError::InvalidMatrix(msg.join("; ")));
        }
        let matrix = matrix.permuted(&canonical_order(matrix));
        let by_design: HashMap<&DesignId, &EnsembleStats> =
            stats.iter().map(|s| (&s.design, s)).collect();
        let mut aligned = Vec::with_capacity(matrix.n_rows());
        let mut distributions = Vec::with_capacity(matrix.n_rows());
        for d in matrix.designs() {
            let s = *by_design
                .get(d)
                .ok_or_else(|| ExtractError::MissingStats(d.clone()))?;
            let bad = || ExtractError::InvalidStats {
                design: d.clone(),
                mean: s.mean_q_tls,
                std_err: s.std_err_q_tls,
            };
            if !(s.mean_q_tls > 0.0 && s.mean_q_tls.is_finite()) {
                return Err(bad());
            }
            if !(s.std_err_q_tls >= 0.0 && s.std_err_q_tls.is_finite()) {
                return Err(bad());
            }
            distributions.push(if s.std_err_q_tls == 0.0 {
                QDistribution::Fixed(s.mean_q_tls)
            } else {
                QDistribution::Normal(Normal::new(s.mean_q_tls, s.std_err_q_tls).map_err(|_| bad())?)
            });
            aligned.push(s.clone());
        }
        Ok(MonteCarlo {
            config,
            stats: aligned,
            distributions,
            stream_keys: matrix.designs().iter().map(design_stream_key).collect(),
            solver: NnlsSolver::new(&to_dmatrix(&matrix))?,
            matrix,
        })
    }

    /// Designs in the order used by [`SampleDraw::q_tls`].
    pub fn designs(&self) -> &[DesignId] {
        self.matrix.designs()
    }

    /// Q_TLS draw for one iteration, or `None` when some design exhausted
    /// its redraw budget.
    pub fn draw(&self, iteration: u64) -> Option<SampleDraw> {
        let mut q_tls = Vec::with_capacity(self.distributions.len());
        let mut redraws = 0u64;
        for (dist, &key) in self.distributions.iter().zip(&self.stream_keys) {
            match dist {
                QDistribution::Fixed(q) => q_tls.push(*q),
                QDistribution::Normal(normal) => {
                    let mut rng = stream_rng(self.config.rng_seed, iteration, key);
                    let mut tries = 0;
                    let q = loop {
                        let q = normal.sample(&mut rng);
                        if q > 0.0 {
                            break q;
                        }
                        tries += 1;
                        if tries >= MAX_REDRAWS {
                            return None;
                        }
                    };
                    redraws += tries as u64;
                    q_tls.push(q);
                }
            }
        }
        Some(SampleDraw { q_tls, redraws })
    }

    /// Scaled tangents for one draw.
    pub fn solve_draw(&self, draw: &SampleDraw) -> Result<RegionArray<f64>, NnlsError> {
        let rhs: Vec<f64> = draw.q_tls.iter().map(|q| 1.0 / q).collect();
        let sol = self.solver.solve(&rhs)?;
        let scale = &self.config.region_scale;
        Ok(RegionArray::from_fn(|r| sol.x[r.index()] * scale[r]))
    }

    fn iteration(&self, i: u64) -> (Option<RegionArray<f64>>, u64) {
        match self.draw(i) {
            Some(d) => (self.solve_draw(&d).ok(), d.redraws),
            None => (None, 0),
        }
    }

    pub fn run(&self, parallel: bool) -> Result<ExtractionResult, ExtractError> {
        let n = self.config.n_samples;
        let outcomes: Vec<(Option<RegionArray<f64>>, u64)> = if parallel {
            (0..n as u64).into_par_iter().map(|i| self.iteration(i)).collect()
        } else {
            (0..n as u64).map(|i| self.iteration(i)).collect()
        };
        let rejected_draws = outcomes.iter().map(|o| o.1).sum();
        let kept: Vec<RegionArray<f64>> = outcomes.into_iter().filter_map(|o| o.0).collect();
        if kept.is_empty() {
            return Err(ExtractError::AllSamplesRejected(n));
        }

        let moments = RegionArray::from_fn(|r| {
            let column: Vec<f64> = kept.iter().map(|t| t[r]).collect();
            mean_and_std(&column).expect("at least one kept sample")
        });
        let estimates =
            bounds::finalize_estimates(&self.matrix, &self.stats, &moments, self.config)?;
        let condition = condition_number(&to_dmatrix(&self.matrix));
        if condition > CONDITION_WARNING {
            log::warn!("participation matrix is near-degenerate (condition number {condition:.3e})");
        }
        Ok(ExtractionResult {
            estimates,
            samples_kept: kept.len(),
            rejected_draws,
            condition_diagnostic: condition,
            ill_conditioned: condition > CONDITION_WARNING,
            per_sample_tangents: Some(kept),
            config: self.config.clone(),
        })
    }
}

/// Monte-Carlo extraction on the ambient rayon pool.
pub fn extract(
    matrix: &ParticipationMatrix,
    stats: &[EnsembleStats],
    config: &ExtractionConfig,
) -> Result<ExtractionResult, ExtractError> {
    MonteCarlo::new(matrix, stats, config)?.run(true)
}

/// Single-threaded extraction; bit-identical to [`extract`].
pub fn extract_serial(
    matrix: &ParticipationMatrix,
    stats: &[EnsembleStats],
    config: &ExtractionConfig,
) -> Result<ExtractionResult, ExtractError> {
    MonteCarlo::new(matrix, stats, config)?.run(false)
}
