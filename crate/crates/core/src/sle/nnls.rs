//! Active-set non-negative least squares (Lawson–Hanson).
//!
//! Minimizes `‖A x − b‖₂` subject to `x ≥ 0`. Columns are scaled to unit
//! norm before solving so the stationarity test is insensitive to the very
//! different magnitudes of interface and bulk participation columns.

use nalgebra::{DMatrix, DVector};

/// Stationarity tolerance, relative to the largest component of `Aᵀb`
/// in the column-normalized problem.
pub const STATIONARITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnlsError {
    #[error("dimension mismatch: matrix has {rows} rows but right-hand side has {rhs}")]
    DimensionMismatch { rows: usize, rhs: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("active-set iteration did not converge after {0} steps")]
    NotConverged(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    /// Largest KKT violation in normalized units (see [`kkt_violation`]).
    pub kkt_violation: f64,
    pub iterations: usize,
}

/// Column-normalized copy of a design matrix, reusable across many
/// right-hand sides.
#[derive(Debug, Clone)]
pub struct NnlsSolver {
    scaled: DMatrix<f64>,
    norms: Vec<f64>,
}

impl NnlsSolver {
    pub fn new(a: &DMatrix<f64>) -> Result<Self, NnlsError> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(NnlsError::NonFinite("matrix"));
        }
        let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
        let mut scaled = a.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            if norms[j] > 0.0 {
                col /= norms[j];
            }
        }
        Ok(NnlsSolver { scaled, norms })
    }

    pub fn nrows(&self) -> usize {
        self.scaled.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.scaled.ncols()
    }

    pub fn solve(&self, b: &[f64]) -> Result<NnlsSolution, NnlsError> {
        let (m, n) = self.scaled.shape();
        if b.len() != m {
            return Err(NnlsError::DimensionMismatch { rows: m, rhs: b.len() });
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(NnlsError::NonFinite("right-hand side"));
        }
        let a = &self.scaled;
        let b = DVector::from_column_slice(b);

        let gradient_scale = (a.transpose() * &b).amax();
        let tol = STATIONARITY_TOL * gradient_scale;

        let usable: Vec<bool> = self.norms.iter().map(|&c| c > 0.0).collect();
        let mut passive = vec![false; n];
        let mut y = DVector::<f64>::zeros(n);
        let max_steps = 10 * n + 10;
        let mut steps = 0;
        // columns refused in the current outer pass because their trial
        // coefficient came out non-positive (round-off near degeneracy)
        let mut blocked = vec![false; n];

        if gradient_scale > 0.0 {
            loop {
                let w = a.transpose() * (&b - a * &y);
                let entering = (0..n)
                    .filter(|&j| usable[j] && !passive[j] && !blocked[j] && w[j] > tol)
                    .max_by(|&i, &j| w[i].total_cmp(&w[j]));
                let Some(j) = entering else { break };
                steps += 1;
                if steps > max_steps {
                    return Err(NnlsError::NotConverged(steps));
                }

                passive[j] = true;
                let mut first = true;
                loop {
                    let s = passive_least_squares(a, &b, &passive);
                    if first && s[j] <= 0.0 {
                        passive[j] = false;
                        blocked[j] = true;
                        break;
                    }
                    first = false;
                    let infeasible = (0..n).filter(|&i| passive[i] && s[i] <= 0.0);
                    let step = infeasible
                        .map(|i| (i, y[i] / (y[i] - s[i])))
                        .min_by(|p, q| p.1.total_cmp(&q.1));
                    match step {
                        None => {
                            y = s;
                            blocked.iter_mut().for_each(|v| *v = false);
                            break;
                        }
                        Some((leaving, alpha)) => {
                            steps += 1;
                            if steps > max_steps {
                                return Err(NnlsError::NotConverged(steps));
                            }
                            y += (s - &y) * alpha;
                            y[leaving] = 0.0;
                            passive[leaving] = false;
                            for i in 0..n {
                                if passive[i] && y[i] <= 0.0 {
                                    y[i] = 0.0;
                                    passive[i] = false;
                                }
                            }
                            blocked.iter_mut().for_each(|v| *v = false);
                        }
                    }
                }
            }
        }

        let residual_norm = (&b - a * &y).norm();
        let kkt = scaled_kkt(a, &b, &y, gradient_scale);
        let x = y
            .iter()
            .zip(&self.norms)
            .map(|(&yi, &c)| if c > 0.0 { yi / c } else { 0.0 })
            .collect();
        Ok(NnlsSolution {
            x,
            residual_norm,
            kkt_violation: kkt,
            iterations: steps,
        })
    }
}

/// Unconstrained least squares restricted to the passive columns, with one
/// step of iterative refinement. Non-passive entries are zero.
///
/// Normal equations by Cholesky when the passive block is well conditioned
/// (the refinement step recovers the accuracy squaring would cost),
/// truncated SVD otherwise.
fn passive_least_squares(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let sub = a.select_columns(&cols);
    let solve: Box<dyn Fn(&DVector<f64>) -> DVector<f64>> = match cholesky_solver(&sub) {
        Some(f) => f,
        None => {
            let svd = sub.clone().svd(true, true);
            let eps = f64::EPSILON * sub.nrows().max(sub.ncols()) as f64 * svd.singular_values.max();
            Box::new(move |rhs| svd.solve(rhs, eps).expect("U and V were computed"))
        }
    };
    let mut z = solve(b);
    let r = b - &sub * &z;
    if r.iter().any(|&v| v != 0.0) {
        z += solve(&r);
    }
    let mut full = DVector::zeros(passive.len());
    for (k, &j) in cols.iter().enumerate() {
        full[j] = z[k];
    }
    full
}

fn cholesky_solver(sub: &DMatrix<f64>) -> Option<Box<dyn Fn(&DVector<f64>) -> DVector<f64>>> {
    let t = sub.transpose();
    let chol = (&t * sub).cholesky()?;
    let l = chol.l_dirty();
    let n = sub.ncols();
    let (lo, hi) = (0..n).fold((f64::INFINITY, 0.0_f64), |(lo, hi), k| {
        let d = l[(k, k)].abs();
        (lo.min(d), hi.max(d))
    });
    if !(lo > 1e-6 * hi) {
        return None;
    }
    Some(Box::new(move |rhs| chol.solve(&(&t * rhs))))
}

fn scaled_kkt(a: &DMatrix<f64>, b: &DVector<f64>, y: &DVector<f64>, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let w = a.transpose() * (b - a * y);
    let mut worst: f64 = 0.0;
    for j in 0..y.len() {
        let v = if y[j] > 0.0 { w[j].abs() } else { w[j].max(0.0) };
        worst = worst.max(v / scale);
    }
    worst
}

/// Largest KKT violation of `x` for `min ‖Ax − b‖ s.t. x ≥ 0`, measured on
/// the column-normalized problem and relative to `max |Âᵀb|`.
/// Negative entries of `x` count as primal violations.
pub fn kkt_violation(a: &DMatrix<f64>, b: &[f64], x: &[f64]) -> f64 {
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let mut scaled = a.clone();
    let mut y = DVector::zeros(x.len());
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        if norms[j] > 0.0 {
            col /= norms[j];
            y[j] = x[j] * norms[j];
        }
    }
    let b = DVector::from_column_slice(b);
    let scale = (scaled.transpose() * &b).amax();
    let primal = x.iter().fold(0.0f64, |acc, &v| acc.max(-v));
    primal.max(scaled_kkt(&scaled, &b, &y, scale))
}

/// One-shot convenience wrapper.
pub fn nnls(a: &DMatrix<f64>, b: &[f64]) -> Result<NnlsSolution, NnlsError> {
    NnlsSolver::new(a)?.solve(b)
}

/// Ratio of largest to smallest singular value; infinite when singular.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if max == 0.0 {
        f64::INFINITY
    } else if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system_returns_rhs() {
        let a = DMatrix::identity(4, 4);
        let b = [1e-6, 2e-6, 3e-6, 4e-7];
        let s = nnls(&a, &b).unwrap();
        assert_eq!(s.x, b.to_vec());
        assert_eq!(s.residual_norm, 0.0);
    }

    #[test]
    fn negative_component_clamps() {
        let a = DMatrix::identity(4, 4);
        let b = [1e-6, -2e-7, 3e-6, 4e-7];
        let s = nnls(&a, &b).unwrap();
        assert_eq!(s.x, vec![1e-6, 0.0, 3e-6, 4e-7]);
        assert!(kkt_violation(&a, &b, &s.x) <= 1e-12);
    }

    /// 2×2 subcase: exhaustive grid over x ≥ 0 locates the same optimum as
    /// the active-set solve.
    #[test]
    fn two_by_two_matches_grid_search() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.4, 1.0]);
        let b = [1.0, -0.5];
        let s = nnls(&a, &b).unwrap();

        let objective = |x0: f64, x1: f64| {
            let r0 = 1.0 * x0 + 0.6 * x1 - b[0];
            let r1 = 0.4 * x0 + 1.0 * x1 - b[1];
            r0 * r0 + r1 * r1
        };
        let (mut best, mut arg) = (f64::INFINITY, (0.0, 0.0));
        let h = 1e-4;
        for i in 0..=20_000 {
            for k in 0..=200 {
                let (x0, x1) = (i as f64 * h, k as f64 * h);
                let f = objective(x0, x1);
                if f < best {
                    best = f;
                    arg = (x0, x1);
                }
            }
        }
        assert_eq!(arg.1, 0.0);
        assert!((s.x[0] - arg.0).abs() <= h);
        assert_eq!(s.x[1], 0.0);
        assert!(objective(s.x[0], s.x[1]) <= best + 1e-12);
    }

    #[test]
    fn zero_rhs_and_zero_column() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let s = nnls(&a, &[0.0; 3]).unwrap();
        assert_eq!(s.x, vec![0.0, 0.0]);
        let s = nnls(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.x[1], 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = DMatrix::identity(4, 4);
        assert_eq!(
            nnls(&a, &[1.0; 3]).unwrap_err(),
            NnlsError::DimensionMismatch { rows: 4, rhs: 3 }
        );
    }

    #[test]
    fn rank_deficient_is_handled() {
        // duplicated column: the optimum is not unique but the objective is
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 0.5, 0.5]);
        let b = [1.0, 2.0, 0.5];
        let s = nnls(&a, &b).unwrap();
        assert!(s.residual_norm < 1e-12);
        assert!((s.x[0] + s.x[1] - 1.0).abs() < 1e-12);
        assert!(condition_number(&a).is_infinite() || condition_number(&a) > 1e15);
    }

    #[test]
    fn condition_of_identity() {
        assert_eq!(condition_number(&DMatrix::identity(4, 4)), 1.0);
    }
}
