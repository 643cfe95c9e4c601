//! Non-convex nodewise Lasso: column-by-column approximate inversion of a
//! symmetric (possibly indefinite) matrix through l1-penalized, l1-constrained
//! quadratic programs, with per-column noise levels and KKT certificates.

use crate::error::{Error, Result};
use crate::linalg::vecops::{dot, l1_norm};
use crate::linalg::{project_l1_ball, SymmetricMatrix};
use crate::solver::ProxGradProblem;

/// Noise levels at or below this floor raise a degenerate-column error: the
/// theory guarantees tau_j^2 bounded away from zero by the eigenvalue gap.
pub const TAU_FLOOR: f64 = 1e-8;
const BOUNDARY_DETECT: f64 = 1e-7;

/// One column of the approximate inverse.
#[derive(Debug, Clone)]
pub struct NodewiseColumn {
    pub index: usize,
    /// `gamma_j` in R^{p-1}: regression coefficients of the column program.
    pub gamma: Vec<f64>,
    /// `Gamma_j` in R^p: entry `j` is 1, entry `k != j` is `-gamma_{j,k}`.
    pub gamma_full: Vec<f64>,
    /// Noise level `Gamma_j^T A Gamma_j + lambda_j |gamma_j|_1 / 2`.
    pub tau_sq: f64,
    /// `Theta_j = Gamma_j / tau_sq`.
    pub theta: Vec<f64>,
    pub kkt_residual: f64,
    pub boundary_active: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// The stacked columns `Theta = [Theta_1, ..., Theta_p]`.
#[derive(Debug, Clone)]
pub struct PrecisionEstimate {
    pub dim: usize,
    pub columns: Vec<NodewiseColumn>,
}

impl PrecisionEstimate {
    pub fn theta_column(&self, j: usize) -> &[f64] {
        &self.columns[j].theta
    }

    /// `Theta^T v`: entry `j` is `Theta_j . v`.
    pub fn transpose_apply(&self, v: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| dot(&c.theta, v)).collect()
    }

    /// `Theta v` summed over columns.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (c, &vj) in self.columns.iter().zip(v) {
            if vj == 0.0 {
                continue;
            }
            for (o, t) in out.iter_mut().zip(&c.theta) {
                *o += vj * t;
            }
        }
        out
    }

    /// Dense row-major copy of the assembled matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        let p = self.dim;
        let mut m = vec![0.0; p * p];
        for (j, c) in self.columns.iter().enumerate() {
            for i in 0..p {
                m[i * p + j] = c.theta[i];
            }
        }
        m
    }
}

fn split_column(a: &SymmetricMatrix, j: usize) -> (Vec<f64>, Vec<f64>) {
    let p = a.dim();
    // A_{-j,-j} row-major and A_{j,-j}
    let mut sub = Vec::with_capacity((p - 1) * (p - 1));
    let mut col = Vec::with_capacity(p - 1);
    for i in 0..p {
        if i == j {
            continue;
        }
        let row = a.row(i);
        for (k, &v) in row.iter().enumerate() {
            if k != j {
                sub.push(v);
            }
        }
        col.push(a.get(j, i));
    }
    (sub, col)
}

fn gamma_to_full(gamma: &[f64], j: usize) -> Vec<f64> {
    let p = gamma.len() + 1;
    let mut full = Vec::with_capacity(p);
    for k in 0..p {
        if k == j {
            full.push(1.0);
        } else {
            let idx = if k < j { k } else { k - 1 };
            full.push(-gamma[idx]);
        }
    }
    full
}

/// Solves the column program
/// `min Gamma_j^T A Gamma_j + lambda_j |gamma_j|_1` s.t. `|gamma_j|_1 <= t_j`
/// by projected proximal gradient from `gamma_j = 0`, and assembles the
/// noise level and the scaled column.
pub fn nodewise_column(
    a: &SymmetricMatrix,
    j: usize,
    lambda_j: f64,
    t_j: f64,
    max_iter: usize,
    tol: f64,
) -> Result<NodewiseColumn> {
    let p = a.dim();
    if j >= p {
        return Err(Error::invalid("column index out of range"));
    }
    if lambda_j < 0.0 {
        return Err(Error::invalid("nodewise penalty must be non-negative"));
    }
    if !(t_j > 0.0) {
        return Err(Error::invalid("nodewise l1 budget must be positive"));
    }
    let (sub, col) = split_column(a, j);
    let d = p - 1;

    // smooth part of Gamma^T A Gamma as a function of gamma is
    // a_jj - 2 col.gamma + gamma' A_{-j,-j} gamma; the constant a_jj is
    // dropped from the line-search objective
    let smooth_value = |g: &[f64]| -> f64 {
        let mut quad = 0.0;
        for i in 0..d {
            quad += g[i] * dot(&sub[i * d..(i + 1) * d], g);
        }
        quad - 2.0 * dot(&col, g)
    };
    let smooth_gradient = |g: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|i| 2.0 * (dot(&sub[i * d..(i + 1) * d], g) - col[i]))
            .collect()
    };
    let spec = ProxGradProblem {
        smooth_value,
        smooth_gradient,
        project: |g: &[f64]| project_l1_ball(g, t_j).expect("validated radius"),
        boundary_active: |g: &[f64]| l1_norm(g) >= t_j - BOUNDARY_DETECT * t_j.max(1.0),
        lambda: lambda_j,
    };
    let out = spec.solve(&vec![0.0; d], max_iter, tol)?;

    let gamma_full = gamma_to_full(&out.x, j);
    let tau_sq = a.quadratic_form(&gamma_full) + 0.5 * lambda_j * l1_norm(&out.x);
    if !tau_sq.is_finite() || tau_sq <= TAU_FLOOR {
        return Err(Error::DegenerateColumn {
            index: j,
            tau_sq,
            floor: TAU_FLOOR,
        });
    }
    let theta = gamma_full.iter().map(|v| v / tau_sq).collect();
    Ok(NodewiseColumn {
        index: j,
        gamma: out.x,
        gamma_full,
        tau_sq,
        theta,
        kkt_residual: out.kkt_residual,
        boundary_active: out.boundary_active,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Runs every column program and stacks the scaled columns.
pub fn assemble_precision(
    a: &SymmetricMatrix,
    lambdas: &[f64],
    budgets: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<PrecisionEstimate> {
    let p = a.dim();
    if lambdas.len() != p || budgets.len() != p {
        return Err(Error::invalid("need one penalty and one budget per column"));
    }
    let mut columns = Vec::with_capacity(p);
    for j in 0..p {
        columns.push(nodewise_column(a, j, lambdas[j], budgets[j], max_iter, tol)?);
    }
    Ok(PrecisionEstimate { dim: p, columns })
}

/// Per-column KKT identities of a nodewise solution.
#[derive(Debug, Clone)]
pub struct ColumnIdentity {
    /// `|A_j^T Gamma_j - tau_j^2|`; zero at exact interior stationary points.
    pub diag_identity_error: f64,
    /// `|A_{-j}^T Gamma_j|_inf`; at most `lambda_j / 2` at exact interior
    /// stationary points.
    pub offdiag_max: f64,
}

/// Report on `|A^T Theta - I|_inf` together with the per-column identities.
#[derive(Debug, Clone)]
pub struct InverseResidual {
    pub max_abs_deviation: f64,
    pub columns: Vec<ColumnIdentity>,
}

pub fn inverse_residual(a: &SymmetricMatrix, theta: &PrecisionEstimate) -> InverseResidual {
    let p = a.dim();
    debug_assert_eq!(p, theta.dim);
    let mut max_abs = 0.0f64;
    let mut columns = Vec::with_capacity(p);
    for (j, c) in theta.columns.iter().enumerate() {
        let at = a.matvec(&c.theta);
        for (i, v) in at.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            max_abs = max_abs.max((v - target).abs());
        }
        let ag = a.matvec(&c.gamma_full);
        let diag_identity_error = (ag[j] - c.tau_sq).abs();
        let offdiag_max = ag
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
        columns.push(ColumnIdentity {
            diag_identity_error,
            offdiag_max,
        });
    }
    InverseResidual {
        max_abs_deviation: max_abs,
        columns,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vecops::linf_norm;

    fn diag(entries: &[f64]) -> SymmetricMatrix {
        SymmetricMatrix::from_fn(entries.len(), |i, j| if i == j { entries[i] } else { 0.0 })
    }

    #[test]
    fn identity_matrix_gives_unit_columns() {
        let a = SymmetricMatrix::identity(4);
        for j in 0..4 {
            let c = nodewise_column(&a, j, 0.1, 100.0, 5000, 1e-10).unwrap();
            assert!(c.converged);
            assert!(linf_norm(&c.gamma) == 0.0);
            assert!((c.tau_sq - 1.0).abs() < 1e-12);
            for (i, t) in c.theta.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((t - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_matrix_inverts_diagonal() {
        let a = diag(&[2.0, 0.5, 4.0]);
        for j in 0..3 {
            let c = nodewise_column(&a, j, 0.1, 100.0, 5000, 1e-10).unwrap();
            let expect = 1.0 / a.get(j, j);
            assert!((c.theta[j] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn small_pd_matrix_matches_inverse() {
        let a = SymmetricMatrix::try_from_rows(&[
            vec![2.0, 0.3, -0.1],
            vec![0.3, 1.5, 0.2],
            vec![-0.1, 0.2, 1.0],
        ])
        .unwrap();
        let inv = a
            .to_nalgebra()
            .try_inverse()
            .expect("well conditioned");
        let est = assemble_precision(&a, &[1e-6; 3], &[1e6; 3], 50_000, 1e-10).unwrap();
        for j in 0..3 {
            for i in 0..3 {
                let diff = (est.theta_column(j)[i] - inv[(i, j)]).abs();
                assert!(diff < 1e-3, "({i},{j}): {diff}");
            }
        }
    }

    #[test]
    fn kkt_identities_hold_for_interior_columns() {
        let mut rng = crate::rng::SplitMix64::new(13);
        // random PD matrix: B B^T / d + I
        let d = 6;
        let b: Vec<f64> = (0..d * d).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let a = SymmetricMatrix::from_fn(d, |i, j| {
            let mut acc = if i == j { 1.0 } else { 0.0 };
            for k in 0..d {
                acc += b[i * d + k] * b[j * d + k] / d as f64;
            }
            acc
        });
        let tol = 1e-6;
        let est = assemble_precision(&a, &[0.05; 6], &[100.0; 6], 50_000, tol).unwrap();
        let report = inverse_residual(&a, &est);
        for (j, (col, ident)) in est.columns.iter().zip(&report.columns).enumerate() {
            assert!(col.converged, "column {j}");
            if !col.boundary_active {
                assert!(
                    ident.diag_identity_error <= 10.0 * tol,
                    "column {j}: {}",
                    ident.diag_identity_error
                );
                assert!(
                    ident.offdiag_max <= 0.05 / 2.0 + 10.0 * tol,
                    "column {j}: {}",
                    ident.offdiag_max
                );
            }
        }
    }

    #[test]
    fn inverse_residual_exact_inverse_is_zero() {
        let a = SymmetricMatrix::try_from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let inv = a.to_nalgebra().try_inverse().unwrap();
        let columns = (0..2)
            .map(|j| {
                let theta: Vec<f64> = (0..2).map(|i| inv[(i, j)]).collect();
                let tau_sq = 1.0 / theta[j];
                let gamma_full: Vec<f64> = theta.iter().map(|t| t * tau_sq).collect();
                let gamma = (0..2)
                    .filter(|k| *k != j)
                    .map(|k| -gamma_full[k])
                    .collect();
                NodewiseColumn {
                    index: j,
                    gamma,
                    gamma_full,
                    tau_sq,
                    theta,
                    kkt_residual: 0.0,
                    boundary_active: false,
                    iterations: 0,
                    converged: true,
                }
            })
            .collect();
        let est = PrecisionEstimate { dim: 2, columns };
        let r = inverse_residual(&a, &est);
        assert!(r.max_abs_deviation < 1e-10);
    }

    #[test]
    fn inverse_residual_zero_estimate_is_one() {
        let a = SymmetricMatrix::identity(3);
        let columns = (0..3)
            .map(|j| NodewiseColumn {
                index: j,
                gamma: vec![0.0; 2],
                gamma_full: gamma_to_full(&[0.0, 0.0], j),
                tau_sq: 1.0,
                theta: vec![0.0; 3],
                kkt_residual: 0.0,
                boundary_active: false,
                iterations: 0,
                converged: true,
            })
            .collect();
        let est = PrecisionEstimate { dim: 3, columns };
        let r = inverse_residual(&a, &est);
        assert!((r.max_abs_deviation - 1.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_input_stays_finite() {
        // indefinite matrix with a clear negative eigenvalue
        let a = SymmetricMatrix::try_from_rows(&[
            vec![1.0, 0.0, 0.9],
            vec![0.0, -0.5, 0.0],
            vec![0.9, 0.0, 1.0],
        ])
        .unwrap();
        for j in 0..3 {
            match nodewise_column(&a, j, 0.2, 5.0, 20_000, 1e-8) {
                Ok(c) => {
                    assert!(c.kkt_residual.is_finite());
                    assert!(c.theta.iter().all(|t| t.is_finite()));
                }
                Err(Error::DegenerateColumn { .. }) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn penalty_monotonicity() {
        let a = SymmetricMatrix::try_from_rows(&[
            vec![2.0, 0.6, 0.3],
            vec![0.6, 1.8, 0.4],
            vec![0.3, 0.4, 1.2],
        ])
        .unwrap();
        let mut norms = Vec::new();
        for lambda in [0.01, 0.05, 0.2, 0.8] {
            let c = nodewise_column(&a, 0, lambda, 100.0, 50_000, 1e-10).unwrap();
            norms.push(l1_norm(&c.gamma));
        }
        for w in norms.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{norms:?}");
        }
    }

    #[test]
    fn oracle_equivalence_as_lambda_vanishes() {
        let a = SymmetricMatrix::try_from_rows(&[
            vec![1.5, 0.4, 0.1, 0.0],
            vec![0.4, 2.0, 0.3, 0.2],
            vec![0.1, 0.3, 1.2, 0.1],
            vec![0.0, 0.2, 0.1, 1.8],
        ])
        .unwrap();
        let inv = a.to_nalgebra().try_inverse().unwrap();
        let mut errs = Vec::new();
        for lambda in [1e-2, 1e-4, 1e-6] {
            let c = nodewise_column(&a, 1, lambda, 1e6, 100_000, 1e-11).unwrap();
            let err: f64 = (0..4)
                .map(|i| (c.theta[i] - inv[(i, 1)]).powi(2))
                .sum::<f64>()
                .sqrt();
            errs.push(err);
        }
        assert!(errs[0] >= errs[1] && errs[1] >= errs[2], "{errs:?}");
        assert!(errs[2] < 1e-3, "{errs:?}");
    }
}
