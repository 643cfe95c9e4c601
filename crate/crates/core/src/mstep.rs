//! Second-step estimator: the empirical PCA risk, its derivatives, and a
//! projected proximal-gradient solver for the l1-penalized program over the
//! intersection of an l1 ball and an l2 locality ball.

use crate::error::{Error, Result};
use crate::linalg::vecops::{l1_norm, l2_distance, l2_norm_sq};
use crate::linalg::{project_l1_ball, project_l2_ball, SymmetricMatrix};
use crate::solver::{stationarity_residual, ProxGradProblem};

/// Tolerance slack for feasibility checks on returned estimates.
pub const FEASIBILITY_SLACK: f64 = 1e-8;
const BOUNDARY_DETECT: f64 = 1e-7;
const ALTERNATING_CAP: usize = 50;
const ALTERNATING_DISPLACEMENT: f64 = 1e-10;

/// The localized l1-penalized problem
/// `min R_n(beta) + lambda |beta|_1` over
/// `{ |beta|_1 <= l1_budget } \cap { |beta - center|_2 <= locality_radius }`.
#[derive(Debug, Clone)]
pub struct RiskProblem {
    pub sigma_hat: SymmetricMatrix,
    pub lambda: f64,
    pub l1_budget: f64,
    pub locality_radius: f64,
    pub center: Vec<f64>,
}

impl RiskProblem {
    pub fn new(
        sigma_hat: SymmetricMatrix,
        lambda: f64,
        l1_budget: f64,
        locality_radius: f64,
        center: Vec<f64>,
    ) -> Result<Self> {
        if lambda < 0.0 {
            return Err(Error::invalid("penalty must be non-negative"));
        }
        if !(l1_budget > 0.0) {
            return Err(Error::invalid("l1 budget must be positive"));
        }
        if !(locality_radius > 0.0) {
            return Err(Error::invalid("locality radius must be positive"));
        }
        if center.len() != sigma_hat.dim() {
            return Err(Error::invalid("center dimension mismatch"));
        }
        if !center.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("center contains non-finite entries"));
        }
        Ok(RiskProblem {
            sigma_hat,
            lambda,
            l1_budget,
            locality_radius,
            center,
        })
    }

    /// Projection onto the intersection by alternating l1-ball and l2-ball
    /// projections, capped at 50 alternations. Each cycle ends with the l2
    /// projection, so the locality constraint holds exactly at return.
    pub fn project_feasible(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for _ in 0..ALTERNATING_CAP {
            let l1_ok = l1_norm(&cur) <= self.l1_budget + 1e-12;
            let l2_ok = l2_distance(&cur, &self.center) <= self.locality_radius + 1e-12;
            if l1_ok && l2_ok {
                break;
            }
            let after_l1 = project_l1_ball(&cur, self.l1_budget).expect("validated radius");
            let after_l2 = project_l2_ball(&after_l1, &self.center, self.locality_radius)
                .expect("validated radius");
            let moved = l2_distance(&after_l2, &cur);
            cur = after_l2;
            if moved <= ALTERNATING_DISPLACEMENT {
                break;
            }
        }
        cur
    }

    fn is_feasible(&self, x: &[f64], slack: f64) -> bool {
        l1_norm(x) <= self.l1_budget + slack
            && l2_distance(x, &self.center) <= self.locality_radius + slack
    }

    fn boundary_active_flags(&self, x: &[f64]) -> (bool, bool) {
        let l1 = l1_norm(x) >= self.l1_budget - BOUNDARY_DETECT * self.l1_budget.max(1.0);
        let l2 = l2_distance(x, &self.center)
            >= self.locality_radius - BOUNDARY_DETECT * self.locality_radius.max(1.0);
        (l1, l2)
    }
}

/// A certified (approximately) stationary point of the second-step program.
#[derive(Debug, Clone)]
pub struct LoadingsEstimate {
    pub beta: Vec<f64>,
    /// `R_n(beta)` at the estimate.
    pub risk_value: f64,
    pub kkt_residual: f64,
    pub l1_active: bool,
    pub l2_active: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// `R_n(beta) = 1/4 |Sigma - beta beta^T|_F^2`, expanded as
/// `1/4 tr(Sigma^2) - 1/2 beta^T Sigma beta + 1/4 |beta|_2^4` so the outer
/// product is never materialized.
pub fn empirical_risk(sigma_hat: &SymmetricMatrix, beta: &[f64]) -> f64 {
    0.25 * sigma_hat.frobenius_norm_sq() - 0.5 * sigma_hat.quadratic_form(beta)
        + 0.25 * l2_norm_sq(beta).powi(2)
}

/// Gradient `-Sigma beta + |beta|_2^2 beta`.
pub fn risk_gradient(sigma_hat: &SymmetricMatrix, beta: &[f64]) -> Vec<f64> {
    let sb = sigma_hat.matvec(beta);
    let norm_sq = l2_norm_sq(beta);
    beta.iter()
        .zip(&sb)
        .map(|(b, s)| norm_sq * b - s)
        .collect()
}

/// Hessian `-Sigma + |beta|_2^2 I + 2 beta beta^T`.
pub fn risk_hessian(sigma_hat: &SymmetricMatrix, beta: &[f64]) -> SymmetricMatrix {
    let norm_sq = l2_norm_sq(beta);
    SymmetricMatrix::from_fn(sigma_hat.dim(), |i, j| {
        let diag = if i == j { norm_sq } else { 0.0 };
        diag - sigma_hat.get(i, j) + 2.0 * beta[i] * beta[j]
    })
}

/// Projected proximal-gradient solve of the second-step program from `start`
/// (projected onto the feasible set if necessary).
pub fn solve_second_step(
    problem: &RiskProblem,
    start: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<LoadingsEstimate> {
    if start.len() != problem.sigma_hat.dim() {
        return Err(Error::invalid("start dimension mismatch"));
    }
    // constant 1/4 tr(Sigma^2) dropped from the line-search objective: it
    // only adds floating-point noise to the decrease comparisons
    let sigma = &problem.sigma_hat;
    let spec = ProxGradProblem {
        smooth_value: move |x: &[f64]| {
            -0.5 * sigma.quadratic_form(x) + 0.25 * l2_norm_sq(x).powi(2)
        },
        smooth_gradient: move |x: &[f64]| risk_gradient(sigma, x),
        project: |x: &[f64]| problem.project_feasible(x),
        boundary_active: |x: &[f64]| {
            let (l1, l2) = problem.boundary_active_flags(x);
            l1 || l2
        },
        lambda: problem.lambda,
    };
    let out = spec.solve(start, max_iter, tol)?;
    let (l1_active, l2_active) = problem.boundary_active_flags(&out.x);
    Ok(LoadingsEstimate {
        risk_value: empirical_risk(&problem.sigma_hat, &out.x),
        kkt_residual: out.kkt_residual,
        l1_active,
        l2_active,
        iterations: out.iterations,
        converged: out.converged,
        beta: out.x,
    })
}

/// Stationarity residual of a feasible point: coordinatewise min-norm
/// subgradient in sup-norm for interior points, tangent-cone displacement of
/// the descent direction for boundary-active points.
pub fn check_stationarity(problem: &RiskProblem, beta: &[f64]) -> Result<f64> {
    if beta.len() != problem.sigma_hat.dim() {
        return Err(Error::invalid("dimension mismatch"));
    }
    if !problem.is_feasible(beta, FEASIBILITY_SLACK) {
        return Err(Error::invalid("point is infeasible"));
    }
    let g = risk_gradient(&problem.sigma_hat, beta);
    let (l1, l2) = problem.boundary_active_flags(beta);
    Ok(stationarity_residual(beta, &g, problem.lambda, l1 || l2, |x| {
        problem.project_feasible(x)
    }))
}
