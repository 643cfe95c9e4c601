//! First-step localization: the l1-penalized semidefinite relaxation
//! `max tr(Sigma Z) - lambda |Z|_1` over the Fantope `{tr Z = 1, 0 <= Z <= I}`
//! and the scaled initial loadings extracted from its solution.
//!
//! The solver is alternating-direction splitting with a fixed penalty
//! parameter of 1: one block is the Fantope projection, the other the
//! entrywise soft threshold, with a scaled dual update. It is warm-started at
//! the top eigenprojector of the input.

use crate::error::{Error, Result};
use crate::linalg::{
    project_fantope, soft_threshold_matrix, symmetric_eigen, SymmetricMatrix,
};

const ADMM_RHO: f64 = 1.0;

/// Solution of the relaxed program.
#[derive(Debug, Clone)]
pub struct FantopeSolution {
    /// Feasible iterate: trace 1, eigenvalues in [0, 1] up to projection
    /// tolerance.
    pub z: SymmetricMatrix,
    /// `tr(Sigma Z) - lambda |Z|_1` at `z`.
    pub objective: f64,
    /// Scaled primal residual `|Z - Y|_F / (p + max(|Z|_F, |Y|_F))`.
    pub primal_residual: f64,
    /// Scaled dual residual `rho |Y - Y_prev|_F / (p + |W|_F)`.
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Augmented-Lagrangian merit after each iteration. Diagnostic: plain
    /// alternating-direction iterations do not make this monotone.
    pub merit_history: Vec<f64>,
    /// Frobenius displacement of the splitting state (Y, W) per iteration.
    /// The update map is firmly nonexpansive, so this never increases.
    pub displacement_history: Vec<f64>,
}

/// Initial loadings estimate from the relaxation.
#[derive(Debug, Clone)]
pub struct InitialEstimate {
    /// `sqrt(tr(Sigma Z)) * u_1`.
    pub beta_init: Vec<f64>,
    /// `tr(Sigma Z)`, clipped at zero.
    pub scale: f64,
    /// Top eigenvector of `Z`, unit norm, canonical sign.
    pub leading_vector: Vec<f64>,
}

pub fn solve_fantope(
    sigma_hat: &SymmetricMatrix,
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> Result<FantopeSolution> {
    if lambda < 0.0 {
        return Err(Error::invalid("fantope penalty must be non-negative"));
    }
    if !sigma_hat.is_finite() {
        return Err(Error::invalid("covariance contains non-finite entries"));
    }
    let p = sigma_hat.dim();
    let scale_dim = p as f64;

    // warm start at the top eigenprojector
    let eig = symmetric_eigen(sigma_hat)?;
    let mut weights = vec![0.0; p];
    weights[0] = 1.0;
    let mut z = eig.reassemble_with(&weights);
    let mut y = z.clone();
    let mut dual = SymmetricMatrix::zeros(p);

    let sigma_over_rho = sigma_hat.map(|v| v / ADMM_RHO);
    let mut primal_residual = f64::INFINITY;
    let mut dual_residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut merit_history = Vec::new();
    let mut displacement_history = Vec::new();

    while iterations < max_iter {
        iterations += 1;
        // Z-block: Fantope projection of Y - W + Sigma/rho
        let zin = y.add_scaled(&dual, -1.0).add_scaled(&sigma_over_rho, 1.0);
        z = project_fantope(&zin)?;
        // Y-block: entrywise soft threshold of Z + W
        let yin = z.add_scaled(&dual, 1.0);
        let y_next = soft_threshold_matrix(&yin, lambda / ADMM_RHO);
        // scaled dual update
        let gap = z.add_scaled(&y_next, -1.0);
        dual = dual.add_scaled(&gap, 1.0);

        let primal = gap.frobenius_norm();
        let dual_change = ADMM_RHO * y_next.add_scaled(&y, -1.0).frobenius_norm();
        displacement_history
            .push((dual_change.powi(2) + gap.frobenius_norm_sq()).sqrt());
        y = y_next;

        if !z.is_finite() || !y.is_finite() {
            return Err(Error::numerical("fantope iterates became non-finite"));
        }

        primal_residual = primal / (scale_dim + z.frobenius_norm().max(y.frobenius_norm()));
        dual_residual = dual_change / (scale_dim + dual.frobenius_norm());

        // scaled augmented Lagrangian of the minimization form
        let merit = -sigma_hat.inner(&z)
            + lambda * y.entrywise_l1()
            + 0.5 * ADMM_RHO
                * (z.add_scaled(&y, -1.0).add_scaled(&dual, 1.0).frobenius_norm_sq()
                    - dual.frobenius_norm_sq());
        merit_history.push(merit);

        if primal_residual.max(dual_residual) <= tol {
            converged = true;
            break;
        }
    }

    let objective = sigma_hat.inner(&z) - lambda * z.entrywise_l1();
    Ok(FantopeSolution {
        z,
        objective,
        primal_residual,
        dual_residual,
        iterations,
        converged,
        merit_history,
        displacement_history,
    })
}

/// Extracts `beta_init = tr(Sigma Z)^{1/2} u_1` from a Fantope solution.
///
/// Small negative traces (possible transiently from numerical error, not at
/// exact solutions) are clipped at zero; anything below -1e-6 signals solver
/// failure.
pub fn extract_initial(
    sol: &FantopeSolution,
    sigma_hat: &SymmetricMatrix,
) -> Result<InitialEstimate> {
    let raw = sigma_hat.inner(&sol.z);
    if raw < -1e-6 {
        return Err(Error::numerical(format!(
            "tr(Sigma Z) = {raw:.3e} is negative; fantope solve failed"
        )));
    }
    let scale = raw.max(0.0);
    let eig = symmetric_eigen(&sol.z)?;
    let leading_vector = eig.vectors[0].clone();
    let beta_init = leading_vector.iter().map(|x| scale.sqrt() * x).collect();
    Ok(InitialEstimate {
        beta_init,
        scale,
        leading_vector,
    })
}
