//! De-biasing layer: one-step correction of the regularized loadings estimate
//! and of the implied top-eigenvalue estimate, variance estimation, confidence
//! intervals, thresholded support recovery, and the classical-PCA baseline.

use crate::error::{Error, Result};
use crate::linalg::vecops::{dot, l2_norm_sq};
use crate::linalg::{symmetric_eigen, DataMatrix, SymmetricMatrix};
use crate::nodewise::PrecisionEstimate;

/// Inference output of the de-biased pipeline.
#[derive(Debug, Clone)]
pub struct InferenceResult {
    /// De-sparsified loadings `b = beta - Theta^T grad R_n(beta)`.
    pub b_hat: Vec<f64>,
    /// De-biased top-eigenvalue estimate.
    pub lambda_hat: f64,
    /// Estimated per-coordinate asymptotic standard deviations.
    pub sigma_j_hat: Vec<f64>,
    /// Estimated asymptotic standard deviation of the eigenvalue pivot.
    pub sigma_lambda_hat: f64,
    /// Per-coordinate confidence intervals at `level`.
    pub intervals: Vec<(f64, f64)>,
    pub level: f64,
    /// Support recovered by thresholding `|b_hat|`.
    pub support: Vec<usize>,
}

/// Gradient of the empirical risk written as `|beta|^2 beta - Sigma beta`.
fn risk_direction(beta_hat: &[f64], sigma_hat: &SymmetricMatrix) -> Vec<f64> {
    let norm_sq = l2_norm_sq(beta_hat);
    let sb = sigma_hat.matvec(beta_hat);
    beta_hat
        .iter()
        .zip(&sb)
        .map(|(b, s)| norm_sq * b - s)
        .collect()
}

/// `b = beta - Theta^T (|beta|^2 beta - Sigma beta)`.
pub fn debias_loadings(
    beta_hat: &[f64],
    theta: &PrecisionEstimate,
    sigma_hat: &SymmetricMatrix,
) -> Vec<f64> {
    let dir = risk_direction(beta_hat, sigma_hat);
    let correction = theta.transpose_apply(&dir);
    beta_hat
        .iter()
        .zip(&correction)
        .map(|(b, c)| b - c)
        .collect()
}

/// `Lambda = |beta|^2 - 2 beta^T Theta^T (|beta|^2 beta - Sigma beta)`.
pub fn debias_eigenvalue(
    beta_hat: &[f64],
    theta: &PrecisionEstimate,
    sigma_hat: &SymmetricMatrix,
) -> f64 {
    let dir = risk_direction(beta_hat, sigma_hat);
    let correction = theta.transpose_apply(&dir);
    l2_norm_sq(beta_hat) - 2.0 * dot(beta_hat, &correction)
}

/// Empirical variance of the influence terms
/// `(Theta_j^T X_i)(X_i^T beta)`; clamped at zero against rounding.
pub fn estimate_sigma_j_sq(x: &DataMatrix, beta_hat: &[f64], theta_j: &[f64]) -> f64 {
    let n = x.n() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for row in x.rows() {
        let w = dot(theta_j, row) * dot(row, beta_hat);
        sum += w;
        sum_sq += w * w;
    }
    let mean = sum / n;
    (sum_sq / n - mean * mean).max(0.0)
}

/// Asymptotic variance of the eigenvalue pivot.
///
/// With the Gaussian shortcut this is `2 |beta|_2^4` (the plug-in for
/// `2 Lambda_max^2`); otherwise the empirical variance of the influence terms
/// `2 beta^T Theta^T X_i X_i^T beta`.
pub fn estimate_sigma_lambda_sq(
    x: &DataMatrix,
    beta_hat: &[f64],
    theta: &PrecisionEstimate,
    gaussian_shortcut: bool,
) -> f64 {
    if gaussian_shortcut {
        return 2.0 * l2_norm_sq(beta_hat).powi(2);
    }
    let u = theta.apply(beta_hat); // (Theta beta), so beta' Theta' x = u . x
    let n = x.n() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for row in x.rows() {
        let w = 2.0 * dot(&u, row) * dot(row, beta_hat);
        sum += w;
        sum_sq += w * w;
    }
    let mean = sum / n;
    (sum_sq / n - mean * mean).max(0.0)
}

/// Two-sided intervals `b_j +- z_{(1+level)/2} sigma_j / sqrt(n)`.
pub fn confidence_intervals(
    b_hat: &[f64],
    sigmas: &[f64],
    n: usize,
    level: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("confidence level must be in (0, 1)"));
    }
    if b_hat.len() != sigmas.len() {
        return Err(Error::invalid("sigma vector length mismatch"));
    }
    let z = normal_quantile((1.0 + level) / 2.0);
    let root_n = (n as f64).sqrt();
    Ok(b_hat
        .iter()
        .zip(sigmas)
        .map(|(b, s)| {
            let half = z * s / root_n;
            (b - half, b + half)
        })
        .collect())
}

/// `{ i : |b_i| > C sqrt(log p / n) }`. The absolute value keeps the rule
/// invariant under the sign ambiguity of the loadings vector.
pub fn threshold_support(b_hat: &[f64], c: f64, p: usize, n: usize) -> Vec<usize> {
    let cut = c * ((p as f64).ln() / n as f64).sqrt();
    b_hat
        .iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > cut)
        .map(|(i, _)| i)
        .collect()
}

/// Top eigenvector of `Sigma` rescaled so its squared norm is the top
/// eigenvalue; the usual fixed-dimension PCA estimate of the loadings.
pub fn classical_pca(sigma_hat: &SymmetricMatrix) -> Result<Vec<f64>> {
    let eig = symmetric_eigen(sigma_hat)?;
    let lambda = eig.values[0].max(0.0);
    Ok(eig.vectors[0].iter().map(|v| lambda.sqrt() * v).collect())
}

/// Standard normal quantile by Acklam's rational approximation; absolute
/// error below 1e-8 on (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument must be in (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
