//! Spiked covariance ground truth: `Sigma_0 = I + sum_i omega_i u_i u_i^T`
//! with orthonormal spike directions, the loadings vector it implies, the
//! closed-form inverse Hessian at the truth, true asymptotic variances, and
//! seeded Gaussian sampling.
//!
//! These are the oracles the simulation harness scores against.

use crate::error::{Error, Result};
use crate::linalg::vecops::{dot, l2_norm};
use crate::linalg::{canonical_sign, symmetric_eigen, DataMatrix, SymmetricMatrix};
use crate::rng::GaussianStream;

const ORTHOGONALITY_TOL: f64 = 1e-10;
const GAP_FLOOR: f64 = 1e-12;

/// One spike: strength `omega > 0` and a unit direction.
#[derive(Debug, Clone)]
pub struct Spike {
    pub strength: f64,
    pub direction: Vec<f64>,
}

/// Ground-truth model with every quantity the theory gives in closed form.
#[derive(Debug, Clone)]
pub struct SpikedModel {
    pub p: usize,
    pub spikes: Vec<Spike>,
    pub sigma0: SymmetricMatrix,
    /// Loadings vector `sqrt(1 + omega_1) u_1`, sign convention applied.
    pub beta0: Vec<f64>,
    /// Inverse Hessian of the population risk at `beta0`.
    pub theta0: SymmetricMatrix,
    /// Eigenvalues of `Sigma_0`, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Gap between the square roots of the top two eigenvalues.
    pub rho: f64,
}

/// True asymptotic variances under Gaussian observations.
#[derive(Debug, Clone)]
pub struct TrueVariances {
    pub sigma_j_sq: Vec<f64>,
    pub sigma_lambda_sq: f64,
}

/// Builds a spiked model from `(strength, direction)` pairs.
///
/// Directions are normalized individually with the norm folded into the
/// strength (`omega' = omega |v|^2`, `u = v / |v|`), then checked for mutual
/// orthogonality. Strengths must end up strictly ordered at the top.
pub fn build_model(p: usize, spikes: &[(f64, Vec<f64>)]) -> Result<SpikedModel> {
    if p < 2 {
        return Err(Error::invalid("model dimension must be at least 2"));
    }
    if spikes.is_empty() {
        return Err(Error::invalid("at least one spike is required"));
    }
    let mut normalized: Vec<Spike> = Vec::with_capacity(spikes.len());
    for (omega, v) in spikes {
        if v.len() != p {
            return Err(Error::invalid("spike direction has wrong dimension"));
        }
        if !v.iter().all(|x| x.is_finite()) || !omega.is_finite() {
            return Err(Error::invalid("spike contains non-finite entries"));
        }
        let norm = l2_norm(v);
        if norm == 0.0 {
            return Err(Error::invalid("spike direction is zero"));
        }
        let strength = omega * norm * norm;
        if strength <= 0.0 {
            return Err(Error::invalid("spike strengths must be positive"));
        }
        let mut u: Vec<f64> = v.iter().map(|x| x / norm).collect();
        canonical_sign(&mut u);
        normalized.push(Spike {
            strength,
            direction: u,
        });
    }
    normalized.sort_by(|a, b| b.strength.partial_cmp(&a.strength).expect("finite"));
    for i in 0..normalized.len() {
        for j in (i + 1)..normalized.len() {
            let ip = dot(&normalized[i].direction, &normalized[j].direction);
            if ip.abs() > ORTHOGONALITY_TOL {
                return Err(Error::invalid(format!(
                    "spike directions {i} and {j} are not orthogonal (inner product {ip:.2e})"
                )));
            }
        }
    }
    let omega1 = normalized[0].strength;
    let omega2 = normalized.get(1).map(|s| s.strength).unwrap_or(0.0);
    if omega1 - omega2 <= GAP_FLOOR {
        return Err(Error::invalid(
            "top spike strength must exceed the second strictly",
        ));
    }
    if normalized.len() > p {
        return Err(Error::invalid("more spikes than dimensions"));
    }

    let sigma0 = SymmetricMatrix::from_fn(p, |i, j| {
        let mut v = if i == j { 1.0 } else { 0.0 };
        for s in &normalized {
            v += s.strength * s.direction[i] * s.direction[j];
        }
        v
    });

    let lambda1 = 1.0 + omega1;
    let beta0: Vec<f64> = normalized[0]
        .direction
        .iter()
        .map(|x| lambda1.sqrt() * x)
        .collect();

    let mut eigenvalues: Vec<f64> = normalized.iter().map(|s| 1.0 + s.strength).collect();
    eigenvalues.resize(p, 1.0);

    let rho = eigenvalues[0].sqrt() - eigenvalues[1].sqrt();

    let theta0 = theta0_spiked_shortcut(p, &normalized)?;

    Ok(SpikedModel {
        p,
        spikes: normalized,
        sigma0,
        beta0,
        theta0,
        eigenvalues,
        rho,
    })
}

/// The single-spike simulation model with direction `(1,1,1,0,1,0,...,0)`.
fn pattern_model(p: usize, omega: f64) -> Result<SpikedModel> {
    if p < 5 {
        return Err(Error::invalid("pattern model needs p >= 5"));
    }
    let mut v = vec![0.0; p];
    for idx in [0, 1, 2, 4] {
        v[idx] = 1.0;
    }
    build_model(p, &[(omega, v)])
}

/// Small spike: `omega = 1/5`, top eigenvalue 1.8.
pub fn model_1(p: usize) -> Result<SpikedModel> {
    pattern_model(p, 0.2)
}

/// Large spike: `omega = 1`, top eigenvalue 5.
pub fn model_2(p: usize) -> Result<SpikedModel> {
    pattern_model(p, 1.0)
}

fn theta0_spiked_shortcut(p: usize, spikes: &[Spike]) -> Result<SymmetricMatrix> {
    let omega1 = spikes[0].strength;
    // D_11 = 1/(2(1+omega_1)), D_ii = 1/(omega_1 - omega_i) for the other spikes
    let mut d = Vec::with_capacity(spikes.len());
    d.push(1.0 / (2.0 * (1.0 + omega1)));
    for s in &spikes[1..] {
        let gap = omega1 - s.strength;
        if gap <= GAP_FLOOR {
            return Err(Error::numerical("degenerate eigenvalue gap in Theta_0"));
        }
        d.push(1.0 / gap);
    }
    Ok(SymmetricMatrix::from_fn(p, |i, j| {
        let mut v = if i == j { 1.0 / omega1 } else { 0.0 };
        for (s, di) in spikes.iter().zip(&d) {
            v += (di - 1.0 / omega1) * s.direction[i] * s.direction[j];
        }
        v
    }))
}

/// Inverse population Hessian at `beta0` from the eigendecomposition of
/// `Sigma_0`: `U^T D U` with `D = diag(1/(2 L1), 1/(L1 - L2), ...)`.
///
/// Computed by two independent routes (the general eigenbasis form and the
/// spiked-model algebraic shortcut) which must agree to 1e-10.
pub fn theta0_closed_form(model: &SpikedModel) -> Result<SymmetricMatrix> {
    let eig = symmetric_eigen(&model.sigma0)?;
    let lambda1 = eig.values[0];
    if lambda1 - eig.values[1] <= GAP_FLOOR {
        return Err(Error::numerical("degenerate eigenvalue gap in Theta_0"));
    }
    let mut d = Vec::with_capacity(model.p);
    d.push(1.0 / (2.0 * lambda1));
    for &lam in &eig.values[1..] {
        d.push(1.0 / (lambda1 - lam));
    }
    let general = eig.reassemble_with(&d);
    let shortcut = theta0_spiked_shortcut(model.p, &model.spikes)?;
    let diff = general.add_scaled(&shortcut, -1.0).max_abs();
    if diff > 1e-10 {
        return Err(Error::numerical(format!(
            "Theta_0 routes disagree by {diff:.2e}"
        )));
    }
    Ok(shortcut)
}

/// True asymptotic variances: per-coordinate
/// `sigma_j^2 = Theta_j^T Sigma_0 Theta_j |beta_0|^4 + [|beta_0|^2 Theta_j^T beta_0]^2`
/// and `sigma_Lambda^2 = 2 Lambda_max^2` for Gaussian data.
pub fn true_variances(model: &SpikedModel) -> TrueVariances {
    let lambda1 = model.eigenvalues[0];
    let p = model.p;
    let mut sigma_j_sq = Vec::with_capacity(p);
    for j in 0..p {
        let theta_j = model.theta0.row(j); // symmetric: row j == column j
        let s_theta = model.sigma0.matvec(theta_j);
        let quad = dot(&s_theta, theta_j);
        let lin = dot(theta_j, &model.beta0);
        sigma_j_sq.push(quad * lambda1 * lambda1 + (lambda1 * lin).powi(2));
    }
    TrueVariances {
        sigma_j_sq,
        sigma_lambda_sq: 2.0 * lambda1 * lambda1,
    }
}

/// Draws `n` i.i.d. `N(0, Sigma_0)` rows with a seeded generator.
///
/// The square root is `L = I + sum_i (sqrt(1+omega_i) - 1) u_i u_i^T`, exact
/// for orthonormal spikes, so a row is `z + sum_i c_i (u_i^T z) u_i` with `z`
/// standard normal. Identical seeds give bit-identical matrices.
pub fn sample_gaussian(model: &SpikedModel, n: usize, seed: u64) -> Result<DataMatrix> {
    if n < 1 {
        return Err(Error::invalid("need at least one observation"));
    }
    let p = model.p;
    let coeffs: Vec<f64> = model
        .spikes
        .iter()
        .map(|s| (1.0 + s.strength).sqrt() - 1.0)
        .collect();
    let mut stream = GaussianStream::new(seed);
    let mut data = vec![0.0; n * p];
    let mut z = vec![0.0; p];
    for row in data.chunks_exact_mut(p) {
        stream.fill_standard_normal(&mut z);
        row.copy_from_slice(&z);
        for (c, s) in coeffs.iter().zip(&model.spikes) {
            let proj = c * dot(&s.direction, &z);
            for (x, u) in row.iter_mut().zip(&s.direction) {
                *x += proj * u;
            }
        }
    }
    DataMatrix::new(n, p, data)
}

impl SpikedModel {
    /// Indices where `beta0` is non-zero.
    pub fn support(&self) -> Vec<usize> {
        self.beta0
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }
}
