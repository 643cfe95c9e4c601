//! End-to-end estimation: sample covariance, Fantope initializer, localized
//! second step, nodewise inversion of the empirical Hessian, de-biasing and
//! inference, plus the classical-PCA baseline, under one set of tuning
//! defaults.

use std::time::Instant;

use crate::debias::{
    classical_pca, confidence_intervals, debias_eigenvalue, debias_loadings,
    estimate_sigma_j_sq, estimate_sigma_lambda_sq, threshold_support, InferenceResult,
};
use crate::error::{Error, Result};
use crate::fantope::{extract_initial, solve_fantope, FantopeSolution, InitialEstimate};
use crate::linalg::vecops::{dot, l1_norm};
use crate::linalg::{sample_covariance, symmetric_eigen, DataMatrix, SymmetricMatrix};
use crate::mstep::{risk_hessian, solve_second_step, LoadingsEstimate, RiskProblem};
use crate::nodewise::{nodewise_column, PrecisionEstimate};

/// Tuning parameters and solver knobs for one pipeline run. `None` budgets
/// resolve to data-driven defaults at run time.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Penalty of the Fantope relaxation.
    pub lambda_init: f64,
    /// Penalty of the second-step program.
    pub lambda: f64,
    /// Shared penalty of the nodewise columns.
    pub lambda_nodewise: f64,
    /// l1 budget of the second step; default
    /// `max(2 |beta_init|_1 + 1, 2 sqrt(p))`. The initializer is much
    /// sparser than the penalized estimate, so scaling the budget from it
    /// alone leaves the constraint active, which distorts the de-biased
    /// eigenvalue through the extra normal-cone term in the gradient.
    pub l1_budget: Option<f64>,
    /// Radius of the locality ball around the initializer; default
    /// `max(0.1, (phi_1 - phi_2) / 2, |beta_init|_2 / 2)`. The sample
    /// spectral gap alone collapses when p ~ n (the bulk edge inflates the
    /// second eigenvalue), which leaves the ball too small to contain the
    /// penalized optimum; the initializer-norm term keeps it non-binding.
    pub locality_radius: Option<f64>,
    /// Shared l1 budget of the nodewise columns; default
    /// `min(2 sqrt(p), max(1, sqrt(n / log p) / 8))`. The budget is what
    /// keeps the column programs bounded when the empirical Hessian is
    /// indefinite (weak spikes leave its bulk below zero), so it stays on
    /// the theory's `sqrt(n / log p)` scale with a small constant; the floor
    /// of 1 always admits the spiked models' true columns.
    pub nodewise_budget: Option<f64>,
    /// Confidence level of the reported intervals.
    pub level: f64,
    /// Constant in the support threshold `C sqrt(log p / n)`.
    pub threshold_constant: f64,
    pub fantope_max_iter: usize,
    pub fantope_tol: f64,
    pub second_step_max_iter: usize,
    pub second_step_tol: f64,
    pub nodewise_max_iter: usize,
    pub nodewise_tol: f64,
    /// Estimate the eigenvalue-pivot variance as `2 |beta|^4` instead of the
    /// empirical influence-term variance.
    pub gaussian_variance_shortcut: bool,
    /// Column-mean center the data before the covariance; off by default
    /// because the model is mean-zero.
    pub center_data: bool,
}

/// Defaults tuned as in the simulation study: every penalty is
/// `sqrt(log p / n)`.
pub fn default_config(p: usize, n: usize) -> Result<PipelineConfig> {
    if p < 2 || n < 2 {
        return Err(Error::invalid("need p >= 2 and n >= 2"));
    }
    let lambda = ((p as f64).ln() / n as f64).sqrt();
    Ok(PipelineConfig {
        lambda_init: lambda,
        lambda,
        lambda_nodewise: lambda,
        l1_budget: None,
        locality_radius: None,
        nodewise_budget: None,
        level: 0.95,
        threshold_constant: 1.0,
        fantope_max_iter: 2000,
        fantope_tol: 1e-5,
        second_step_max_iter: 20_000,
        second_step_tol: 1e-7,
        nodewise_max_iter: 20_000,
        nodewise_tol: 1e-6,
        gaussian_variance_shortcut: true,
        center_data: false,
    })
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_init < 0.0 || self.lambda < 0.0 || self.lambda_nodewise < 0.0 {
            return Err(Error::invalid("penalties must be non-negative"));
        }
        if let Some(t) = self.l1_budget {
            if !(t > 0.0) {
                return Err(Error::invalid("l1 budget must be positive"));
            }
        }
        if let Some(eta) = self.locality_radius {
            if !(eta > 0.0) {
                return Err(Error::invalid("locality radius must be positive"));
            }
        }
        if let Some(t) = self.nodewise_budget {
            if !(t > 0.0) {
                return Err(Error::invalid("nodewise budget must be positive"));
            }
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid("confidence level must be in (0, 1)"));
        }
        if !(self.threshold_constant > 0.0) {
            return Err(Error::invalid("threshold constant must be positive"));
        }
        Ok(())
    }
}

/// Wall-clock seconds per stage; diagnostic only, never serialized into
/// experiment outputs.
#[derive(Debug, Clone, Default)]
pub struct StageTimings {
    pub covariance: f64,
    pub fantope: f64,
    pub second_step: f64,
    pub nodewise: f64,
    pub inference: f64,
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub sigma_hat: SymmetricMatrix,
    pub fantope: FantopeSolution,
    pub initial: InitialEstimate,
    pub loadings: LoadingsEstimate,
    pub precision: PrecisionEstimate,
    pub inference: InferenceResult,
    /// Classical PCA estimate, sign-aligned with the initializer.
    pub classical_baseline: Vec<f64>,
    /// Resolved locality radius.
    pub eta: f64,
    /// Resolved second-step l1 budget.
    pub l1_budget: f64,
    /// Resolved nodewise l1 budget.
    pub nodewise_budget: f64,
    pub timings: StageTimings,
}

/// Assembles the precision estimate column by column, halving a column's l1
/// budget (up to six times) when its noise level degenerates. An indefinite
/// empirical Hessian lets an over-generous budget dig into negative
/// curvature, which sends `tau_j^2` below the floor and blows up the scaled
/// column; the theory's valid budgets are smaller, so backing off recovers a
/// usable stationary point instead of aborting the run.
fn assemble_precision_with_backoff(
    hessian: &SymmetricMatrix,
    lambda: f64,
    budget: f64,
    max_iter: usize,
    tol: f64,
) -> Result<PrecisionEstimate> {
    const BACKOFF_ATTEMPTS: usize = 6;
    let p = hessian.dim();
    let mut columns = Vec::with_capacity(p);
    for j in 0..p {
        let mut current = budget;
        let mut attempt = 0;
        let column = loop {
            match nodewise_column(hessian, j, lambda, current, max_iter, tol) {
                Ok(c) => break c,
                Err(e @ Error::DegenerateColumn { .. }) => {
                    if attempt >= BACKOFF_ATTEMPTS {
                        return Err(e);
                    }
                    attempt += 1;
                    current *= 0.5;
                }
                Err(e) => return Err(e),
            }
        };
        columns.push(column);
    }
    Ok(PrecisionEstimate { dim: p, columns })
}

/// Runs the full de-biased estimation on one data set.
pub fn run_pipeline(x: &DataMatrix, config: &PipelineConfig) -> Result<PipelineReport> {
    config.validate()?;
    if x.n() < 2 {
        return Err(Error::invalid("need at least two observations"));
    }
    let p = x.p();
    let n = x.n();
    let mut timings = StageTimings::default();

    let t0 = Instant::now();
    let centered;
    let data = if config.center_data {
        centered = x.centered();
        &centered
    } else {
        x
    };
    let sigma_hat = sample_covariance(data).map_err(|e| e.in_stage("sample_covariance"))?;
    timings.covariance = t0.elapsed().as_secs_f64();

    // step 1: Fantope initializer
    let t0 = Instant::now();
    let fantope = solve_fantope(
        &sigma_hat,
        config.lambda_init,
        config.fantope_max_iter,
        config.fantope_tol,
    )
    .map_err(|e| e.in_stage("fantope_init"))?;
    let initial = extract_initial(&fantope, &sigma_hat).map_err(|e| e.in_stage("fantope_init"))?;
    timings.fantope = t0.elapsed().as_secs_f64();

    // step 2: localized second step centered at the initializer
    let t0 = Instant::now();
    let spectrum = symmetric_eigen(&sigma_hat).map_err(|e| e.in_stage("second_step"))?;
    let eta = config.locality_radius.unwrap_or_else(|| {
        let phi1 = spectrum.values[0].max(0.0).sqrt();
        let phi2 = spectrum.values[1].max(0.0).sqrt();
        (0.5 * (phi1 - phi2))
            .max(0.5 * crate::linalg::vecops::l2_norm(&initial.beta_init))
            .max(0.1)
    });
    let l1_budget = config
        .l1_budget
        .unwrap_or_else(|| (2.0 * l1_norm(&initial.beta_init) + 1.0).max(2.0 * (p as f64).sqrt()));
    let problem = RiskProblem::new(
        sigma_hat.clone(),
        config.lambda,
        l1_budget,
        eta,
        initial.beta_init.clone(),
    )
    .map_err(|e| e.in_stage("second_step"))?;
    let mut loadings = solve_second_step(
        &problem,
        &initial.beta_init,
        config.second_step_max_iter,
        config.second_step_tol,
    )
    .map_err(|e| e.in_stage("second_step"))?;
    if dot(&loadings.beta, &initial.beta_init) < 0.0 {
        for b in loadings.beta.iter_mut() {
            *b = -*b;
        }
    }
    timings.second_step = t0.elapsed().as_secs_f64();

    // step 3: nodewise inversion of the empirical Hessian
    let t0 = Instant::now();
    let hessian = risk_hessian(&sigma_hat, &loadings.beta);
    let nodewise_budget = config.nodewise_budget.unwrap_or_else(|| {
        (2.0 * (p as f64).sqrt()).min(((n as f64 / (p as f64).ln()).sqrt() / 8.0).max(1.0))
    });
    let precision = assemble_precision_with_backoff(
        &hessian,
        config.lambda_nodewise,
        nodewise_budget,
        config.nodewise_max_iter,
        config.nodewise_tol,
    )
    .map_err(|e| e.in_stage("nodewise"))?;
    timings.nodewise = t0.elapsed().as_secs_f64();

    // step 4: de-biasing, variances, intervals, support
    let t0 = Instant::now();
    let b_hat = debias_loadings(&loadings.beta, &precision, &sigma_hat);
    let lambda_hat = debias_eigenvalue(&loadings.beta, &precision, &sigma_hat);
    let sigma_j_hat: Vec<f64> = (0..p)
        .map(|j| {
            estimate_sigma_j_sq(data, &loadings.beta, precision.theta_column(j)).sqrt()
        })
        .collect();
    let sigma_lambda_hat = estimate_sigma_lambda_sq(
        data,
        &loadings.beta,
        &precision,
        config.gaussian_variance_shortcut,
    )
    .sqrt();
    let intervals = confidence_intervals(&b_hat, &sigma_j_hat, n, config.level)
        .map_err(|e| e.in_stage("debias"))?;
    let support = threshold_support(&b_hat, config.threshold_constant, p, n);
    let inference = InferenceResult {
        b_hat,
        lambda_hat,
        sigma_j_hat,
        sigma_lambda_hat,
        intervals,
        level: config.level,
        support,
    };
    let mut classical_baseline = classical_pca(&sigma_hat).map_err(|e| e.in_stage("debias"))?;
    if dot(&classical_baseline, &initial.beta_init) < 0.0 {
        for b in classical_baseline.iter_mut() {
            *b = -*b;
        }
    }
    timings.inference = t0.elapsed().as_secs_f64();

    Ok(PipelineReport {
        sigma_hat,
        fantope,
        initial,
        loadings,
        precision,
        inference,
        classical_baseline,
        eta,
        l1_budget,
        nodewise_budget,
        timings,
    })
}
