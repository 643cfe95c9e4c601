//! Seeded Monte-Carlo experiments: coverage of the confidence intervals,
//! average interval lengths against the asymptotically efficient baseline,
//! and per-replication normalized estimates for histogram export.
//!
//! Replications run concurrently; every replication derives its own generator
//! from `base_seed XOR replication_index`, so results are independent of the
//! execution order and of the thread count.

use std::sync::mpsc;
use std::sync::Mutex;

use crate::debias::{classical_pca, estimate_sigma_j_sq, normal_quantile, InferenceResult};
use crate::error::{Error, Result};
use crate::linalg::vecops::{dot, l2_norm_sq};
use crate::linalg::{sample_covariance, symmetric_eigen, DataMatrix};
use crate::nodewise::{NodewiseColumn, PrecisionEstimate};
use crate::pipeline::{run_pipeline, PipelineConfig};
use crate::rng::replication_seed;
use crate::spiked::{build_model, model_1, model_2, true_variances, SpikedModel};

/// Which model the experiment draws data from.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    /// Small spike (`omega = 1/5`, top eigenvalue 1.8).
    Model1,
    /// Large spike (`omega = 1`, top eigenvalue 5).
    Model2,
    /// Explicit spikes as `(strength, direction)` pairs.
    Custom(Vec<(f64, Vec<f64>)>),
}

impl ModelSpec {
    pub fn build(&self, p: usize) -> Result<SpikedModel> {
        match self {
            ModelSpec::Model1 => model_1(p),
            ModelSpec::Model2 => model_2(p),
            ModelSpec::Custom(spikes) => build_model(p, spikes),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Model1 => "model1",
            ModelSpec::Model2 => "model2",
            ModelSpec::Custom(_) => "custom",
        }
    }
}

/// Whether intervals use the closed-form true variances or the estimated
/// ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMode {
    Known,
    Estimated,
}

impl VarianceMode {
    pub fn name(&self) -> &'static str {
        match self {
            VarianceMode::Known => "known",
            VarianceMode::Estimated => "estimated",
        }
    }
}

/// Full specification of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub p: usize,
    pub n: usize,
    pub replications: usize,
    pub base_seed: u64,
    pub variance_mode: VarianceMode,
    pub run_debiased: bool,
    pub run_classical: bool,
    /// Coordinates (0-based) reported per-coordinate and exported to
    /// histograms; averages always cover all coordinates.
    pub coordinates: Vec<usize>,
    pub threads: usize,
    pub pipeline: PipelineConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::invalid("need at least one replication"));
        }
        if self.coordinates.iter().any(|&c| c >= self.p) {
            return Err(Error::invalid("reported coordinate out of range"));
        }
        if !self.run_debiased && !self.run_classical {
            return Err(Error::invalid("no method enabled"));
        }
        self.pipeline.validate()
    }

    /// First nine coordinates (or fewer when p is small), as reported in the
    /// simulation tables.
    pub fn default_coordinates(p: usize) -> Vec<usize> {
        (0..p.min(9)).collect()
    }
}

/// Per-method aggregate over replications.
#[derive(Debug, Clone, Default)]
pub struct MethodReport {
    /// Empirical coverage per coordinate (all p of them).
    pub coverage: Vec<f64>,
    /// Average interval length per coordinate.
    pub avg_length: Vec<f64>,
    /// Mean coverage over the true support / its complement.
    pub coverage_s0: f64,
    pub coverage_s0c: f64,
    /// Mean interval length over the true support / its complement.
    pub length_s0: f64,
    pub length_s0c: f64,
    /// Coverage of the top eigenvalue by the eigenvalue interval.
    pub eigenvalue_coverage: f64,
    /// Per-replication normalized estimates for the reported coordinates:
    /// `rows[r][k] = sqrt(n) (est_{coord_k} - beta0_{coord_k}) / sigma_k`.
    pub normalized: Vec<Vec<f64>>,
    /// Per-replication normalized eigenvalue pivots.
    pub normalized_eigenvalue: Vec<f64>,
}

/// Everything one experiment produces.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub config_echo: ExperimentSummary,
    pub debiased: Option<MethodReport>,
    pub classical: Option<MethodReport>,
    /// Interval half-length `z sigma_j / sqrt(n)` from the true variances:
    /// the asymptotically efficient benchmark.
    pub efficient_length_s0: f64,
    pub efficient_length_s0c: f64,
    /// True support of the model (0-based).
    pub support: Vec<usize>,
    /// Replications that failed with a numerical error (index, message).
    pub failures: Vec<(usize, String)>,
    /// Wall-clock seconds; diagnostic only, never serialized.
    pub runtime_secs: f64,
}

/// The scalar facts of the run echoed into every output file.
#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub model: String,
    pub p: usize,
    pub n: usize,
    pub replications: usize,
    pub base_seed: u64,
    pub variance_mode: String,
    pub level: f64,
    pub coordinates: Vec<usize>,
}

struct ReplicationOutcome {
    index: usize,
    result: std::result::Result<ReplicationData, String>,
}

struct ReplicationData {
    /// Sign-aligned de-biased estimate, one entry per coordinate.
    debiased: Option<MethodEstimates>,
    classical: Option<MethodEstimates>,
}

struct MethodEstimates {
    estimate: Vec<f64>,
    /// Per-coordinate standard deviations used for this replication's
    /// intervals (true or estimated depending on the mode).
    sigma: Vec<f64>,
    eigenvalue: f64,
    sigma_lambda: f64,
}

fn align_sign(estimate: &mut [f64], reference: &[f64]) {
    if dot(estimate, reference) < 0.0 {
        for v in estimate.iter_mut() {
            *v = -*v;
        }
    }
}

/// Classical-PCA inference on one sample: `beta := beta_PCA` and
/// `Theta := pinv(Sigma_hat)` plugged into the same variance estimator.
fn classical_estimates(
    x: &DataMatrix,
    model: &SpikedModel,
    mode: VarianceMode,
    true_sigma: &[f64],
) -> Result<MethodEstimates> {
    let sigma_hat = sample_covariance(x)?;
    let mut beta_pca = classical_pca(&sigma_hat)?;
    align_sign(&mut beta_pca, &model.beta0);
    let eigenvalue = l2_norm_sq(&beta_pca);
    let p = x.p();
    let (sigma, sigma_lambda) = match mode {
        VarianceMode::Known => (
            true_sigma.to_vec(),
            (2.0 * model.lambda_max() * model.lambda_max()).sqrt(),
        ),
        VarianceMode::Estimated => {
            let pinv = pseudo_inverse_precision(&sigma_hat)?;
            let sigma: Vec<f64> = (0..p)
                .map(|j| estimate_sigma_j_sq(x, &beta_pca, pinv.theta_column(j)).sqrt())
                .collect();
            let sigma_lambda = (2.0 * eigenvalue * eigenvalue).sqrt();
            (sigma, sigma_lambda)
        }
    };
    Ok(MethodEstimates {
        estimate: beta_pca,
        sigma,
        eigenvalue,
        sigma_lambda,
    })
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix through its
/// eigendecomposition, packaged as a `PrecisionEstimate` so the variance
/// estimator can consume it. Eigenvalues below `dim * eps * max_eig` are
/// treated as zero; the covariance is singular whenever p >= n.
fn pseudo_inverse_precision(sigma_hat: &crate::linalg::SymmetricMatrix) -> Result<PrecisionEstimate> {
    let eig = symmetric_eigen(sigma_hat)?;
    let p = sigma_hat.dim();
    let cutoff = p as f64 * f64::EPSILON * eig.values[0].abs().max(1e-300);
    let weights: Vec<f64> = eig
        .values
        .iter()
        .map(|&v| if v > cutoff { 1.0 / v } else { 0.0 })
        .collect();
    let pinv = eig.reassemble_with(&weights);
    let columns = (0..p)
        .map(|j| {
            let theta: Vec<f64> = pinv.row(j).to_vec();
            NodewiseColumn {
                index: j,
                gamma: Vec::new(),
                gamma_full: Vec::new(),
                tau_sq: f64::NAN,
                theta,
                kkt_residual: f64::NAN,
                boundary_active: false,
                iterations: 0,
                converged: true,
            }
        })
        .collect();
    Ok(PrecisionEstimate { dim: p, columns })
}

fn debiased_estimates(
    inference: &InferenceResult,
    beta: &[f64],
    model: &SpikedModel,
    mode: VarianceMode,
    true_sigma: &[f64],
) -> MethodEstimates {
    let mut estimate = inference.b_hat.clone();
    // the whole report is sign-consistent with beta; align through it
    if dot(beta, &model.beta0) < 0.0 {
        for v in estimate.iter_mut() {
            *v = -*v;
        }
    }
    let (sigma, sigma_lambda) = match mode {
        VarianceMode::Known => (
            true_sigma.to_vec(),
            (2.0 * model.lambda_max() * model.lambda_max()).sqrt(),
        ),
        VarianceMode::Estimated => (inference.sigma_j_hat.clone(), inference.sigma_lambda_hat),
    };
    MethodEstimates {
        estimate,
        sigma,
        eigenvalue: inference.lambda_hat,
        sigma_lambda,
    }
}

fn run_replication(
    config: &ExperimentConfig,
    model: &SpikedModel,
    true_sigma: &[f64],
    index: usize,
) -> Result<ReplicationData> {
    let seed = replication_seed(config.base_seed, index);
    let x = crate::spiked::sample_gaussian(model, config.n, seed)?;
    let debiased = if config.run_debiased {
        let report = run_pipeline(&x, &config.pipeline)?;
        Some(debiased_estimates(
            &report.inference,
            &report.loadings.beta,
            model,
            config.variance_mode,
            true_sigma,
        ))
    } else {
        None
    };
    let classical = if config.run_classical {
        Some(classical_estimates(&x, model, config.variance_mode, true_sigma)?)
    } else {
        None
    };
    Ok(ReplicationData { debiased, classical })
}

struct Accumulator {
    hits: Vec<usize>,
    lengths: Vec<f64>,
    eigen_hits: usize,
    normalized: Vec<(usize, Vec<f64>)>,
    normalized_eigenvalue: Vec<(usize, f64)>,
    count: usize,
}

impl Accumulator {
    fn new(p: usize) -> Self {
        Accumulator {
            hits: vec![0; p],
            lengths: vec![0.0; p],
            eigen_hits: 0,
            normalized: Vec::new(),
            normalized_eigenvalue: Vec::new(),
            count: 0,
        }
    }

    fn add(
        &mut self,
        index: usize,
        est: &MethodEstimates,
        model: &SpikedModel,
        n: usize,
        level: f64,
        coordinates: &[usize],
        true_sigma: &[f64],
    ) {
        let z = normal_quantile((1.0 + level) / 2.0);
        let root_n = (n as f64).sqrt();
        for j in 0..model.p {
            let half = z * est.sigma[j] / root_n;
            self.lengths[j] += half;
            if (est.estimate[j] - model.beta0[j]).abs() <= half {
                self.hits[j] += 1;
            }
        }
        let half_eig = z * est.sigma_lambda / root_n;
        if (est.eigenvalue - model.lambda_max()).abs() <= half_eig {
            self.eigen_hits += 1;
        }
        // normalized pivots always use the true asymptotic scale
        let row: Vec<f64> = coordinates
            .iter()
            .map(|&j| root_n * (est.estimate[j] - model.beta0[j]) / true_sigma[j])
            .collect();
        self.normalized.push((index, row));
        let pivot = root_n * (est.eigenvalue - model.lambda_max())
            / (2.0 * model.lambda_max() * model.lambda_max()).sqrt();
        self.normalized_eigenvalue.push((index, pivot));
        self.count += 1;
    }

    fn finish(mut self, support: &[usize], p: usize) -> MethodReport {
        let denom = self.count.max(1) as f64;
        let coverage: Vec<f64> = self.hits.iter().map(|h| *h as f64 / denom).collect();
        let avg_length: Vec<f64> = self.lengths.iter().map(|l| l / denom).collect();
        let mean_over = |vals: &[f64], idx: &[usize]| -> f64 {
            if idx.is_empty() {
                return 0.0;
            }
            idx.iter().map(|&j| vals[j]).sum::<f64>() / idx.len() as f64
        };
        let complement: Vec<usize> = (0..p).filter(|j| !support.contains(j)).collect();
        self.normalized.sort_by_key(|(i, _)| *i);
        self.normalized_eigenvalue.sort_by_key(|(i, _)| *i);
        MethodReport {
            coverage_s0: mean_over(&coverage, support),
            coverage_s0c: mean_over(&coverage, &complement),
            length_s0: mean_over(&avg_length, support),
            length_s0c: mean_over(&avg_length, &complement),
            eigenvalue_coverage: self.eigen_hits as f64 / denom,
            normalized: self.normalized.into_iter().map(|(_, r)| r).collect(),
            normalized_eigenvalue: self
                .normalized_eigenvalue
                .into_iter()
                .map(|(_, v)| v)
                .collect(),
            coverage,
            avg_length,
        }
    }
}

/// Runs the experiment: samples each replication with its derived seed, runs
/// the enabled methods, scores interval coverage of the true loadings and
/// eigenvalue, and aggregates.
///
/// Replication failures are recorded and excluded; more than 10% failing
/// aborts the experiment.
pub fn run_coverage(config: &ExperimentConfig) -> Result<CoverageReport> {
    config.validate()?;
    let start = std::time::Instant::now();
    let model = config.model.build(config.p)?;
    let variances = true_variances(&model);
    let true_sigma: Vec<f64> = variances.sigma_j_sq.iter().map(|v| v.sqrt()).collect();
    let support = model.support();

    let outcomes = run_replications_parallel(config, &model, &true_sigma)?;

    let mut failures = Vec::new();
    let mut debiased_acc = Accumulator::new(config.p);
    let mut classical_acc = Accumulator::new(config.p);
    for outcome in outcomes {
        match outcome.result {
            Err(msg) => failures.push((outcome.index, msg)),
            Ok(data) => {
                if let Some(est) = data.debiased {
                    debiased_acc.add(
                        outcome.index,
                        &est,
                        &model,
                        config.n,
                        config.pipeline.level,
                        &config.coordinates,
                        &true_sigma,
                    );
                }
                if let Some(est) = data.classical {
                    classical_acc.add(
                        outcome.index,
                        &est,
                        &model,
                        config.n,
                        config.pipeline.level,
                        &config.coordinates,
                        &true_sigma,
                    );
                }
            }
        }
    }
    if failures.len() * 10 > config.replications {
        return Err(Error::numerical(format!(
            "{} of {} replications failed; first: {}",
            failures.len(),
            config.replications,
            failures[0].1
        )));
    }

    let z = normal_quantile((1.0 + config.pipeline.level) / 2.0);
    let root_n = (config.n as f64).sqrt();
    let eff = |idx: &[usize]| -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        idx.iter().map(|&j| z * true_sigma[j] / root_n).sum::<f64>() / idx.len() as f64
    };
    let complement: Vec<usize> = (0..config.p).filter(|j| !support.contains(j)).collect();

    Ok(CoverageReport {
        config_echo: ExperimentSummary {
            model: config.model.name().to_string(),
            p: config.p,
            n: config.n,
            replications: config.replications,
            base_seed: config.base_seed,
            variance_mode: config.variance_mode.name().to_string(),
            level: config.pipeline.level,
            coordinates: config.coordinates.clone(),
        },
        debiased: config.run_debiased.then(|| debiased_acc.finish(&support, config.p)),
        classical: config
            .run_classical
            .then(|| classical_acc.finish(&support, config.p)),
        efficient_length_s0: eff(&support),
        efficient_length_s0c: eff(&complement),
        support,
        failures,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

fn run_replications_parallel(
    config: &ExperimentConfig,
    model: &SpikedModel,
    true_sigma: &[f64],
) -> Result<Vec<ReplicationOutcome>> {
    let threads = config.threads.max(1).min(config.replications);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<ReplicationOutcome>();
    let tx = Mutex::new(tx);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            let next = &next;
            let tx = &tx;
            scope.spawn(move || loop {
                let index = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if index >= config.replications {
                    break;
                }
                let result = run_replication(config, model, true_sigma, index)
                    .map_err(|e| e.to_string());
                let sent = tx
                    .lock()
                    .expect("channel mutex")
                    .send(ReplicationOutcome { index, result });
                if sent.is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut outcomes: Vec<ReplicationOutcome> = rx.into_iter().collect();
    outcomes.sort_by_key(|o| o.index);
    Ok(outcomes)
}

/// Average interval length per the table convention `z * sigma_hat_j /
/// sqrt(n)`, with estimated variances. Identical machinery to
/// [`run_coverage`]; the report's length fields are the quantity of
/// interest.
pub fn run_ci_length(config: &ExperimentConfig) -> Result<CoverageReport> {
    if config.variance_mode != VarianceMode::Estimated {
        return Err(Error::invalid(
            "interval-length experiments use estimated variances",
        ));
    }
    run_coverage(config)
}
