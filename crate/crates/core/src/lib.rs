//! De-biased sparse PCA.
//!
//! Estimates the first loadings vector and the largest eigenvalue of a
//! high-dimensional covariance matrix by l1-regularized M-estimation, removes
//! the regularization bias with a nodewise-Lasso estimate of the inverse
//! Hessian, and produces asymptotically valid confidence intervals. A seeded
//! Monte-Carlo harness reproduces coverage and interval-length experiments on
//! spiked covariance models.
//!
//! The pipeline (see [`pipeline::run_pipeline`]):
//!
//! 1. sample covariance of the (mean-zero) data;
//! 2. Fantope-relaxed initializer localizing the loadings direction;
//! 3. projected proximal-gradient solve of the penalized risk
//!    `1/4 |Sigma - beta beta'|_F^2 + lambda |beta|_1` near the initializer;
//! 4. nodewise Lasso inversion of the empirical Hessian at the estimate;
//! 5. one-step de-biasing, variance estimation, confidence intervals and
//!    thresholded support recovery.

pub mod debias;
pub mod error;
pub mod fantope;
pub mod linalg;
pub mod mstep;
pub mod nodewise;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod sim;
pub mod spiked;

mod solver;

pub use error::{Error, Result};
