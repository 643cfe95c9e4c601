//! Dense symmetric linear algebra and the convex projections shared by every
//! solver in the pipeline.
//!
//! `SymmetricMatrix` enforces exact symmetry through its constructors: entries
//! are only ever written for one triangle and mirrored, so `a[(i,j)] ==
//! a[(j,i)]` holds bit-for-bit.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub mod vecops {
    //! Small helpers on plain `&[f64]` vectors.

    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn l1_norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x.abs()).sum()
    }

    pub fn l2_norm_sq(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum()
    }

    pub fn l2_norm(v: &[f64]) -> f64 {
        l2_norm_sq(v).sqrt()
    }

    pub fn linf_norm(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(v: &[f64], c: f64) -> Vec<f64> {
        v.iter().map(|x| c * x).collect()
    }

    pub fn is_finite(v: &[f64]) -> bool {
        v.iter().all(|x| x.is_finite())
    }
}

use vecops::{l1_norm, l2_norm};

/// Data matrix with `n` observations as rows of dimension `p`.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>, // row-major n*p
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("data matrix needs at least one row"));
        }
        if p < 2 {
            return Err(Error::invalid("data matrix needs dimension p >= 2"));
        }
        if data.len() != n * p {
            return Err(Error::invalid(format!(
                "data length {} does not match {n} x {p}",
                data.len()
            )));
        }
        if !vecops::is_finite(&data) {
            return Err(Error::invalid("data matrix contains non-finite entries"));
        }
        Ok(DataMatrix { n, p, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("data matrix needs at least one row"));
        }
        let p = rows[0].len();
        let mut data = Vec::with_capacity(n * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::invalid("rows have inconsistent lengths"));
            }
            data.extend_from_slice(row);
        }
        DataMatrix::new(n, p, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p)
    }

    /// Column-mean centered copy. The estimators assume mean-zero data, so
    /// this is applied only when explicitly requested.
    pub fn centered(&self) -> DataMatrix {
        let mut means = vec![0.0; self.p];
        for row in self.rows() {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in means.iter_mut() {
            *m /= self.n as f64;
        }
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.p) {
            for (x, m) in row.iter_mut().zip(&means) {
                *x -= m;
            }
        }
        DataMatrix {
            n: self.n,
            p: self.p,
            data,
        }
    }
}

/// Dense symmetric matrix with symmetry enforced by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>, // row-major dim*dim, exactly mirrored
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = c;
        }
        m
    }

    /// Builds the matrix from `f(i, j)` evaluated once per unordered pair
    /// (`i <= j`) and mirrored.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
        m
    }

    /// Validates an explicitly given square matrix: exact symmetry, finite
    /// entries.
    pub fn try_from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        for row in rows {
            if row.len() != dim {
                return Err(Error::invalid("matrix is not square"));
            }
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let m = Self::from_fn(dim, |i, j| rows[i][j]);
        if !vecops::is_finite(&m.data) {
            return Err(Error::invalid("matrix contains non-finite entries"));
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        self.data
            .chunks_exact(self.dim)
            .map(|row| vecops::dot(row, v))
            .collect()
    }

    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        vecops::dot(&self.matvec(v), v)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Entrywise l1 norm of the vectorized matrix.
    pub fn entrywise_l1(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &SymmetricMatrix, c: f64) -> SymmetricMatrix {
        debug_assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + c * b)
            .collect();
        SymmetricMatrix {
            dim: self.dim,
            data,
        }
    }

    /// Entrywise map. Symmetry is preserved because mirrored entries are
    /// bitwise equal and `f` is deterministic.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        SymmetricMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Frobenius inner product `<self, other>`.
    pub fn inner(&self, other: &SymmetricMatrix) -> f64 {
        vecops::dot(&self.data, &other.data)
    }

    pub fn is_finite(&self) -> bool {
        vecops::is_finite(&self.data)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }
}

/// Eigendecomposition with eigenvalues sorted descending and a deterministic
/// sign convention on the eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues, non-increasing.
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    /// Reassembles `sum_k values[k] * v_k v_k^T`, skipping zero weights.
    pub fn reassemble_with(&self, weights: &[f64]) -> SymmetricMatrix {
        let p = self.vectors[0].len();
        let mut m = SymmetricMatrix::zeros(p);
        for (w, v) in weights.iter().zip(&self.vectors) {
            if *w == 0.0 {
                continue;
            }
            for i in 0..p {
                let wi = w * v[i];
                for j in i..p {
                    m.data[i * p + j] += wi * v[j];
                }
            }
        }
        for i in 0..p {
            for j in (i + 1)..p {
                m.data[j * p + i] = m.data[i * p + j];
            }
        }
        m
    }
}

/// Flips the sign so the largest-magnitude entry is positive. Ties keep the
/// first maximal index, which makes the convention deterministic.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut idx = 0;
    let mut best = 0.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

const EIGEN_MAX_SWEEPS: usize = 50_000;

/// Full symmetric eigendecomposition, deterministic for identical input.
pub fn symmetric_eigen(a: &SymmetricMatrix) -> Result<EigenDecomposition> {
    if !a.is_finite() {
        return Err(Error::invalid("matrix contains non-finite entries"));
    }
    let m = a.to_nalgebra();
    let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, EIGEN_MAX_SWEEPS).ok_or(
        Error::EigenDidNotConverge {
            iterations: EIGEN_MAX_SWEEPS,
        },
    )?;
    let p = a.dim();
    let mut order: Vec<usize> = (0..p).collect();
    // stable sort on (value desc, original index asc); ties stay deterministic
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("finite eigenvalues")
    });
    let mut values = Vec::with_capacity(p);
    let mut vectors = Vec::with_capacity(p);
    for &k in &order {
        values.push(eig.eigenvalues[k]);
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        canonical_sign(&mut v);
        vectors.push(v);
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Sample covariance `X^T X / n` without centering; the model is mean-zero.
pub fn sample_covariance(x: &DataMatrix) -> Result<SymmetricMatrix> {
    let p = x.p();
    let n = x.n() as f64;
    let mut acc = vec![0.0; p * p];
    for row in x.rows() {
        for i in 0..p {
            let xi = row[i];
            let out = &mut acc[i * p..(i + 1) * p];
            for j in i..p {
                out[j] += xi * row[j];
            }
        }
    }
    let mut m = SymmetricMatrix::zeros(p);
    for i in 0..p {
        for j in i..p {
            let v = acc[i * p + j] / n;
            m.data[i * p + j] = v;
            m.data[j * p + i] = v;
        }
    }
    if !m.is_finite() {
        return Err(Error::invalid("covariance overflowed to non-finite values"));
    }
    Ok(m)
}

/// Euclidean projection onto the l1 ball of the given radius.
///
/// Exact soft-threshold level found from the sorted magnitudes; feasible
/// inputs are returned unchanged.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return Err(Error::invalid("l1 radius must be positive"));
    }
    if !vecops::is_finite(v) {
        return Err(Error::invalid("non-finite input to l1 projection"));
    }
    if l1_norm(v) <= radius {
        return Ok(v.to_vec());
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cum += m;
        let candidate = (cum - radius) / (k + 1) as f64;
        if m > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    Ok(v.iter()
        .map(|&x| x.signum() * (x.abs() - theta).max(0.0))
        .collect())
}

/// Euclidean projection onto the l2 ball `{x : |x - center| <= radius}`.
pub fn project_l2_ball(v: &[f64], center: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return Err(Error::invalid("l2 radius must be positive"));
    }
    let diff: Vec<f64> = v.iter().zip(center).map(|(a, b)| a - b).collect();
    let dist = l2_norm(&diff);
    if dist <= radius {
        return Ok(v.to_vec());
    }
    let scale = radius / dist;
    Ok(center
        .iter()
        .zip(&diff)
        .map(|(c, d)| c + scale * d)
        .collect())
}

pub fn soft_threshold_scalar(x: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    x.signum() * (x.abs() - t).max(0.0)
}

pub fn soft_threshold_vec(v: &[f64], t: f64) -> Vec<f64> {
    v.iter().map(|&x| soft_threshold_scalar(x, t)).collect()
}

pub fn soft_threshold_matrix(m: &SymmetricMatrix, t: f64) -> SymmetricMatrix {
    m.map(|x| soft_threshold_scalar(x, t))
}

const CAPPED_SIMPLEX_TOL: f64 = 1e-12;

/// Projects `vals` onto `{g in [0,1]^p : sum g = target}` by bisection on the
/// shift `theta` with `sum min(max(v - theta, 0), 1) = target`.
pub fn project_capped_simplex(vals: &[f64], target: f64) -> Vec<f64> {
    let p = vals.len() as f64;
    debug_assert!(target > 0.0 && target <= p);
    let sum_at = |theta: f64| -> f64 {
        vals.iter()
            .map(|&v| (v - theta).clamp(0.0, 1.0))
            .sum::<f64>()
    };
    let mut lo = vals.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // sum_at(lo) = p >= target, sum_at(hi) = 0 <= target
    while hi - lo > CAPPED_SIMPLEX_TOL {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    vals.iter().map(|&v| (v - theta).clamp(0.0, 1.0)).collect()
}

/// Euclidean projection onto the Fantope `{Z : tr Z = 1, 0 <= Z <= I}`:
/// eigendecompose, project the spectrum onto the capped simplex, reassemble.
pub fn project_fantope(a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = symmetric_eigen(a)?;
    let capped = project_capped_simplex(&eig.values, 1.0);
    Ok(eig.reassemble_with(&capped))
}

#[cfg(test)]
mod tests {
    use super::vecops::*;
    use super::*;

    fn random_symmetric(dim: usize, seed: u64) -> SymmetricMatrix {
        let mut rng = crate::rng::SplitMix64::new(seed);
        SymmetricMatrix::from_fn(dim, |_, _| rng.next_f64() * 2.0 - 1.0)
    }

    #[test]
    fn covariance_single_row_is_outer_product() {
        let x = DataMatrix::from_rows(&[vec![1.0, -2.0, 0.5]]).unwrap();
        let s = sample_covariance(&x).unwrap();
        assert_eq!(s.get(0, 0), 1.0);
        assert_eq!(s.get(0, 1), -2.0);
        assert_eq!(s.get(1, 1), 4.0);
        assert_eq!(s.get(2, 1), -1.0);
    }

    #[test]
    fn covariance_sign_cancellation() {
        let x = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let s = sample_covariance(&x).unwrap();
        assert_eq!(s.get(0, 0), 1.0);
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(1, 1), 0.0);
    }

    #[test]
    fn covariance_matches_triple_loop_oracle() {
        let mut rng = crate::rng::SplitMix64::new(3);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..2).map(|_| rng.next_f64() * 4.0 - 2.0).collect())
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let s = sample_covariance(&x).unwrap();
        // brute force: sum_i x_i x_i^T / n entry by entry
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = 0.0;
                for row in &rows {
                    acc += row[a] * row[b];
                }
                acc /= rows.len() as f64;
                assert!((s.get(a, b) - acc).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn covariance_rejects_non_finite() {
        let err = DataMatrix::from_rows(&[vec![1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn eigen_diagonal() {
        let a = SymmetricMatrix::from_fn(2, |i, j| {
            if i == j {
                if i == 0 {
                    3.0
                } else {
                    1.0
                }
            } else {
                0.0
            }
        });
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        assert!((e.vectors[0][0].abs() - 1.0).abs() < 1e-12);
        assert!(e.vectors[0][0] > 0.0, "sign convention");
    }

    #[test]
    fn eigen_identity_all_ones() {
        let e = symmetric_eigen(&SymmetricMatrix::identity(4)).unwrap();
        for v in &e.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_spiked_top_value_five() {
        // I + v v^T with v = (1,1,1,0,1,0,...): top eigenvalue 1 + |v|^2 = 5
        let p = 8;
        let v: Vec<f64> = (0..p)
            .map(|i| if i == 0 || i == 1 || i == 2 || i == 4 { 1.0 } else { 0.0 })
            .collect();
        let a = SymmetricMatrix::from_fn(p, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id + v[i] * v[j]
        });
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values[0] - 5.0).abs() < 1e-10, "top {}", e.values[0]);
    }

    #[test]
    fn eigen_reconstruction_and_orthonormality() {
        for seed in 0..20 {
            let dim = 2 + (seed as usize % 9);
            let a = random_symmetric(dim, 100 + seed);
            let e = symmetric_eigen(&a).unwrap();
            for i in 0..dim {
                for j in 0..dim {
                    let g = dot(&e.vectors[i], &e.vectors[j]);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g - expect).abs() < 1e-10, "gram ({i},{j}) = {g}");
                }
            }
            let rec = e.reassemble_with(&e.values);
            let mut err = 0.0f64;
            for i in 0..dim {
                for j in 0..dim {
                    err = err.max((rec.get(i, j) - a.get(i, j)).abs());
                }
            }
            assert!(err <= 1e-8 * (1.0 + a.frobenius_norm()), "recon err {err}");
        }
    }

    #[test]
    fn l1_projection_feasible_fixed_point() {
        let v = vec![0.2, -0.3, 0.1];
        let w = project_l1_ball(&v, 1.0).unwrap();
        assert_eq!(v, w);
    }

    #[test]
    fn l1_projection_single_coordinate() {
        let w = project_l1_ball(&[3.0, 0.0], 1.0).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14);
        assert_eq!(w[1], 0.0);
    }

    #[test]
    fn l1_projection_matches_bisection_oracle() {
        // v = (2,1), radius 2: theta solves (2-t)+(1-t)=2 -> t=0.5
        let w = project_l1_ball(&[2.0, 1.0], 2.0).unwrap();
        assert!((w[0] - 1.5).abs() < 1e-12);
        assert!((w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn l2_projection_cases() {
        let c = vec![0.0, 0.0];
        assert_eq!(project_l2_ball(&c, &c, 1.0).unwrap(), c);
        let w = project_l2_ball(&[3.0, 4.0], &c, 1.0).unwrap();
        assert!((w[0] - 0.6).abs() < 1e-14);
        assert!((w[1] - 0.8).abs() < 1e-14);
        let w2 = project_l2_ball(&w, &c, 1.0).unwrap();
        assert_eq!(w, w2, "idempotent");
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold_scalar(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold_scalar(-2.0, 0.5), -1.5);
        let v = vec![1.0, -0.2, 3.0];
        assert_eq!(soft_threshold_vec(&v, 0.0), v);
    }

    #[test]
    fn fantope_projection_fixed_point_on_rank_one() {
        let u = {
            let mut u = vec![1.0, 2.0, -1.0];
            let n = l2_norm(&u);
            for x in u.iter_mut() {
                *x /= n;
            }
            u
        };
        let a = SymmetricMatrix::from_fn(3, |i, j| u[i] * u[j]);
        let z = project_fantope(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((z.get(i, j) - a.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fantope_projection_scaled_identity() {
        let z = project_fantope(&SymmetricMatrix::scaled_identity(2, 2.0)).unwrap();
        assert!((z.get(0, 0) - 0.5).abs() < 1e-10);
        assert!((z.get(1, 1) - 0.5).abs() < 1e-10);
        assert!(z.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn fantope_projection_caps_at_one() {
        // diag(3,1): theta = 2 gives capped values (1, 0)
        let a = SymmetricMatrix::from_fn(2, |i, j| {
            if i == j {
                if i == 0 {
                    3.0
                } else {
                    1.0
                }
            } else {
                0.0
            }
        });
        let z = project_fantope(&a).unwrap();
        assert!((z.get(0, 0) - 1.0).abs() < 1e-10);
        assert!(z.get(1, 1).abs() < 1e-10);
    }

    #[test]
    fn capped_simplex_sums_to_target() {
        let vals = vec![0.9, 0.5, 0.3, -0.2, 2.5];
        let g = project_capped_simplex(&vals, 1.0);
        let s: f64 = g.iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
        for x in &g {
            assert!((-1e-15..=1.0 + 1e-15).contains(x));
        }
    }
}
