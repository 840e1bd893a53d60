//! Complex linear operators and the dense/spectral utilities built on them.
//!
//! Conventions:
//! - ⟨a, b⟩ = Σᵢ conj(aᵢ)·bᵢ (conjugate-linear in the first argument).
//! - Adjoints are with respect to that inner product, so `apply_adjoint`
//!   of a matrix operator is multiplication by the conjugate transpose.
//! - `apply`/`apply_adjoint` assert on dimension mismatch (caller contract);
//!   the fallible entry points (`gram_apply`, `materialize_dense`,
//!   `weighted_norm_sq`) validate and return errors instead.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dense materialization of {rows}x{cols} needs {needed} entries, over the cap of {cap}")]
    EntryCapExceeded { rows: usize, cols: usize, needed: usize, cap: usize },
    #[error("matrix is not positive definite: pivot {pivot:.6e} at column {col} is at or below threshold {threshold:.6e}")]
    NotPositiveDefinite { pivot: f64, col: usize, threshold: f64 },
}

/// Default entry cap for dense materialization (2^26 complex entries, 1 GiB).
pub const DEFAULT_DENSE_ENTRY_CAP: usize = 1 << 26;

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

/// ⟨a, b⟩ = Σᵢ conj(aᵢ)·bᵢ.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len(), "inner product length mismatch");
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn vec_norm(a: &[Complex64]) -> f64 {
    vec_norm_sq(a).sqrt()
}

pub fn vec_is_finite(a: &[Complex64]) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Deterministic RNG stream for a seed; every stochastic element in the crate
/// draws from one of these.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in [0, 1) from the top 53 bits of a word.
pub fn uniform_unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One standard-normal pair via Box-Muller (kept in-crate so seeded streams
/// stay stable regardless of external sampler changes).
pub fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1 = 1.0 - uniform_unit(rng); // (0, 1], keeps ln finite
    let u2 = uniform_unit(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let th = std::f64::consts::TAU * u2;
    (r * th.cos(), r * th.sin())
}

/// Vector with independent standard-normal real and imaginary parts.
pub fn complex_gaussian_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| {
            let (re, im) = gaussian_pair(rng);
            Complex64::new(re, im)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Operator traits
// ---------------------------------------------------------------------------

/// A bounded linear map from images (length `domain_dim`) to data vectors
/// (length `range_dim`), with an exact adjoint.
pub trait LinearOperator: Send + Sync {
    fn domain_dim(&self) -> usize;
    fn range_dim(&self) -> usize;
    /// Grid shape `(nx, ny)` of the image domain, with `nx * ny == domain_dim()`.
    fn domain_shape(&self) -> (usize, usize);
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64>;
    /// Optional per-instance cache slot for the squared spectral norm
    /// λmax(AᴴA); operators that want `step_size` reuse provide one.
    fn lambda_max_cache(&self) -> Option<&OnceLock<f64>> {
        None
    }
}

/// A Hermitian map on the image domain (⟨x, Hy⟩ = ⟨Hx, y⟩).
pub trait HermitianOperator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
}

/// AᴴA of a linear operator, applied matrix-free.
pub struct GramOperator<'a> {
    a: &'a dyn LinearOperator,
}

impl<'a> GramOperator<'a> {
    pub fn new(a: &'a dyn LinearOperator) -> Self {
        Self { a }
    }
}

impl HermitianOperator for GramOperator<'_> {
    fn dim(&self) -> usize {
        self.a.domain_dim()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.a.apply_adjoint(&self.a.apply(x))
    }
}

/// AᴴA x with dimension validation.
pub fn gram_apply(a: &dyn LinearOperator, x: &[Complex64]) -> Result<Vec<Complex64>, OperatorError> {
    if x.len() != a.domain_dim() {
        return Err(OperatorError::DimensionMismatch { expected: a.domain_dim(), got: x.len() });
    }
    Ok(a.apply_adjoint(&a.apply(x)))
}

/// Wraps an operator and counts forward/adjoint applications. One
/// gram-equivalent is one forward plus one adjoint pass.
pub struct CountingOperator<'a> {
    inner: &'a dyn LinearOperator,
    n_forward: AtomicU64,
    n_adjoint: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCounts {
    pub forward: u64,
    pub adjoint: u64,
}

impl OpCounts {
    pub fn gram_equivalents(&self) -> f64 {
        (self.forward + self.adjoint) as f64 / 2.0
    }
}

impl<'a> CountingOperator<'a> {
    pub fn new(inner: &'a dyn LinearOperator) -> Self {
        Self { inner, n_forward: AtomicU64::new(0), n_adjoint: AtomicU64::new(0) }
    }

    pub fn counts(&self) -> OpCounts {
        OpCounts {
            forward: self.n_forward.load(Ordering::Relaxed),
            adjoint: self.n_adjoint.load(Ordering::Relaxed),
        }
    }
}

impl LinearOperator for CountingOperator<'_> {
    fn domain_dim(&self) -> usize {
        self.inner.domain_dim()
    }

    fn range_dim(&self) -> usize {
        self.inner.range_dim()
    }

    fn domain_shape(&self) -> (usize, usize) {
        self.inner.domain_shape()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.n_forward.fetch_add(1, Ordering::Relaxed);
        self.inner.apply(x)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.n_adjoint.fetch_add(1, Ordering::Relaxed);
        self.inner.apply_adjoint(y)
    }

    fn lambda_max_cache(&self) -> Option<&OnceLock<f64>> {
        self.inner.lambda_max_cache()
    }
}

/// Dense matrix operator; the reference implementation every matrix-free
/// operator is checked against, and the model for small constructed examples.
pub struct DenseOperator {
    m: DMatrix<Complex64>,
    shape: (usize, usize),
    cache: OnceLock<f64>,
}

impl DenseOperator {
    /// Domain shape defaults to a column image `(ncols, 1)`.
    pub fn new(m: DMatrix<Complex64>) -> Self {
        let shape = (m.ncols(), 1);
        Self { m, shape, cache: OnceLock::new() }
    }

    pub fn with_shape(m: DMatrix<Complex64>, nx: usize, ny: usize) -> Self {
        assert_eq!(nx * ny, m.ncols(), "shape does not cover the matrix columns");
        Self { m, shape: (nx, ny), cache: OnceLock::new() }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }
}

impl LinearOperator for DenseOperator {
    fn domain_dim(&self) -> usize {
        self.m.ncols()
    }

    fn range_dim(&self) -> usize {
        self.m.nrows()
    }

    fn domain_shape(&self) -> (usize, usize) {
        self.shape
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.m.ncols(), "operator domain mismatch");
        let v = nalgebra::DVector::from_column_slice(x);
        (&self.m * v).as_slice().to_vec()
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.m.nrows(), "operator range mismatch");
        let v = nalgebra::DVector::from_column_slice(y);
        self.m.ad_mul(&v).as_slice().to_vec()
    }

    fn lambda_max_cache(&self) -> Option<&OnceLock<f64>> {
        Some(&self.cache)
    }
}

/// Dense Hermitian operator for constructed spectra and oracles.
pub struct DenseHermitian {
    m: DMatrix<Complex64>,
}

impl DenseHermitian {
    pub fn new(m: DMatrix<Complex64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "Hermitian operator must be square");
        Self { m }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }
}

impl HermitianOperator for DenseHermitian {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.m.ncols(), "operator domain mismatch");
        let v = nalgebra::DVector::from_column_slice(x);
        (&self.m * v).as_slice().to_vec()
    }
}

// ---------------------------------------------------------------------------
// Power iteration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PowerMethodResult {
    /// Largest-eigenvalue estimate (Rayleigh quotient of the final iterate).
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Per-iteration Rayleigh quotients; nondecreasing for PSD operators.
    pub history: Vec<f64>,
}

/// Largest eigenvalue of a Hermitian PSD operator by power iteration from a
/// seeded complex-Gaussian start, stopping when successive Rayleigh quotients
/// agree to `tol` relative. Exhausting `max_iter` returns the best estimate
/// with `converged == false`; the zero operator converges immediately to 0.
pub fn power_method(
    h: &dyn HermitianOperator,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> PowerMethodResult {
    let n = h.dim();
    let mut rng = seeded_rng(seed);
    let mut v = complex_gaussian_vec(n, &mut rng);
    let nv = vec_norm(&v);
    assert!(nv > 0.0, "degenerate start vector");
    v.iter_mut().for_each(|z| *z /= nv);

    let mut history = Vec::new();
    let mut prev = f64::NAN;
    for k in 1..=max_iter {
        let w = h.apply(&v);
        let lambda = inner(&v, &w).re; // ‖v‖ = 1, so this is the Rayleigh quotient
        history.push(lambda);
        let nw = vec_norm(&w);
        if nw == 0.0 {
            return PowerMethodResult { lambda: 0.0, iterations: k, converged: true, history };
        }
        if k > 1 && (lambda - prev).abs() <= tol * lambda.abs().max(f64::MIN_POSITIVE) {
            return PowerMethodResult { lambda, iterations: k, converged: true, history };
        }
        prev = lambda;
        v = w;
        v.iter_mut().for_each(|z| *z /= nw);
    }
    PowerMethodResult { lambda: prev, iterations: max_iter, converged: false, history }
}

// ---------------------------------------------------------------------------
// Dense materialization
// ---------------------------------------------------------------------------

/// Builds the dense matrix of `a` column by column (`a` applied to the
/// standard basis). Refuses when `range·domain` exceeds `entry_cap`.
pub fn materialize_dense(
    a: &dyn LinearOperator,
    entry_cap: usize,
) -> Result<DMatrix<Complex64>, OperatorError> {
    let (rows, cols) = (a.range_dim(), a.domain_dim());
    let needed = rows.saturating_mul(cols);
    if needed > entry_cap {
        return Err(OperatorError::EntryCapExceeded { rows, cols, needed, cap: entry_cap });
    }
    let mut m = DMatrix::zeros(rows, cols);
    let mut e = vec![Complex64::ZERO; cols];
    for j in 0..cols {
        e[j] = Complex64::ONE;
        let col = a.apply(&e);
        for i in 0..rows {
            m[(i, j)] = col[i];
        }
        e[j] = Complex64::ZERO;
    }
    Ok(m)
}

/// Dense matrix of a Hermitian operator, with the same entry cap rule.
pub fn materialize_hermitian(
    h: &dyn HermitianOperator,
    entry_cap: usize,
) -> Result<DMatrix<Complex64>, OperatorError> {
    let n = h.dim();
    let needed = n.saturating_mul(n);
    if needed > entry_cap {
        return Err(OperatorError::EntryCapExceeded { rows: n, cols: n, needed, cap: entry_cap });
    }
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![Complex64::ZERO; n];
    for j in 0..n {
        e[j] = Complex64::ONE;
        let col = h.apply(&e);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = Complex64::ZERO;
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Weighted norm through a Hermitian positive-definite matrix
// ---------------------------------------------------------------------------

/// vᴴ P⁻¹ v for Hermitian positive-definite `p`, via an in-crate LLᴴ
/// factorization. A pivot at or below `1e-12 · trace(P)/n` raises
/// `NotPositiveDefinite` (the matrix is treated as singular at that scale).
/// Only the lower triangle and the real diagonal of `p` are read.
pub fn weighted_norm_sq(v: &[Complex64], p: &DMatrix<Complex64>) -> Result<f64, OperatorError> {
    let n = p.nrows();
    assert_eq!(p.ncols(), n, "weight matrix must be square");
    if v.len() != n {
        return Err(OperatorError::DimensionMismatch { expected: n, got: v.len() });
    }
    let trace: f64 = (0..n).map(|i| p[(i, i)].re).sum();
    let threshold = 1e-12 * trace / n as f64;

    let mut l = vec![Complex64::ZERO; n * n];
    for j in 0..n {
        let mut d = p[(j, j)].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if d <= threshold {
            return Err(OperatorError::NotPositiveDefinite { pivot: d, col: j, threshold });
        }
        let dj = d.sqrt();
        l[j * n + j] = Complex64::new(dj, 0.0);
        for i in (j + 1)..n {
            let mut s = p[(i, j)];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / dj;
        }
    }

    // P = LLᴴ, so vᴴP⁻¹v = ‖L⁻¹v‖².
    let mut z = v.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    Ok(vec_norm_sq(&z))
}

// ---------------------------------------------------------------------------
// Adjoint verification
// ---------------------------------------------------------------------------

/// Max relative deviation of ⟨Ax, y⟩ from ⟨x, Aᴴy⟩ over seeded random probe
/// pairs; exact adjoints stay below ~1e-12 at desk scale.
pub fn adjoint_check(a: &dyn LinearOperator, n_probes: usize, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_probes {
        let x = complex_gaussian_vec(a.domain_dim(), &mut rng);
        let y = complex_gaussian_vec(a.range_dim(), &mut rng);
        let ax = a.apply(&x);
        let aty = a.apply_adjoint(&y);
        let lhs = inner(&ax, &y);
        let rhs = inner(&x, &aty);
        let scale = vec_norm(&ax) * vec_norm(&y) + vec_norm(&x) * vec_norm(&aty) + f64::MIN_POSITIVE;
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inner_is_conjugate_linear_in_first_argument() {
        let a = [c(0.0, 1.0)];
        let b = [c(1.0, 0.0)];
        assert_eq!(inner(&a, &b), c(0.0, -1.0));
        assert_eq!(inner(&b, &a), c(0.0, 1.0));
    }

    #[test]
    fn gram_of_identity_returns_input() {
        let op = DenseOperator::new(DMatrix::identity(4, 4));
        let x = vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        let gx = gram_apply(&op, &x).unwrap();
        assert_eq!(gx, x);
    }

    #[test]
    fn gram_of_small_lower_triangular_matrix() {
        let m = dmatrix![c(1.0, 0.0), c(0.0, 0.0); c(1.0, 0.0), c(1.0, 0.0)];
        let op = DenseOperator::new(m);
        let gx = gram_apply(&op, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((gx[0] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((gx[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn gram_of_orthonormal_columns_is_identity() {
        let m = dmatrix![
            c(1.0, 0.0), c(0.0, 0.0);
            c(0.0, 0.0), c(1.0, 0.0);
            c(0.0, 0.0), c(0.0, 0.0)
        ];
        let op = DenseOperator::new(m);
        let x = vec![c(0.3, -0.7), c(1.5, 0.2)];
        let gx = gram_apply(&op, &x).unwrap();
        for (a, b) in gx.iter().zip(&x) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn gram_apply_rejects_wrong_length() {
        let op = DenseOperator::new(DMatrix::identity(3, 3));
        let err = gram_apply(&op, &[c(1.0, 0.0)]).unwrap_err();
        assert!(matches!(err, OperatorError::DimensionMismatch { expected: 3, got: 1 }));
    }

    fn diag_hermitian(d: &[f64]) -> DenseHermitian {
        let n = d.len();
        DenseHermitian::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(d[i], 0.0)
            } else {
                Complex64::ZERO
            }
        }))
    }

    fn random_hpsd(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = seeded_rng(seed);
        let b = DMatrix::from_fn(n, n, |_, _| {
            let (re, im) = gaussian_pair(&mut rng);
            c(re, im)
        });
        b.adjoint() * b
    }

    #[test]
    fn power_method_finds_dominant_diagonal_entry() {
        let h = diag_hermitian(&[1.0, 4.0, 9.0]);
        let r = power_method(&h, 1e-12, 10_000, 7);
        assert!(r.converged);
        assert!((r.lambda - 9.0).abs() <= 1e-8 * 9.0, "lambda = {}", r.lambda);
    }

    #[test]
    fn power_method_matches_dense_eigensolver() {
        let g = random_hpsd(8, 42);
        let oracle = g.clone().symmetric_eigenvalues().iter().copied().fold(f64::MIN, f64::max);
        let h = DenseHermitian::new(g);
        let r = power_method(&h, 1e-13, 50_000, 3);
        assert!((r.lambda - oracle).abs() <= 1e-6 * oracle, "power {} vs dense {}", r.lambda, oracle);
    }

    #[test]
    fn power_method_on_zero_operator_converges_to_zero() {
        let h = diag_hermitian(&[0.0, 0.0]);
        let r = power_method(&h, 1e-10, 100, 1);
        assert!(r.converged);
        assert_eq!(r.lambda, 0.0);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn power_method_history_is_nondecreasing_for_psd() {
        for seed in 0..5 {
            let g = random_hpsd(6, 100 + seed);
            let h = DenseHermitian::new(g);
            let r = power_method(&h, 1e-13, 2_000, seed);
            for w in r.history.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), "history dipped: {w:?}");
            }
        }
    }

    #[test]
    fn hermitian_quadratic_form_is_real_on_probes() {
        let g = random_hpsd(7, 11);
        let h = DenseHermitian::new(g);
        let mut rng = seeded_rng(5);
        for _ in 0..50 {
            let x = complex_gaussian_vec(7, &mut rng);
            let q = inner(&x, &h.apply(&x));
            assert!(q.im.abs() <= 1e-12 * vec_norm_sq(&x).max(1.0));
        }
    }

    #[test]
    fn materialize_identity_and_adjoint_symmetry() {
        let m = dmatrix![c(1.0, 2.0), c(0.0, -1.0); c(3.0, 0.0), c(0.5, 0.5)];
        let op = DenseOperator::new(m.clone());
        let dense = materialize_dense(&op, DEFAULT_DENSE_ENTRY_CAP).unwrap();
        assert_eq!(dense, m);

        // Adjoint columns must form the conjugate transpose.
        let mut adj = DMatrix::zeros(2, 2);
        let mut e = vec![Complex64::ZERO; 2];
        for j in 0..2 {
            e[j] = Complex64::ONE;
            let col = op.apply_adjoint(&e);
            for i in 0..2 {
                adj[(i, j)] = col[i];
            }
            e[j] = Complex64::ZERO;
        }
        assert_eq!(adj, m.adjoint());
    }

    #[test]
    fn materialize_refuses_over_entry_cap() {
        let op = DenseOperator::new(DMatrix::identity(8, 8));
        let err = materialize_dense(&op, 63).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("63"), "cap missing from message: {msg}");
    }

    #[test]
    fn dense_matvec_agrees_with_manual_sum() {
        let mut rng = seeded_rng(9);
        let m = DMatrix::from_fn(5, 3, |_, _| {
            let (re, im) = gaussian_pair(&mut rng);
            c(re, im)
        });
        let op = DenseOperator::new(m.clone());
        let x = complex_gaussian_vec(3, &mut rng);
        let y = op.apply(&x);
        for i in 0..5 {
            let want: Complex64 = (0..3).map(|j| m[(i, j)] * x[j]).sum();
            assert!((y[i] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn weighted_norm_identity_is_plain_norm() {
        let p = DMatrix::identity(2, 2);
        let v = [c(3.0, 0.0), c(0.0, 4.0)];
        assert!((weighted_norm_sq(&v, &p).unwrap() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_norm_diagonal_case() {
        let p = dmatrix![c(2.0, 0.0), c(0.0, 0.0); c(0.0, 0.0), c(4.0, 0.0)];
        let v = [c(2.0, 0.0), c(2.0, 0.0)];
        // 4/2 + 4/4 = 3
        assert!((weighted_norm_sq(&v, &p).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_norm_of_zero_vector_is_zero() {
        let p = random_hpsd(4, 2) + DMatrix::identity(4, 4);
        let v = vec![Complex64::ZERO; 4];
        assert_eq!(weighted_norm_sq(&v, &p).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norm_rejects_indefinite_matrix() {
        let p = dmatrix![c(1.0, 0.0), c(0.0, 0.0); c(0.0, 0.0), c(-1.0, 0.0)];
        let v = [c(1.0, 0.0), c(1.0, 0.0)];
        let err = weighted_norm_sq(&v, &p).unwrap_err();
        assert!(matches!(err, OperatorError::NotPositiveDefinite { col: 1, .. }));
    }

    #[test]
    fn weighted_norm_matches_dense_inverse_on_random_hpd() {
        let p = random_hpsd(6, 21) + DMatrix::identity(6, 6);
        let mut rng = seeded_rng(22);
        let v = complex_gaussian_vec(6, &mut rng);
        let got = weighted_norm_sq(&v, &p).unwrap();
        let vv = nalgebra::DVector::from_column_slice(&v);
        let sol = p.clone().lu().solve(&vv).unwrap();
        let want = inner(v.as_slice(), sol.as_slice()).re;
        assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn adjoint_check_passes_for_dense_operators() {
        let mut rng = seeded_rng(31);
        let m = DMatrix::from_fn(9, 6, |_, _| {
            let (re, im) = gaussian_pair(&mut rng);
            c(re, im)
        });
        let op = DenseOperator::new(m);
        assert!(adjoint_check(&op, 100, 77) < 1e-12);
    }

    #[test]
    fn counting_operator_tracks_gram_equivalents() {
        let op = DenseOperator::new(DMatrix::identity(3, 3));
        let counted = CountingOperator::new(&op);
        let x = vec![Complex64::ONE; 3];
        let _ = gram_apply(&counted, &x).unwrap();
        let counts = counted.counts();
        assert_eq!(counts, OpCounts { forward: 1, adjoint: 1 });
        assert_eq!(counts.gram_equivalents(), 1.0);
    }

    #[test]
    fn seeded_streams_are_reproducible() {
        let mut r1 = seeded_rng(123);
        let mut r2 = seeded_rng(123);
        let a = complex_gaussian_vec(16, &mut r1);
        let b = complex_gaussian_vec(16, &mut r2);
        assert_eq!(a, b);
    }
}
