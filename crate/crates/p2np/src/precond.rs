//! Preconditioners for preconditioned plug-and-play iterations.
//!
//! Two families:
//! - Fixed polynomials in the scaled gram operator, P = Σ_γ p_γ (αAᴴA)^{γ−1},
//!   applied by Horner's rule at exactly Γ−1 gram products per apply.
//! - The zero-memory self-scaling Hermitian rank-1 (ZMSHR1) dynamic update
//!   P_k = τ_k I + u_k u_kᴴ/⟨s−τ_k v, v⟩, built from the last step and
//!   gradient difference, applied in O(N) with no gram products at all.

use crate::operator::{inner, vec_norm, vec_norm_sq, HermitianOperator};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PrecondError {
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("polynomial is not positive on the spectral interval: p({t:.6e}) = {value:.6e}")]
    Indefinite { t: f64, value: f64 },
    #[error("degenerate step: ‖x_cur − x_prev‖ = {step_norm:.3e} is below {threshold:.3e}")]
    DegenerateStep { step_norm: f64, threshold: f64 },
}

// ---------------------------------------------------------------------------
// Polynomial preconditioners
// ---------------------------------------------------------------------------

/// P = Σ_{γ=1}^{Γ} p_γ (α·G)^{γ−1} for a Hermitian PSD gram operator G.
/// Hermitian by construction and commutes with G.
pub struct PolynomialPreconditioner<'a> {
    coeffs: Vec<f64>,
    alpha: f64,
    gram: &'a dyn HermitianOperator,
}

impl<'a> PolynomialPreconditioner<'a> {
    pub fn new(coeffs: Vec<f64>, alpha: f64, gram: &'a dyn HermitianOperator) -> Self {
        assert!(!coeffs.is_empty(), "need at least one coefficient");
        assert!(alpha > 0.0, "step size must be positive");
        Self { coeffs, alpha, gram }
    }

    /// Polynomial degree bound Γ (number of coefficients).
    pub fn gamma(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// P v by Horner's rule: w ← p_Γ v, then w ← p_γ v + α·G w for
    /// γ = Γ−1 … 1. Exactly Γ−1 gram applications.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>, PrecondError> {
        if v.len() != self.gram.dim() {
            return Err(PrecondError::DimensionMismatch { expected: self.gram.dim(), got: v.len() });
        }
        let mut w: Vec<Complex64> = v.iter().map(|z| z * self.coeffs[self.gamma() - 1]).collect();
        for &p in self.coeffs[..self.gamma() - 1].iter().rev() {
            let gw = self.gram.apply(&w);
            for ((wi, vi), gwi) in w.iter_mut().zip(v).zip(gw) {
                *wi = vi * p + gwi * self.alpha;
            }
        }
        Ok(w)
    }
}

impl HermitianOperator for PolynomialPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.gram.dim()
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        PolynomialPreconditioner::apply(self, v).expect("dimension checked by caller")
    }
}

/// p_γ = C(Γ, γ)·(−1)^{γ−1} for γ = 1…Γ; the binomial polynomial has
/// 1 − t·p(t) = (1−t)^Γ, so the residual factor Γ-th-powers per apply.
pub fn binomial_coeffs(gamma: usize) -> Vec<f64> {
    assert!(gamma >= 1, "polynomial order must be at least 1");
    let mut binom = gamma as f64; // C(Γ, 1)
    let mut out = Vec::with_capacity(gamma);
    for g in 1..=gamma {
        out.push(if g % 2 == 1 { binom } else { -binom });
        // C(Γ, g+1) = C(Γ, g)·(Γ−g)/(g+1)
        binom = binom * (gamma - g) as f64 / (g + 1) as f64;
    }
    out
}

/// The literal second-order Chebyshev instance P = 4 − (10/3)·αAᴴA.
pub fn cheb2_coeffs() -> Vec<f64> {
    vec![4.0, -10.0 / 3.0]
}

/// Standard Chebyshev residual polynomial on [t_min, t_max]: the p with
/// 1 − t·p(t) = T_Γ(map(t))/T_Γ(map(0)), map affine onto [−1, 1]. With
/// t_min = 0 the residual attains ±1 inside the interval, so p touches zero
/// there and `eta_norm_inv` rightly rejects it; choose t_min > 0 for a
/// positive-definite preconditioner.
pub fn cheb_standard_coeffs(gamma: usize, t_min: f64, t_max: f64) -> Vec<f64> {
    assert!(gamma >= 1, "polynomial order must be at least 1");
    assert!(t_min >= 0.0 && t_min < t_max, "need 0 ≤ t_min < t_max");
    let c1 = 2.0 / (t_max - t_min);
    let c0 = -(t_max + t_min) / (t_max - t_min);

    // Monomial coefficients of T_k(map(t)) via the Chebyshev recurrence.
    let mut t_prev = vec![1.0]; // T_0
    let mut t_cur = vec![c0, c1]; // T_1 = map(t)
    for _ in 2..=gamma {
        // T_{k+1} = 2·map·T_k − T_{k−1}
        let mut next = vec![0.0; t_cur.len() + 1];
        for (i, &c) in t_cur.iter().enumerate() {
            next[i] += 2.0 * c0 * c;
            next[i + 1] += 2.0 * c1 * c;
        }
        for (i, &c) in t_prev.iter().enumerate() {
            next[i] -= c;
        }
        t_prev = t_cur;
        t_cur = next;
    }
    let t_gamma = if gamma == 1 { t_cur.clone() } else { t_cur };
    let scale = poly_eval(&t_gamma, 0.0); // T_Γ(map(0)), nonzero for t_min ≥ 0
    // q(t) = T_Γ(map(t))/scale has q(0) = 1; p(t) = (1 − q(t))/t drops the
    // ~1e-16 constant residue and shifts the remaining coefficients down.
    t_gamma[1..].iter().map(|&c| -c / scale).collect()
}

/// Σ_γ coeffs[γ−1]·t^{γ−1} by Horner.
pub fn poly_eval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// η = ‖P⁻¹‖₂ bound for a polynomial preconditioner: 1 over the minimum of
/// p(t) on a 10001-point uniform grid over [0, α·λmax], the interval holding
/// every eigenvalue of αAᴴA. Errors if p is not strictly positive there.
pub fn eta_norm_inv(p: &PolynomialPreconditioner, lambda_max: f64) -> Result<f64, PrecondError> {
    assert!(lambda_max >= 0.0, "spectral bound must be nonnegative");
    let hi = p.alpha * lambda_max;
    let mut min_val = f64::INFINITY;
    let mut min_t = 0.0;
    for i in 0..=10_000 {
        let t = hi * i as f64 / 10_000.0;
        let v = poly_eval(&p.coeffs, t);
        if v < min_val {
            min_val = v;
            min_t = t;
        }
    }
    if min_val <= 0.0 {
        return Err(PrecondError::Indefinite { t: min_t, value: min_val });
    }
    Ok(1.0 / min_val)
}

// ---------------------------------------------------------------------------
// ZMSHR1 dynamic preconditioner
// ---------------------------------------------------------------------------

/// Snapshot of one ZMSHR1 update: P = τI + u uᴴ/denom (u empty ⇒ P = τI).
/// For feasible (s, v) pairs, τ ∈ (1/(2θ2), 1/θ1] and the eigenvalues of P
/// lie in [1/(2θ2), (δ+1)/(δθ1)].
#[derive(Debug, Clone)]
pub struct DynamicPreconditioner {
    pub tau: f64,
    /// Rank-1 direction s − τv, or empty when the curvature correction was
    /// rejected by the δ-angle test.
    pub u: Vec<Complex64>,
    /// ⟨s − τv, v⟩ (real part; positive whenever u is kept).
    pub denom: f64,
    pub delta: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl DynamicPreconditioner {
    /// The identity preconditioner (Alg. 3's choice at the first iteration).
    pub fn identity(delta: f64, theta1: f64, theta2: f64) -> Self {
        Self { tau: 1.0, u: Vec::new(), denom: 1.0, delta, theta1, theta2 }
    }

    /// P v = τ·v + u·⟨u, v⟩/denom. O(N); no gram products.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>, PrecondError> {
        if !self.u.is_empty() && self.u.len() != v.len() {
            return Err(PrecondError::DimensionMismatch { expected: self.u.len(), got: v.len() });
        }
        let mut out: Vec<Complex64> = v.iter().map(|z| z * self.tau).collect();
        if !self.u.is_empty() {
            let coef = inner(&self.u, v) / self.denom;
            for (o, ui) in out.iter_mut().zip(&self.u) {
                *o += ui * coef;
            }
        }
        Ok(out)
    }

    /// η_k = ‖P⁻¹‖₂ = 1/τ (τ is the smallest eigenvalue: the rank-1 term is
    /// PSD because denom > 0 whenever u is kept).
    pub fn eta(&self) -> f64 {
        1.0 / self.tau
    }

    /// The two distinct eigenvalues (τ with multiplicity N−1, and
    /// τ + ‖u‖²/denom); both equal τ when u is empty.
    pub fn eigenvalues(&self) -> (f64, f64) {
        if self.u.is_empty() {
            (self.tau, self.tau)
        } else {
            (self.tau, self.tau + vec_norm_sq(&self.u) / self.denom)
        }
    }
}

/// Smallest mixing weight a on the two-stage lattice {i/100} → {j/10000}
/// such that v = a·s + (1−a)·m satisfies the curvature-feasibility pair
///   Re⟨s,v⟩ ≥ θ1·⟨s,s⟩   and   ⟨v,v⟩ ≤ θ2·Re⟨s,v⟩.
/// a = 1 is always feasible (both ratios are 1 and θ1 < 1 < θ2). The first
/// constraint is affine in a and the second compares a convex quadratic to an
/// affine function, so the feasible set is an interval: first-feasible on the
/// refined lattice is the global 1e-4-lattice minimum.
pub fn search_a(
    s: &[Complex64],
    m: &[Complex64],
    theta1: f64,
    theta2: f64,
) -> Result<f64, PrecondError> {
    assert_eq!(s.len(), m.len(), "step and gradient-difference lengths differ");
    let ss = vec_norm_sq(s);
    if ss == 0.0 {
        return Err(PrecondError::DegenerateStep { step_norm: 0.0, threshold: 0.0 });
    }
    let sm = inner(s, m).re;
    let mm = vec_norm_sq(m);
    // Re⟨s,v⟩ and ⟨v,v⟩ as exact functions of the three scalars.
    let feasible = |a: f64| -> bool {
        let sv = a * ss + (1.0 - a) * sm;
        let vv = a * a * ss + 2.0 * a * (1.0 - a) * sm + (1.0 - a) * (1.0 - a) * mm;
        sv >= theta1 * ss && vv <= theta2 * sv
    };
    let coarse = (0..=100).map(|i| i as f64 / 100.0).find(|&a| feasible(a)).expect(
        "a = 1 is feasible by construction",
    );
    if coarse == 0.0 {
        return Ok(0.0);
    }
    let hi = (coarse * 10_000.0).round() as i64;
    Ok((hi - 100..=hi)
        .map(|j| j as f64 / 10_000.0)
        .find(|&a| feasible(a))
        .expect("the coarse point itself is feasible"))
}

/// One ZMSHR1 update from consecutive iterates and gradients:
/// s = x_cur − x_prev, m = g_cur − g_prev, v = a·s + (1−a)·m with the minimal
/// feasible a, τ = b − √(max(0, b² − c)) for b = ⟨s,s⟩/Re⟨s,v⟩ and
/// c = ⟨s,s⟩/⟨v,v⟩, and u = s − τv unless it is δ-orthogonal to v.
/// The √ argument is clamped at 0: Cauchy–Schwarz makes it nonnegative
/// analytically, floating point may dip below.
pub fn zmshr1_update(
    x_prev: &[Complex64],
    x_cur: &[Complex64],
    g_prev: &[Complex64],
    g_cur: &[Complex64],
    delta: f64,
    theta1: f64,
    theta2: f64,
) -> Result<DynamicPreconditioner, PrecondError> {
    let n = x_cur.len();
    for v in [x_prev, g_prev, g_cur] {
        if v.len() != n {
            return Err(PrecondError::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    assert!(delta > 0.0, "δ must be positive");
    assert!(theta1 > 0.0 && theta1 < 1.0, "θ1 must lie in (0, 1)");
    assert!(theta2 > 1.0, "θ2 must exceed 1");

    let s: Vec<Complex64> = x_cur.iter().zip(x_prev).map(|(a, b)| a - b).collect();
    let step_norm = vec_norm(&s);
    let threshold = 1e-14 * vec_norm(x_cur);
    if step_norm <= threshold {
        return Err(PrecondError::DegenerateStep { step_norm, threshold });
    }
    let m: Vec<Complex64> = g_cur.iter().zip(g_prev).map(|(a, b)| a - b).collect();

    let a = search_a(&s, &m, theta1, theta2)?;
    let v: Vec<Complex64> = s
        .iter()
        .zip(&m)
        .map(|(si, mi)| si * a + mi * (1.0 - a))
        .collect();

    let ss = vec_norm_sq(&s);
    let sv = inner(&s, &v).re;
    let vv = vec_norm_sq(&v);
    let b = ss / sv;
    let c = ss / vv;
    let tau = b - (b * b - c).max(0.0).sqrt();

    let w: Vec<Complex64> = s.iter().zip(&v).map(|(si, vi)| si - vi * tau).collect();
    let wv = inner(&w, &v).re;
    if wv <= delta * vec_norm(&w) * vec_norm(&v) {
        Ok(DynamicPreconditioner { tau, u: Vec::new(), denom: 1.0, delta, theta1, theta2 })
    } else {
        Ok(DynamicPreconditioner { tau, u: w, denom: wv, delta, theta1, theta2 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{
        complex_gaussian_vec, gaussian_pair, materialize_hermitian, seeded_rng, DenseHermitian,
        DEFAULT_DENSE_ENTRY_CAP,
    };
    use nalgebra::DMatrix;

    const DELTA: f64 = 1e-8;
    const THETA1: f64 = 2e-6;
    const THETA2: f64 = 200.0;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag_gram(d: &[f64]) -> DenseHermitian {
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
    fn binomial_coefficients_match_the_closed_form() {
        assert_eq!(binomial_coeffs(1), vec![1.0]);
        assert_eq!(binomial_coeffs(2), vec![2.0, -1.0]);
        assert_eq!(binomial_coeffs(3), vec![3.0, -3.0, 1.0]);
        assert_eq!(binomial_coeffs(4), vec![4.0, -6.0, 4.0, -1.0]);
    }

    #[test]
    fn cheb2_is_the_literal_pair() {
        let coeffs = cheb2_coeffs();
        assert_eq!(coeffs[0], 4.0);
        assert_eq!(coeffs[1], -10.0 / 3.0);
        assert!((poly_eval(&coeffs, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(poly_eval(&coeffs, 0.0), 4.0);
    }

    #[test]
    fn standard_chebyshev_on_unit_interval_is_eight_minus_eight_t() {
        let coeffs = cheb_standard_coeffs(2, 0.0, 1.0);
        assert!((coeffs[0] - 8.0).abs() < 1e-12);
        assert!((coeffs[1] + 8.0).abs() < 1e-12);
    }

    #[test]
    fn standard_chebyshev_residual_equioscillates() {
        // 1 − t·p(t) must equal T_Γ(map(t))/T_Γ(map(0)): check |residual| ≤
        // 1/|T_Γ(map(0))| on the interval and equality at the endpoints.
        let (tmin, tmax, gamma) = (0.2, 1.0, 4usize);
        let coeffs = cheb_standard_coeffs(gamma, tmin, tmax);
        let map0 = -(tmax + tmin) / (tmax - tmin);
        // T_4(x) = 8x⁴ − 8x² + 1
        let t4 = |x: f64| 8.0 * x.powi(4) - 8.0 * x.powi(2) + 1.0;
        let bound = 1.0 / t4(map0).abs();
        for i in 0..=1000 {
            let t = tmin + (tmax - tmin) * i as f64 / 1000.0;
            let r = 1.0 - t * poly_eval(&coeffs, t);
            assert!(r.abs() <= bound + 1e-12, "residual {r} at t = {t}");
        }
        let r_end = 1.0 - tmax * poly_eval(&coeffs, tmax);
        assert!((r_end.abs() - bound).abs() < 1e-12);
    }

    #[test]
    fn identity_polynomial_leaves_vectors_unchanged() {
        let g = diag_gram(&[0.3, 0.7]);
        let p = PolynomialPreconditioner::new(vec![1.0], 1.0, &g);
        let v = vec![c(1.0, 2.0), c(-0.5, 0.25)];
        assert_eq!(p.apply(&v).unwrap(), v);
    }

    #[test]
    fn binomial_two_on_diagonal_gram_matches_pointwise_polynomial() {
        let g = diag_gram(&[0.0, 1.0]);
        let p = PolynomialPreconditioner::new(binomial_coeffs(2), 1.0, &g);
        let out = p.apply(&[Complex64::ONE, Complex64::ONE]).unwrap();
        // p(0) = 2, p(1) = 1.
        assert!((out[0] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((out[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cubic_polynomial_matches_dense_matrix_oracle() {
        let n = 8;
        let g_mat = random_hpsd(n, 31);
        let g = DenseHermitian::new(g_mat.clone());
        let alpha = 0.05;
        let coeffs = binomial_coeffs(3);
        let p = PolynomialPreconditioner::new(coeffs.clone(), alpha, &g);

        let ag = &g_mat * c(alpha, 0.0);
        let dense = DMatrix::identity(n, n) * c(coeffs[0], 0.0)
            + &ag * c(coeffs[1], 0.0)
            + &ag * &ag * c(coeffs[2], 0.0);
        let mut rng = seeded_rng(32);
        let v = complex_gaussian_vec(n, &mut rng);
        let got = p.apply(&v).unwrap();
        let want = &dense * nalgebra::DVector::from_column_slice(&v);
        for i in 0..n {
            assert!((got[i] - want[i]).norm() < 1e-12, "entry {i}");
        }
    }

    #[test]
    fn polynomial_apply_costs_exactly_gamma_minus_one_gram_products() {
        use crate::operator::{CountingOperator, DenseOperator, GramOperator, LinearOperator};
        let a = DenseOperator::new(DMatrix::identity(4, 4));
        let counted = CountingOperator::new(&a);
        let gram = GramOperator::new(&counted as &dyn LinearOperator);
        let v = vec![Complex64::ONE; 4];

        let p2 = PolynomialPreconditioner::new(cheb2_coeffs(), 1.0, &gram);
        p2.apply(&v).unwrap();
        assert_eq!(counted.counts().gram_equivalents(), 1.0);

        let p4 = PolynomialPreconditioner::new(binomial_coeffs(4), 1.0, &gram);
        p4.apply(&v).unwrap();
        assert_eq!(counted.counts().gram_equivalents(), 4.0); // 1 + 3
    }

    #[test]
    fn polynomial_is_hermitian_and_commutes_with_its_gram() {
        let n = 6;
        let g_mat = random_hpsd(n, 33);
        let g = DenseHermitian::new(g_mat);
        let p = PolynomialPreconditioner::new(vec![1.5, -0.8, 0.1], 0.2, &g);
        let mut rng = seeded_rng(34);
        for _ in 0..20 {
            let v = complex_gaussian_vec(n, &mut rng);
            let w = complex_gaussian_vec(n, &mut rng);
            let pv = p.apply(&v).unwrap();
            let pw = p.apply(&w).unwrap();
            let lhs = inner(&pv, &w);
            let rhs = inner(&pw, &v).conj();
            assert!((lhs - rhs).norm() < 1e-10 * (vec_norm(&v) * vec_norm(&w)));

            let gp = g.apply(&pv);
            let pg = p.apply(&g.apply(&v)).unwrap();
            let diff: f64 = gp.iter().zip(&pg).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            assert!(diff <= 1e-10 * vec_norm(&v).max(1.0) * 10.0, "commutator {diff}");
        }
    }

    #[test]
    fn eta_of_binomial_two_at_matched_step_is_one() {
        let g = diag_gram(&[1.0]);
        let p = PolynomialPreconditioner::new(binomial_coeffs(2), 1.0, &g);
        // p(t) = 2 − t on [0, 1]: minimum p(1) = 1.
        assert_eq!(eta_norm_inv(&p, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn eta_of_cheb2_at_matched_step_is_three_halves() {
        let g = diag_gram(&[1.0]);
        let p = PolynomialPreconditioner::new(cheb2_coeffs(), 1.0, &g);
        assert!((eta_norm_inv(&p, 1.0).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn eta_of_identity_is_one() {
        let g = diag_gram(&[2.0]);
        let p = PolynomialPreconditioner::new(vec![1.0], 0.5, &g);
        assert_eq!(eta_norm_inv(&p, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn eta_rejects_polynomials_that_touch_zero() {
        let g = diag_gram(&[1.0]);
        // Standard Chebyshev on [0, 1] has p(1) = 0: indefinite at the edge.
        let p = PolynomialPreconditioner::new(cheb_standard_coeffs(2, 0.0, 1.0), 1.0, &g);
        assert!(matches!(eta_norm_inv(&p, 1.0), Err(PrecondError::Indefinite { .. })));
    }

    #[test]
    fn search_a_returns_zero_when_m_equals_s() {
        let s = vec![c(0.3, -0.2), c(1.0, 0.5)];
        assert_eq!(search_a(&s, &s, THETA1, THETA2).unwrap(), 0.0);
    }

    #[test]
    fn search_a_on_opposed_vectors_hits_the_constraint_boundary() {
        let s = vec![c(1.0, 0.0)];
        let m = vec![c(-1.0, 0.0)];
        // Re⟨s,v⟩ = 2a−1 ≥ θ1 forces a ≥ (1+θ1)/2; the lattice lands on 0.5001.
        let a = search_a(&s, &m, THETA1, THETA2).unwrap();
        assert!((a - 0.5001).abs() < 1e-15, "a = {a}");
    }

    #[test]
    fn search_a_rejects_zero_steps() {
        let s = vec![Complex64::ZERO; 3];
        let m = vec![Complex64::ONE; 3];
        assert!(matches!(search_a(&s, &m, THETA1, THETA2), Err(PrecondError::DegenerateStep { .. })));
    }

    #[test]
    fn two_stage_search_matches_the_exhaustive_lattice_minimum() {
        for seed in 0..200 {
            let mut rng = seeded_rng(500 + seed);
            let s = complex_gaussian_vec(4, &mut rng);
            let m = complex_gaussian_vec(4, &mut rng);
            let got = search_a(&s, &m, THETA1, THETA2).unwrap();

            let ss = vec_norm_sq(&s);
            let sm = inner(&s, &m).re;
            let mm = vec_norm_sq(&m);
            let brute = (0..=10_000)
                .map(|j| j as f64 / 10_000.0)
                .find(|&a| {
                    let sv = a * ss + (1.0 - a) * sm;
                    let vv =
                        a * a * ss + 2.0 * a * (1.0 - a) * sm + (1.0 - a) * (1.0 - a) * mm;
                    sv >= THETA1 * ss && vv <= THETA2 * sv
                })
                .unwrap();
            assert_eq!(got, brute, "seed {seed}");
        }
    }

    #[test]
    fn identity_curvature_gives_the_identity_preconditioner() {
        // m = s (gram = I): v = s exactly, b = c = 1, τ = 1, u rejected.
        let mut rng = seeded_rng(40);
        let x_prev = complex_gaussian_vec(5, &mut rng);
        let s = complex_gaussian_vec(5, &mut rng);
        let x_cur: Vec<Complex64> = x_prev.iter().zip(&s).map(|(a, b)| a + b).collect();
        let g_prev = vec![Complex64::ZERO; 5];
        let g_cur: Vec<Complex64> = x_cur.iter().zip(&x_prev).map(|(a, b)| a - b).collect();
        let p = zmshr1_update(&x_prev, &x_cur, &g_prev, &g_cur, DELTA, THETA1, THETA2).unwrap();
        assert_eq!(p.tau, 1.0);
        assert!(p.u.is_empty());
        let v = complex_gaussian_vec(5, &mut rng);
        assert_eq!(p.apply(&v).unwrap(), v);
    }

    #[test]
    fn scalar_quadratic_recovers_the_inverse_hessian() {
        // f = ½·4x²: s = 1, m = 4 ⇒ a = 0, v = 4, τ = 1/4, u = 0.
        let p = zmshr1_update(
            &[Complex64::ZERO],
            &[Complex64::ONE],
            &[Complex64::ZERO],
            &[c(4.0, 0.0)],
            DELTA,
            THETA1,
            THETA2,
        )
        .unwrap();
        assert_eq!(p.tau, 0.25);
        assert!(p.u.is_empty());
        assert_eq!(p.eta(), 4.0);
    }

    #[test]
    fn degenerate_steps_are_rejected() {
        let x = vec![Complex64::ONE; 4];
        let g = vec![Complex64::ONE; 4];
        let err = zmshr1_update(&x, &x, &g, &g, DELTA, THETA1, THETA2).unwrap_err();
        assert!(matches!(err, PrecondError::DegenerateStep { .. }));
    }

    #[test]
    fn rank_one_apply_matches_the_dense_oracle() {
        let n = 6;
        let g_mat = random_hpsd(n, 41);
        let mut rng = seeded_rng(42);
        let x_prev = complex_gaussian_vec(n, &mut rng);
        let x_cur = complex_gaussian_vec(n, &mut rng);
        let gv = |x: &[Complex64]| -> Vec<Complex64> {
            (&g_mat * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()
        };
        let p = zmshr1_update(&x_prev, &x_cur, &gv(&x_prev), &gv(&x_cur), DELTA, THETA1, THETA2)
            .unwrap();
        assert!(!p.u.is_empty(), "want a genuine rank-1 case");
        assert!(p.denom > 0.0);

        let dense = DMatrix::from_fn(n, n, |i, j| {
            let base = if i == j { c(p.tau, 0.0) } else { Complex64::ZERO };
            base + p.u[i] * p.u[j].conj() / p.denom
        });
        let v = complex_gaussian_vec(n, &mut rng);
        let got = p.apply(&v).unwrap();
        let want = &dense * nalgebra::DVector::from_column_slice(&v);
        for i in 0..n {
            assert!((got[i] - want[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn rank_one_annihilates_orthogonal_vectors() {
        let u = vec![Complex64::ONE, Complex64::ZERO];
        let p = DynamicPreconditioner { tau: 0.5, u, denom: 2.0, delta: DELTA, theta1: THETA1, theta2: THETA2 };
        let v = vec![Complex64::ZERO, c(3.0, -1.0)];
        let out = p.apply(&v).unwrap();
        assert_eq!(out[0], Complex64::ZERO);
        assert_eq!(out[1], c(1.5, -0.5));
    }

    #[test]
    fn lemma_bounds_hold_over_a_thousand_random_quadratics() {
        let n = 6;
        let tau_lo = 1.0 / (2.0 * THETA2);
        let tau_hi = 1.0 / THETA1;
        let eig_hi = (DELTA + 1.0) / (DELTA * THETA1);
        let mut rank1 = 0;
        for trial in 0..1000 {
            let g_mat = random_hpsd(n, 10_000 + trial);
            let mut rng = seeded_rng(20_000 + trial);
            let x_prev = complex_gaussian_vec(n, &mut rng);
            let x_cur = complex_gaussian_vec(n, &mut rng);
            let gv = |x: &[Complex64]| -> Vec<Complex64> {
                (&g_mat * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()
            };
            let p = zmshr1_update(&x_prev, &x_cur, &gv(&x_prev), &gv(&x_cur), DELTA, THETA1, THETA2)
                .unwrap();
            assert!(p.tau > tau_lo && p.tau <= tau_hi * (1.0 + 1e-10), "τ = {} (trial {trial})", p.tau);
            let (lo, hi) = p.eigenvalues();
            assert!(lo >= tau_lo * (1.0 - 1e-10), "eig {lo} (trial {trial})");
            assert!(hi <= eig_hi * (1.0 + 1e-10), "eig {hi} (trial {trial})");
            if !p.u.is_empty() {
                assert!(p.denom > 0.0);
                rank1 += 1;
            }
        }
        assert!(rank1 > 0, "no trial produced a rank-1 correction");
    }

    #[test]
    fn closed_form_eigenvalues_match_the_dense_eigensolver() {
        let n = 5;
        for trial in 0..25 {
            let g_mat = random_hpsd(n, 700 + trial);
            let mut rng = seeded_rng(800 + trial);
            let x_prev = complex_gaussian_vec(n, &mut rng);
            let x_cur = complex_gaussian_vec(n, &mut rng);
            let gv = |x: &[Complex64]| -> Vec<Complex64> {
                (&g_mat * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()
            };
            let p = zmshr1_update(&x_prev, &x_cur, &gv(&x_prev), &gv(&x_cur), DELTA, THETA1, THETA2)
                .unwrap();
            struct Op<'a>(&'a DynamicPreconditioner, usize);
            impl HermitianOperator for Op<'_> {
                fn dim(&self) -> usize {
                    self.1
                }
                fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
                    self.0.apply(v).unwrap()
                }
            }
            let dense = materialize_hermitian(&Op(&p, n), DEFAULT_DENSE_ENTRY_CAP).unwrap();
            let eigs = dense.symmetric_eigenvalues();
            let (lo, hi) = p.eigenvalues();
            let min_e = eigs.iter().copied().fold(f64::INFINITY, f64::min);
            let max_e = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!((min_e - lo.min(hi)).abs() < 1e-10 * lo.abs().max(1.0));
            assert!((max_e - lo.max(hi)).abs() < 1e-10 * hi.abs().max(1.0));
        }
    }
}
