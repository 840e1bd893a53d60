//! Iterative reconstruction solvers.
//!
//! Four algorithms over a shared forward operator A and plug-in denoiser D:
//! - `pnp_ista`:       x_{k+1} = D(x_k − α·∇f(x_k), σ)
//! - `p2np_fixed`:     x_{k+1} = D(x_k − α·P∇f(x_k), σ), P a fixed polynomial in αAᴴA
//! - `p2np_dynamic`:   same step with P_k rebuilt each iteration by the
//!                     zero-memory rank-1 update from (s_k, m_k)
//! - `pnp_admm`:       x_k = (AᴴA+I)⁻¹(Aᴴy + z_{k−1}) via warm-started CG,
//!                     z̄_k = D(x_k + z_{k−1}), z_k = z_{k−1} + x_k − z̄_k
//!
//! with f = ½‖Ax − y‖², ∇f = Aᴴ(Ax − y), and shared initialization x₁ = Aᴴy.
//! Work is metered in gram-equivalents ((forwards + adjoints)/2), excluding
//! the shared initialization: 1 per iteration for ISTA and the dynamic
//! variant, Γ for a fixed degree-(Γ−1) polynomial, 1 + (inner CG iterations)
//! per ADMM outer iteration.

use crate::denoise::Denoiser;
use crate::diag::psnr_slices;
use crate::image::ComplexImage;
use crate::operator::{
    inner, vec_is_finite, vec_norm, vec_norm_sq, CountingOperator, GramOperator,
    HermitianOperator, LinearOperator, OpCounts,
};
use crate::precond::{
    binomial_coeffs, cheb2_coeffs, cheb_standard_coeffs, eta_norm_inv, zmshr1_update,
    DynamicPreconditioner, PolynomialPreconditioner, PrecondError,
};
use num_complex::Complex64;
use std::time::Instant;
use thiserror::Error;

/// Iterates whose norm exceeds this multiple of ‖x₁‖ abort the solve.
pub const DIVERGENCE_NORM_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    PnpIsta,
    PnpAdmm,
    P2npFixed,
    P2npDynamic,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::PnpIsta => "pnp-ista",
            SolverKind::PnpAdmm => "pnp-admm",
            SolverKind::P2npFixed => "p2np-f",
            SolverKind::P2npDynamic => "p2np-d",
        }
    }
}

/// Recipe for the fixed polynomial preconditioner (coefficients of
/// p(t) = Σ_γ p_γ t^{γ−1} evaluated at t = α·AᴴA).
#[derive(Debug, Clone, PartialEq)]
pub enum PrecondSpec {
    /// p = [1]: plain ISTA step.
    Identity,
    /// Binomial coefficients of the given order Γ ≥ 1.
    Binomial(usize),
    /// The literal second-order pair [4, −10/3].
    Cheb2,
    /// Standard Chebyshev residual polynomial on [t_min, t_max] ⊂ [0, 1]
    /// (the normalized spectral domain t = α·λ).
    ChebStandard { gamma: usize, t_min: f64, t_max: f64 },
    /// Arbitrary user coefficients p_1..p_Γ.
    Custom(Vec<f64>),
}

impl PrecondSpec {
    pub fn coeffs(&self) -> Vec<f64> {
        match self {
            PrecondSpec::Identity => vec![1.0],
            PrecondSpec::Binomial(gamma) => binomial_coeffs(*gamma),
            PrecondSpec::Cheb2 => cheb2_coeffs(),
            PrecondSpec::ChebStandard { gamma, t_min, t_max } => {
                cheb_standard_coeffs(*gamma, *t_min, *t_max)
            }
            PrecondSpec::Custom(c) => c.clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PrecondSpec::Identity => "1".into(),
            PrecondSpec::Binomial(gamma) => format!("binom{gamma}"),
            PrecondSpec::Cheb2 => "cheb".into(),
            PrecondSpec::ChebStandard { gamma, .. } => format!("chebstd{gamma}"),
            PrecondSpec::Custom(_) => "custom".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub solver: SolverKind,
    pub max_iters: usize,
    /// None → α = 1/‖AᴴA‖₂ by power iteration (cached on the operator).
    pub alpha: Option<f64>,
    /// Denoiser strength passed through to D.
    pub sigma: f64,
    /// Polynomial recipe; used by `P2npFixed` only.
    pub precond: PrecondSpec,
    /// Inner CG stopping (ADMM only).
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Stop once E(x_k) drops below this.
    pub early_stop_e: Option<f64>,
    /// Rank-1 update parameters (dynamic variant only).
    pub delta: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// Power-method controls for the automatic step size.
    pub power_tol: f64,
    pub power_max_iter: usize,
    pub seed: u64,
    /// Ground truth for the PSNR column; rows carry NaN without it.
    pub psnr_reference: Option<ComplexImage>,
    /// Record every iterate (memory-heavy; diagnostics only).
    pub keep_iterates: bool,
    /// Record every dynamic preconditioner state.
    pub keep_dynamic_states: bool,
    /// When false all wall_ms fields are 0 so repeated runs emit
    /// byte-identical traces.
    pub measure_wall_time: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            solver: SolverKind::PnpIsta,
            max_iters: 200,
            alpha: None,
            sigma: 0.1,
            precond: PrecondSpec::Identity,
            cg_tol: 1e-10,
            cg_max_iter: 200,
            early_stop_e: None,
            delta: 1e-8,
            theta1: 2e-6,
            theta2: 200.0,
            power_tol: 1e-12,
            power_max_iter: 20_000,
            seed: 0,
            psnr_reference: None,
            keep_iterates: false,
            keep_dynamic_states: false,
            measure_wall_time: false,
        }
    }
}

/// One row of a solve trace. Records describe the k-th iteration's
/// transition: the gradient at x_k, the displacement to x_{k+1}, the
/// fixed-point residual E(x_k) = ‖x_{k+1}−x_k‖²/‖x₁‖², and the quality of
/// the produced iterate. For ADMM the displacement is ‖x_k − z̄_k‖ and the
/// gradient column carries ‖z_{k−1} − x_k‖, its proximal-gradient analogue.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub psnr_db: f64,
    pub e_xk: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
    /// ‖P⁻¹‖₂: 1 for ISTA, the spectral-grid bound for fixed polynomials
    /// (NaN when the polynomial is not positive there), 1/τ_k for the
    /// dynamic variant, NaN for ADMM.
    pub eta: f64,
    /// Cumulative milliseconds since solve start (0 when timing is off).
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub solver: SolverKind,
    pub records: Vec<IterRecord>,
    pub final_image: ComplexImage,
    /// Step size used (NaN for ADMM, which has none).
    pub alpha: f64,
    /// ‖AᴴA‖₂ estimate backing the automatic α (NaN for ADMM).
    pub lambda_max: f64,
    pub power_converged: bool,
    pub power_iterations: usize,
    /// Fixed-polynomial η recorded once (NaN for other solvers).
    pub eta: f64,
    pub x1_norm: f64,
    /// Forward/adjoint applications during iterations (init excluded).
    pub counts: OpCounts,
    /// Inner CG iterations per outer iteration (ADMM only).
    pub cg_iterations: Vec<usize>,
    /// Inner CG convergence flag per outer iteration (ADMM only).
    pub cg_converged: Vec<bool>,
    /// x₁, x₂, … when `keep_iterates` is on.
    pub iterates: Option<Vec<ComplexImage>>,
    /// P_k snapshots when `keep_dynamic_states` is on.
    pub dynamic_states: Option<Vec<DynamicPreconditioner>>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("length mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("iterate diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String, trace: Box<SolveTrace> },
    #[error("dynamic preconditioning requires a normalization-equivariant denoiser; `{name}` is not")]
    DenoiserNotEquivariant { name: String },
    #[error("conjugate gradient breakdown at outer iteration {outer}: {source}")]
    CgBreakdown {
        outer: usize,
        #[source]
        source: CgBreakdownError,
    },
    #[error(transparent)]
    Precond(#[from] PrecondError),
}

// ---------------------------------------------------------------------------
// Step size and initialization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct StepSize {
    pub alpha: f64,
    pub lambda_max: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// α = 1/‖AᴴA‖₂ with the spectral norm from power iteration. The result is
/// cached on operators that expose a cache slot, so repeated solves on one
/// model pay for the power method once. Non-convergence is reported through
/// the flag, not an error: the Rayleigh quotient is still the best estimate.
pub fn step_size(op: &dyn LinearOperator, tol: f64, max_iter: usize, seed: u64) -> StepSize {
    if let Some(cell) = op.lambda_max_cache() {
        if let Some(&lambda) = cell.get() {
            return StepSize { alpha: 1.0 / lambda, lambda_max: lambda, converged: true, iterations: 0 };
        }
    }
    let gram = GramOperator::new(op);
    let pm = crate::operator::power_method(&gram, tol, max_iter, seed);
    if pm.converged {
        if let Some(cell) = op.lambda_max_cache() {
            let _ = cell.set(pm.lambda);
        }
    }
    StepSize {
        alpha: 1.0 / pm.lambda,
        lambda_max: pm.lambda,
        converged: pm.converged,
        iterations: pm.iterations,
    }
}

/// Shared initialization x₁ = Aᴴy.
pub fn init_x(op: &dyn LinearOperator, y: &[Complex64]) -> Result<ComplexImage, SolveError> {
    if y.len() != op.range_dim() {
        return Err(SolveError::ShapeMismatch { expected: op.range_dim(), got: y.len() });
    }
    let (nx, ny) = op.domain_shape();
    Ok(ComplexImage::from_vec(nx, ny, op.apply_adjoint(y)))
}

// ---------------------------------------------------------------------------
// Conjugate gradients
// ---------------------------------------------------------------------------

#[derive(Debug, Error, Clone, Copy)]
#[error("curvature ⟨p, Hp⟩ = {curvature:.3e} at CG iteration {iteration}: operator is not positive definite")]
pub struct CgBreakdownError {
    pub iteration: usize,
    pub curvature: f64,
}

#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
}

/// Conjugate gradients on a Hermitian positive-definite operator, from a
/// zero initial guess. Stops when ‖Hx − rhs‖/‖rhs‖ ≤ tol or after max_iter
/// iterations (flagged, not an error). Zero or negative curvature — the
/// operator violating positive definiteness — is an error.
pub fn cg_solve(
    op: &dyn HermitianOperator,
    rhs: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<CgResult, CgBreakdownError> {
    cg_solve_from(op, rhs, None, tol, max_iter)
}

/// CG with an optional warm start (costs one extra operator application to
/// form the initial residual; a zero start computes it for free).
pub fn cg_solve_from(
    op: &dyn HermitianOperator,
    rhs: &[Complex64],
    x0: Option<&[Complex64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgResult, CgBreakdownError> {
    let rhs_norm = vec_norm(rhs);
    if rhs_norm == 0.0 {
        return Ok(CgResult { x: vec![Complex64::ZERO; rhs.len()], iterations: 0, converged: true, relative_residual: 0.0 });
    }
    let mut x: Vec<Complex64> = match x0 {
        Some(v) => v.to_vec(),
        None => vec![Complex64::ZERO; rhs.len()],
    };
    let mut r: Vec<Complex64> = if x0.is_some() {
        let hx = op.apply(&x);
        rhs.iter().zip(hx).map(|(b, h)| b - h).collect()
    } else {
        rhs.to_vec()
    };
    let mut rr = vec_norm_sq(&r);
    if rr.sqrt() / rhs_norm <= tol {
        return Ok(CgResult { x, iterations: 0, converged: true, relative_residual: rr.sqrt() / rhs_norm });
    }
    let mut p = r.clone();
    for i in 1..=max_iter {
        let hp = op.apply(&p);
        let curvature = inner(&p, &hp).re;
        if curvature <= 0.0 {
            return Err(CgBreakdownError { iteration: i, curvature });
        }
        let a = rr / curvature;
        for ((xi, pi), (ri, hpi)) in x.iter_mut().zip(&p).zip(r.iter_mut().zip(&hp)) {
            *xi += pi * a;
            *ri -= hpi * a;
        }
        let rr_next = vec_norm_sq(&r);
        if rr_next.sqrt() / rhs_norm <= tol {
            return Ok(CgResult { x, iterations: i, converged: true, relative_residual: rr_next.sqrt() / rhs_norm });
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + *pi * beta;
        }
    }
    let rel = rr.sqrt() / rhs_norm;
    Ok(CgResult { x, iterations: max_iter, converged: false, relative_residual: rel })
}

// ---------------------------------------------------------------------------
// Gradient-family driver (ISTA / fixed / dynamic)
// ---------------------------------------------------------------------------

fn check_psnr_reference(op: &dyn LinearOperator, cfg: &SolveConfig) -> Result<(), SolveError> {
    if let Some(r) = &cfg.psnr_reference {
        if r.len() != op.domain_dim() {
            return Err(SolveError::ShapeMismatch { expected: op.domain_dim(), got: r.len() });
        }
    }
    Ok(())
}

fn record_psnr(cfg: &SolveConfig, x: &[Complex64]) -> f64 {
    match &cfg.psnr_reference {
        Some(r) => psnr_slices(x, &r.data, 1.0),
        None => f64::NAN,
    }
}

fn divergence_reason(x: &[Complex64], x1_norm: f64) -> Option<String> {
    if !vec_is_finite(x) {
        return Some("non-finite entries".into());
    }
    let n = vec_norm(x);
    if n > DIVERGENCE_NORM_FACTOR * x1_norm {
        return Some(format!("‖x‖ = {n:.3e} exceeds {DIVERGENCE_NORM_FACTOR:.0e}·‖x₁‖"));
    }
    None
}

enum GradientVariant {
    Ista,
    Fixed(Vec<f64>),
    Dynamic,
}

fn run_gradient_family(
    op: &dyn LinearOperator,
    y: &[Complex64],
    d: &dyn Denoiser,
    cfg: &SolveConfig,
    variant: GradientVariant,
) -> Result<SolveTrace, SolveError> {
    assert!(cfg.max_iters >= 1, "need at least one iteration");
    if let Some(a) = cfg.alpha {
        assert!(a > 0.0, "step size must be positive");
    }
    if y.len() != op.range_dim() {
        return Err(SolveError::ShapeMismatch { expected: op.range_dim(), got: y.len() });
    }
    check_psnr_reference(op, cfg)?;
    if matches!(variant, GradientVariant::Dynamic) && !d.is_norm_equivariant() {
        return Err(SolveError::DenoiserNotEquivariant { name: d.name().to_string() });
    }

    let (nx, ny) = op.domain_shape();
    let step = step_size(op, cfg.power_tol, cfg.power_max_iter, cfg.seed);
    let alpha = cfg.alpha.unwrap_or(step.alpha);

    // Initialization is shared across solvers and excluded from the
    // per-iteration work counters.
    let x1 = op.apply_adjoint(y);
    let x1_norm = vec_norm(&x1);
    let x1_norm_sq = x1_norm * x1_norm;

    let counted = CountingOperator::new(op);
    let gram = GramOperator::new(&counted as &dyn LinearOperator);
    let (fixed_p, fixed_eta) = match &variant {
        GradientVariant::Fixed(coeffs) => {
            let p = PolynomialPreconditioner::new(coeffs.clone(), alpha, &gram);
            let eta = eta_norm_inv(&p, step.lambda_max).map(|e| e).unwrap_or(f64::NAN);
            (Some(p), eta)
        }
        _ => (None, f64::NAN),
    };

    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut iterates = cfg.keep_iterates.then(|| vec![ComplexImage::from_vec(nx, ny, x1.clone())]);
    let mut dyn_states = cfg.keep_dynamic_states.then(Vec::new);
    let clock = Instant::now();

    let mut x_cur = x1.clone();
    let mut x_prev: Vec<Complex64> = Vec::new();
    let mut g_prev: Vec<Complex64> = Vec::new();
    let mut p_dyn = DynamicPreconditioner::identity(cfg.delta, cfg.theta1, cfg.theta2);

    let finish = |records: Vec<IterRecord>,
                  x: Vec<Complex64>,
                  iterates: Option<Vec<ComplexImage>>,
                  dyn_states: Option<Vec<DynamicPreconditioner>>,
                  counts: OpCounts,
                  kind: SolverKind| SolveTrace {
        solver: kind,
        records,
        final_image: ComplexImage::from_vec(nx, ny, x),
        alpha,
        lambda_max: step.lambda_max,
        power_converged: step.converged,
        power_iterations: step.iterations,
        eta: fixed_eta,
        x1_norm,
        counts,
        cg_iterations: Vec::new(),
        cg_converged: Vec::new(),
        iterates,
        dynamic_states: dyn_states,
    };
    let kind = match &variant {
        GradientVariant::Ista => SolverKind::PnpIsta,
        GradientVariant::Fixed(_) => SolverKind::P2npFixed,
        GradientVariant::Dynamic => SolverKind::P2npDynamic,
    };

    for k in 1..=cfg.max_iters {
        // ∇f(x_k) = Aᴴ(Ax_k − y): exactly one gram-equivalent.
        let ax = counted.apply(&x_cur);
        let resid: Vec<Complex64> = ax.iter().zip(y).map(|(a, b)| a - b).collect();
        let g_cur = counted.apply_adjoint(&resid);

        let (direction, eta_k) = match &variant {
            GradientVariant::Ista => (g_cur.clone(), 1.0),
            GradientVariant::Fixed(_) => {
                let p = fixed_p.as_ref().expect("built above");
                (p.apply(&g_cur)?, fixed_eta)
            }
            GradientVariant::Dynamic => {
                if k >= 2 {
                    match zmshr1_update(
                        &x_prev, &x_cur, &g_prev, &g_cur, cfg.delta, cfg.theta1, cfg.theta2,
                    ) {
                        Ok(p) => p_dyn = p,
                        // A vanishing step carries no curvature information:
                        // keep the previous preconditioner.
                        Err(PrecondError::DegenerateStep { .. }) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
                if let Some(states) = dyn_states.as_mut() {
                    states.push(p_dyn.clone());
                }
                let dir = p_dyn.apply(&g_cur).expect("dimensions fixed by construction");
                (dir, p_dyn.eta())
            }
        };

        let z: Vec<Complex64> = x_cur.iter().zip(&direction).map(|(xi, di)| xi - di * alpha).collect();
        let x_next = d.denoise(&ComplexImage::from_vec(nx, ny, z), cfg.sigma).data;

        let step_norm = x_next.iter().zip(&x_cur).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let e_xk = if x1_norm_sq > 0.0 {
            step_norm * step_norm / x1_norm_sq
        } else if step_norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        records.push(IterRecord {
            iter: k,
            psnr_db: record_psnr(cfg, &x_next),
            e_xk,
            grad_norm: vec_norm(&g_cur),
            step_norm,
            eta: eta_k,
            wall_ms: if cfg.measure_wall_time { clock.elapsed().as_secs_f64() * 1e3 } else { 0.0 },
        });
        if let Some(its) = iterates.as_mut() {
            its.push(ComplexImage::from_vec(nx, ny, x_next.clone()));
        }

        if let Some(reason) = divergence_reason(&x_next, x1_norm) {
            let counts = counted.counts();
            return Err(SolveError::Diverged {
                iteration: k,
                reason,
                trace: Box::new(finish(records, x_next, iterates, dyn_states, counts, kind)),
            });
        }

        x_prev = std::mem::take(&mut x_cur);
        g_prev = g_cur;
        x_cur = x_next;
        let _ = &x_prev; // dynamic variant reads these next iteration
        let _ = &g_prev;

        if cfg.early_stop_e.is_some_and(|t| e_xk < t) {
            break;
        }
    }
    let counts = counted.counts();
    Ok(finish(records, x_cur, iterates, dyn_states, counts, kind))
}

// ---------------------------------------------------------------------------
// Public solver entry points
// ---------------------------------------------------------------------------

pub fn pnp_ista(
    op: &dyn LinearOperator,
    y: &[Complex64],
    d: &dyn Denoiser,
    cfg: &SolveConfig,
) -> Result<SolveTrace, SolveError> {
    assert_eq!(cfg.solver, SolverKind::PnpIsta, "config targets a different solver");
    run_gradient_family(op, y, d, cfg, GradientVariant::Ista)
}

/// The preconditioner is given as its coefficient recipe so it can be bound
/// to this solve's counted gram operator and the automatically selected α.
pub fn p2np_fixed(
    op: &dyn LinearOperator,
    y: &[Complex64],
    d: &dyn Denoiser,
    cfg: &SolveConfig,
) -> Result<SolveTrace, SolveError> {
    assert_eq!(cfg.solver, SolverKind::P2npFixed, "config targets a different solver");
    run_gradient_family(op, y, d, cfg, GradientVariant::Fixed(cfg.precond.coeffs()))
}

pub fn p2np_dynamic(
    op: &dyn LinearOperator,
    y: &[Complex64],
    d: &dyn Denoiser,
    cfg: &SolveConfig,
) -> Result<SolveTrace, SolveError> {
    assert_eq!(cfg.solver, SolverKind::P2npDynamic, "config targets a different solver");
    run_gradient_family(op, y, d, cfg, GradientVariant::Dynamic)
}

/// AᴴA + μI, the ADMM x-update operator (μ = 1).
struct ShiftedGram<'a> {
    gram: &'a GramOperator<'a>,
    shift: f64,
}

impl HermitianOperator for ShiftedGram<'_> {
    fn dim(&self) -> usize {
        self.gram.dim()
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = HermitianOperator::apply(self.gram, v);
        for (o, vi) in out.iter_mut().zip(v) {
            *o += vi * self.shift;
        }
        out
    }
}

pub fn pnp_admm(
    op: &dyn LinearOperator,
    y: &[Complex64],
    d: &dyn Denoiser,
    cfg: &SolveConfig,
) -> Result<SolveTrace, SolveError> {
    assert_eq!(cfg.solver, SolverKind::PnpAdmm, "config targets a different solver");
    assert!(cfg.max_iters >= 1, "need at least one iteration");
    if y.len() != op.range_dim() {
        return Err(SolveError::ShapeMismatch { expected: op.range_dim(), got: y.len() });
    }
    check_psnr_reference(op, cfg)?;

    let (nx, ny) = op.domain_shape();
    let x1 = op.apply_adjoint(y); // also the constant part Aᴴy of every rhs
    let x1_norm = vec_norm(&x1);
    let x1_norm_sq = x1_norm * x1_norm;

    let counted = CountingOperator::new(op);
    let gram = GramOperator::new(&counted as &dyn LinearOperator);
    let shifted = ShiftedGram { gram: &gram, shift: 1.0 };

    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut iterates = cfg.keep_iterates.then(|| vec![ComplexImage::from_vec(nx, ny, x1.clone())]);
    let mut cg_iterations = Vec::with_capacity(cfg.max_iters);
    let mut cg_converged = Vec::with_capacity(cfg.max_iters);
    let clock = Instant::now();

    let mut z = x1.clone();
    let mut x = x1.clone(); // warm start carrier
    let finish = |records: Vec<IterRecord>,
                  x: Vec<Complex64>,
                  iterates: Option<Vec<ComplexImage>>,
                  cg_iterations: Vec<usize>,
                  cg_converged: Vec<bool>,
                  counts: OpCounts| SolveTrace {
        solver: SolverKind::PnpAdmm,
        records,
        final_image: ComplexImage::from_vec(nx, ny, x),
        alpha: f64::NAN,
        lambda_max: f64::NAN,
        power_converged: true,
        power_iterations: 0,
        eta: f64::NAN,
        x1_norm,
        counts,
        cg_iterations,
        cg_converged,
        iterates,
        dynamic_states: None,
    };

    for k in 1..=cfg.max_iters {
        let rhs: Vec<Complex64> = x1.iter().zip(&z).map(|(a, b)| a + b).collect();
        let cg = cg_solve_from(&shifted, &rhs, Some(&x), cfg.cg_tol, cfg.cg_max_iter)
            .map_err(|source| SolveError::CgBreakdown { outer: k, source })?;
        cg_iterations.push(cg.iterations);
        cg_converged.push(cg.converged);
        x = cg.x;

        let zx: Vec<Complex64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
        let zbar = d.denoise(&ComplexImage::from_vec(nx, ny, zx), cfg.sigma).data;
        let grad_norm = z.iter().zip(&x).map(|(zi, xi)| (zi - xi).norm_sqr()).sum::<f64>().sqrt();
        for ((zi, xi), zbi) in z.iter_mut().zip(&x).zip(&zbar) {
            *zi += xi - zbi;
        }

        let step_norm = x.iter().zip(&zbar).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let e_xk = if x1_norm_sq > 0.0 {
            step_norm * step_norm / x1_norm_sq
        } else if step_norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        records.push(IterRecord {
            iter: k,
            psnr_db: record_psnr(cfg, &x),
            e_xk,
            grad_norm,
            step_norm,
            eta: f64::NAN,
            wall_ms: if cfg.measure_wall_time { clock.elapsed().as_secs_f64() * 1e3 } else { 0.0 },
        });
        if let Some(its) = iterates.as_mut() {
            its.push(ComplexImage::from_vec(nx, ny, x.clone()));
        }

        let bad = divergence_reason(&x, x1_norm)
            .or_else(|| if vec_is_finite(&zbar) { None } else { Some("non-finite entries".into()) });
        if let Some(reason) = bad {
            let counts = counted.counts();
            return Err(SolveError::Diverged {
                iteration: k,
                reason,
                trace: Box::new(finish(records, x, iterates, cg_iterations, cg_converged, counts)),
            });
        }
        if cfg.early_stop_e.is_some_and(|t| e_xk < t) {
            break;
        }
    }
    let counts = counted.counts();
    Ok(finish(records, x, iterates, cg_iterations, cg_converged, counts))
}

/// Dispatch on `cfg.solver`.
pub fn solve(
    op: &dyn LinearOperator,
    y: &[Complex64],
    d: &dyn Denoiser,
    cfg: &SolveConfig,
) -> Result<SolveTrace, SolveError> {
    match cfg.solver {
        SolverKind::PnpIsta => pnp_ista(op, y, d, cfg),
        SolverKind::PnpAdmm => pnp_admm(op, y, d, cfg),
        SolverKind::P2npFixed => p2np_fixed(op, y, d, cfg),
        SolverKind::P2npDynamic => p2np_dynamic(op, y, d, cfg),
    }
}
