//! Metrics and theory-verification diagnostics.
//!
//! Everything here is a pure function over images, operators, and solve
//! traces: PSNR, the fixed-point residual E(x_k), the empirical convergence
//! rate ρ_k, the contraction bound r₀ = (1+ε)ρ(I−αPAᴴA), the dynamic-run
//! stability bound, the rank-1 eigenvalue monitor, and CSV trace emission.

use crate::denoise::Denoiser;
use crate::image::ComplexImage;
use crate::operator::{
    materialize_hermitian, power_method, GramOperator, HermitianOperator,
    LinearOperator,
};
use crate::precond::{DynamicPreconditioner, PolynomialPreconditioner};
use crate::solve::{IterRecord, SolveTrace};
use num_complex::Complex64;
use std::io::{BufRead, BufReader, BufWriter, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("zero normalizer: ‖x₁‖ must be positive")]
    ZeroNormalizer,
    #[error("trace too short: need at least {needed} records, have {len}")]
    TraceTooShort { needed: usize, len: usize },
    #[error("bound inapplicable: {0}")]
    Inapplicable(String),
    #[error("trace parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// PSNR
// ---------------------------------------------------------------------------

/// 10·log10(peak²/MSE) with the MSE taken over complex values, so phase
/// errors count. Exact agreement returns +∞.
pub fn psnr(xhat: &ComplexImage, xtrue: &ComplexImage, peak: f64) -> Result<f64, DiagError> {
    if xhat.shape() != xtrue.shape() {
        return Err(DiagError::ShapeMismatch { expected: xtrue.shape(), got: xhat.shape() });
    }
    Ok(psnr_slices(&xhat.data, &xtrue.data, peak))
}

/// PSNR over raw slices of equal length (callers guarantee the match).
pub fn psnr_slices(xhat: &[Complex64], xtrue: &[Complex64], peak: f64) -> f64 {
    assert_eq!(xhat.len(), xtrue.len());
    assert!(peak > 0.0, "peak must be positive");
    let mse: f64 =
        xhat.iter().zip(xtrue).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / xhat.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

// ---------------------------------------------------------------------------
// Fixed-point residual and empirical rate
// ---------------------------------------------------------------------------

/// E(x_k) = ‖x_k − D(x_k − αP∇f(x_k), σ)‖² / ‖x₁‖², recomputed from the raw
/// operations (`precond` = None means P = I). This is the same quantity the
/// solvers record per iteration.
#[allow(clippy::too_many_arguments)]
pub fn fixed_point_residual(
    op: &dyn LinearOperator,
    y: &[Complex64],
    d: &dyn Denoiser,
    sigma: f64,
    precond: Option<&dyn HermitianOperator>,
    alpha: f64,
    x_k: &ComplexImage,
    x1_norm: f64,
) -> Result<f64, DiagError> {
    if x1_norm <= 0.0 {
        return Err(DiagError::ZeroNormalizer);
    }
    if y.len() != op.range_dim() {
        return Err(DiagError::LengthMismatch { expected: op.range_dim(), got: y.len() });
    }
    if x_k.len() != op.domain_dim() {
        return Err(DiagError::LengthMismatch { expected: op.domain_dim(), got: x_k.len() });
    }
    let ax = op.apply(&x_k.data);
    let resid: Vec<Complex64> = ax.iter().zip(y).map(|(a, b)| a - b).collect();
    let g = op.apply_adjoint(&resid);
    let dir = match precond {
        Some(p) => p.apply(&g),
        None => g,
    };
    let z: Vec<Complex64> = x_k.data.iter().zip(&dir).map(|(xi, di)| xi - di * alpha).collect();
    let (nx, ny) = op.domain_shape();
    let x_next = d.denoise(&ComplexImage::from_vec(nx, ny, z), sigma);
    let step = x_next.dist(x_k);
    Ok(step * step / (x1_norm * x1_norm))
}

/// ρ_k = (‖x_{k+2} − x_{k+1}‖ / ‖x₂ − x₁‖)^{1/k}: the k-th root of the step
/// contraction relative to the first step, read off the recorded step norms.
/// A vanishing first step makes the rate undefined → NaN sentinel.
pub fn empirical_rate(trace: &SolveTrace, k: usize) -> Result<f64, DiagError> {
    assert!(k >= 1, "rate is defined for k ≥ 1");
    if trace.records.len() < k + 1 {
        return Err(DiagError::TraceTooShort { needed: k + 1, len: trace.records.len() });
    }
    let denom = trace.records[0].step_norm;
    if denom == 0.0 {
        return Ok(f64::NAN);
    }
    Ok((trace.records[k].step_norm / denom).powf(1.0 / k as f64))
}

/// The iteration index attaining max_k ‖∇f(x_k)‖ and the value (1-based).
pub fn max_grad(trace: &SolveTrace) -> Option<(usize, f64)> {
    trace
        .records
        .iter()
        .max_by(|a, b| a.grad_norm.total_cmp(&b.grad_norm))
        .map(|r| (r.iter, r.grad_norm))
}

// ---------------------------------------------------------------------------
// Contraction bound r₀
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateBoundMethod {
    DenseOracle,
    PowerIteration,
}

#[derive(Debug, Clone, Copy)]
pub struct RateBoundReport {
    pub r0: f64,
    pub epsilon: f64,
    pub spectral_radius: f64,
    pub method: RateBoundMethod,
}

/// The residual map I − αPAᴴA, Hermitian because P is a polynomial in AᴴA.
struct ResidualMap<'a> {
    gram: &'a GramOperator<'a>,
    p: &'a PolynomialPreconditioner<'a>,
    alpha: f64,
}

impl HermitianOperator for ResidualMap<'_> {
    fn dim(&self) -> usize {
        self.gram.dim()
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let gv = HermitianOperator::apply(self.gram, v);
        let pgv = self.p.apply(&gv).expect("dimension fixed");
        v.iter().zip(pgv).map(|(vi, pi)| vi - pi * self.alpha).collect()
    }
}

const RATE_DENSE_DIM_CAP: usize = 1024; // up to 32×32 images

/// r₀ = (1+ε)·ρ(I − αPAᴴA) for the polynomial preconditioner given by its
/// coefficients. Small problems (≤ 1024 pixels) get the exact dense
/// eigenvalue oracle; larger ones use power iteration on the Hermitian
/// residual map.
pub fn rate_bound(
    op: &dyn LinearOperator,
    coeffs: &[f64],
    alpha: f64,
    epsilon: f64,
) -> RateBoundReport {
    let method = if op.domain_dim() <= RATE_DENSE_DIM_CAP {
        RateBoundMethod::DenseOracle
    } else {
        RateBoundMethod::PowerIteration
    };
    rate_bound_with(op, coeffs, alpha, epsilon, method)
}

/// `rate_bound` with the method forced (used to cross-check the two paths).
pub fn rate_bound_with(
    op: &dyn LinearOperator,
    coeffs: &[f64],
    alpha: f64,
    epsilon: f64,
    method: RateBoundMethod,
) -> RateBoundReport {
    let gram = GramOperator::new(op);
    let p = PolynomialPreconditioner::new(coeffs.to_vec(), alpha, &gram);
    let map = ResidualMap { gram: &gram, p: &p, alpha };
    let spectral_radius = match method {
        RateBoundMethod::DenseOracle => {
            let dense = materialize_hermitian(&map, usize::MAX).expect("cap disabled");
            dense.symmetric_eigenvalues().iter().fold(0.0f64, |m, l| m.max(l.abs()))
        }
        RateBoundMethod::PowerIteration => {
            power_method(&map, 1e-13, 100_000, 0xD1A6).lambda.abs()
        }
    };
    RateBoundReport { r0: (1.0 + epsilon) * spectral_radius, epsilon, spectral_radius, method }
}

// ---------------------------------------------------------------------------
// Stability bound
// ---------------------------------------------------------------------------

/// Constituents of the dynamic-run stability bound. `q` is the contraction
/// factor of the fixed reference preconditioner P*, `lambda_star` the gram
/// spectral norm, `r_max_grad` the largest gradient norm along the run, and
/// `dist1` = ‖x₁ − x*‖ the initial distance to the reference fixed point.
#[derive(Debug, Clone, Copy)]
pub struct StabilityBoundInputs {
    pub q: f64,
    pub lambda_star: f64,
    pub r_max_grad: f64,
    pub delta: f64,
    pub theta1: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub dist1: f64,
}

/// q^k·‖x₁−x*‖ + (1+ε)·α·(δ+1+δθ1λ*)·R / (δθ1(1−q)): geometric forgetting of
/// the initial error plus a constant inflation from how far any feasible
/// rank-1 preconditioner can sit from P*. Monotone decreasing in k with the
/// second term as its limit.
pub fn stability_bound(inputs: &StabilityBoundInputs, k: usize) -> Result<f64, DiagError> {
    if !(inputs.q < 1.0) {
        return Err(DiagError::Inapplicable(format!("q = {} must be < 1", inputs.q)));
    }
    let StabilityBoundInputs { q, lambda_star, r_max_grad, delta, theta1, alpha, epsilon, dist1 } =
        *inputs;
    let tail = (1.0 + epsilon) * alpha * (delta + 1.0 + delta * theta1 * lambda_star) * r_max_grad
        / (delta * theta1 * (1.0 - q));
    Ok(q.powi(k as i32) * dist1 + tail)
}

// ---------------------------------------------------------------------------
// Rank-1 eigenvalue monitor
// ---------------------------------------------------------------------------

/// Margins for 1/(2θ2) < τ ≤ 1/θ1 and 1/(2θ2) ≤ eig(P) ≤ (δ+1)/(δθ1),
/// checked via the closed-form spectrum {τ, τ + ‖u‖²/denom}. Nonnegative
/// margins (strictly positive for the τ lower bound) mean pass.
#[derive(Debug, Clone, Copy)]
pub struct Lemma1Report {
    pub pass: bool,
    pub tau: f64,
    pub eig_min: f64,
    pub eig_max: f64,
    pub tau_lower_margin: f64,
    pub tau_upper_margin: f64,
    pub eig_lower_margin: f64,
    pub eig_upper_margin: f64,
}

pub fn lemma1_monitor(
    p: &DynamicPreconditioner,
    delta: f64,
    theta1: f64,
    theta2: f64,
) -> Lemma1Report {
    let tau_lo = 1.0 / (2.0 * theta2);
    let tau_hi = 1.0 / theta1;
    let eig_hi = (delta + 1.0) / (delta * theta1);
    let (a, b) = p.eigenvalues();
    let (eig_min, eig_max) = (a.min(b), a.max(b));
    let tau_lower_margin = p.tau - tau_lo;
    let tau_upper_margin = tau_hi - p.tau;
    let eig_lower_margin = eig_min - tau_lo;
    let eig_upper_margin = eig_hi - eig_max;
    Lemma1Report {
        pass: tau_lower_margin > 0.0
            && tau_upper_margin >= 0.0
            && eig_lower_margin >= 0.0
            && eig_upper_margin >= 0.0,
        tau: p.tau,
        eig_min,
        eig_max,
        tau_lower_margin,
        tau_upper_margin,
        eig_lower_margin,
        eig_upper_margin,
    }
}

// ---------------------------------------------------------------------------
// CSV traces
// ---------------------------------------------------------------------------

pub const TRACE_CSV_HEADER: &str = "iter,psnr_db,E_xk,grad_norm,step_norm,eta,wall_ms";

/// One row per iteration under the fixed header. Floats use Rust's shortest
/// round-trip formatting, so reading the file back reproduces the exact
/// values ("inf"/"NaN" included).
pub fn trace_to_csv(trace: &SolveTrace, path: &std::path::Path) -> Result<(), DiagError> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iter, r.psnr_db, r.e_xk, r.grad_norm, r.step_norm, r.eta, r.wall_ms
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Parse a trace CSV back into records (the inverse of `trace_to_csv`).
pub fn read_trace_csv(path: &std::path::Path) -> Result<Vec<IterRecord>, DiagError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| DiagError::Parse("empty file".into()))??;
    if header.trim() != TRACE_CSV_HEADER {
        return Err(DiagError::Parse(format!("unexpected header `{header}`")));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(DiagError::Parse(format!("row {}: expected 7 fields, got {}", i + 2, fields.len())));
        }
        let f = |j: usize| -> Result<f64, DiagError> {
            fields[j]
                .trim()
                .parse::<f64>()
                .map_err(|e| DiagError::Parse(format!("row {}: field {}: {e}", i + 2, j + 1)))
        };
        records.push(IterRecord {
            iter: fields[0]
                .trim()
                .parse::<usize>()
                .map_err(|e| DiagError::Parse(format!("row {}: iter: {e}", i + 2)))?,
            psnr_db: f(1)?,
            e_xk: f(2)?,
            grad_norm: f(3)?,
            step_norm: f(4)?,
            eta: f(5)?,
            wall_ms: f(6)?,
        });
    }
    Ok(records)
}
