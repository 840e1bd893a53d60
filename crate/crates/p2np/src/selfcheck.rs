//! Runtime invariant suite behind `p2np check`: fast spot checks of the
//! identities the library is built on, one pass/fail line per check.

use crate::denoise::{check_norm_equivariance, ConvDenoiser};
use crate::diag::lemma1_monitor;
use crate::image::ComplexImage;
use crate::mri::coils::{synth_sensitivity_maps, CoilSet};
use crate::mri::model::ForwardModel;
use crate::mri::trajectory::{
    acceleration_factor_radial, acceleration_factor_spiral, make_radial_trajectory,
};
use crate::operator::{
    adjoint_check, complex_gaussian_vec, materialize_hermitian, power_method, seeded_rng,
    uniform_unit, GramOperator, HermitianOperator,
};
use crate::precond::{
    binomial_coeffs, cheb2_coeffs, eta_norm_inv, poly_eval, zmshr1_update,
    PolynomialPreconditioner,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::io::Write;

type CheckFn = fn() -> Result<(), String>;

fn small_model() -> ForwardModel {
    let traj = make_radial_trajectory(9, 20, true);
    let coils = synth_sensitivity_maps(2, 10, 10);
    ForwardModel::new(traj, coils)
}

fn check_adjoint_identity() -> Result<(), String> {
    let model = small_model();
    let worst = adjoint_check(&model, 8, 11);
    if worst < 1e-12 {
        Ok(())
    } else {
        Err(format!("⟨Ax,y⟩ vs ⟨x,Aᴴy⟩ relative deviation {worst:.3e} ≥ 1e-12"))
    }
}

fn check_power_method_against_dense() -> Result<(), String> {
    let model = small_model();
    let gram = GramOperator::new(&model);
    let dense = materialize_hermitian(&gram, 1 << 20).map_err(|e| e.to_string())?;
    let exact = dense
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let est = power_method(&gram, 1e-12, 50_000, 3);
    if !est.converged {
        return Err("power iteration did not converge".to_string());
    }
    let rel = (est.lambda - exact).abs() / exact;
    if rel < 1e-8 {
        Ok(())
    } else {
        Err(format!("λ̂ = {:.12} vs dense {exact:.12} (rel {rel:.3e})", est.lambda))
    }
}

fn check_polynomial_identities() -> Result<(), String> {
    if binomial_coeffs(2) != vec![2.0, -1.0] {
        return Err(format!("second-order binomial coefficients {:?}", binomial_coeffs(2)));
    }
    let cheb = cheb2_coeffs();
    if cheb != vec![4.0, -10.0 / 3.0] {
        return Err(format!("cheb2 coefficients {cheb:?}"));
    }
    // At λmax·α = 1 the binomial polynomial has p(1)·1 = 1 ⇒ η = 1; cheb2's
    // grid minimum gives η = 1.5.
    let model = small_model();
    let gram = GramOperator::new(&model);
    let lambda = power_method(&gram, 1e-12, 50_000, 5).lambda;
    let alpha = 1.0 / lambda;
    let p_bin = PolynomialPreconditioner::new(binomial_coeffs(2), alpha, &gram);
    let eta_bin = eta_norm_inv(&p_bin, lambda).map_err(|e| e.to_string())?;
    if (eta_bin - 1.0).abs() > 1e-9 {
        return Err(format!("η(binomial Γ=2) = {eta_bin}, expected 1"));
    }
    let p_cheb = PolynomialPreconditioner::new(cheb2_coeffs(), alpha, &gram);
    let eta_cheb = eta_norm_inv(&p_cheb, lambda).map_err(|e| e.to_string())?;
    if (eta_cheb - 1.5).abs() > 1e-9 {
        return Err(format!("η(cheb2) = {eta_cheb}, expected 1.5"));
    }
    Ok(())
}

fn check_rank1_update_bounds() -> Result<(), String> {
    let (delta, theta1, theta2) = (1e-8, 2e-6, 200.0);
    let n = 16;
    let mut rng = seeded_rng(17);
    for trial in 0..50 {
        // Random well-conditioned quadratic: G = BᴴB + 0.1·I.
        let b = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(uniform_unit(&mut rng) - 0.5, uniform_unit(&mut rng) - 0.5)
        });
        let mut g = b.adjoint() * &b;
        for i in 0..n {
            g[(i, i)] += Complex64::new(0.1, 0.0);
        }
        let x_prev = complex_gaussian_vec(n, &mut rng);
        let x_cur = complex_gaussian_vec(n, &mut rng);
        let apply = |x: &[Complex64]| -> Vec<Complex64> {
            let v = nalgebra::DVector::from_column_slice(x);
            (&g * v).iter().copied().collect()
        };
        let p = zmshr1_update(
            &x_prev,
            &x_cur,
            &apply(&x_prev),
            &apply(&x_cur),
            delta,
            theta1,
            theta2,
        )
        .map_err(|e| format!("trial {trial}: {e}"))?;
        let report = lemma1_monitor(&p, delta, theta1, theta2);
        if !report.pass {
            return Err(format!(
                "trial {trial}: τ = {}, eig ∈ [{}, {}] outside bounds",
                report.tau, report.eig_min, report.eig_max
            ));
        }
    }
    Ok(())
}

fn check_conv_equivariance() -> Result<(), String> {
    let d = ConvDenoiser::new(0.6, 12, 12);
    let mut rng = seeded_rng(23);
    for trial in 0..20 {
        let x = ComplexImage::from_vec(12, 12, complex_gaussian_vec(144, &mut rng));
        let mu = 0.2 + 3.0 * uniform_unit(&mut rng);
        let delta = Complex64::new(uniform_unit(&mut rng) - 0.5, uniform_unit(&mut rng) - 0.5);
        let dev = check_norm_equivariance(&d, &x, mu, delta, 0.1);
        if dev >= 1e-12 {
            return Err(format!("trial {trial}: deviation {dev:.3e} ≥ 1e-12"));
        }
    }
    Ok(())
}

fn check_acceleration_factors() -> Result<(), String> {
    let spiral = acceleration_factor_spiral(256, 6);
    if !(127.0..=137.0).contains(&spiral) {
        return Err(format!("spiral factor {spiral} outside [127, 137]"));
    }
    let radial = acceleration_factor_radial(256, 21);
    if !(11.6..=12.8).contains(&radial) {
        return Err(format!("radial factor {radial} outside [11.6, 12.8]"));
    }
    Ok(())
}

fn check_gram_against_dense_oracle() -> Result<(), String> {
    let traj = make_radial_trajectory(6, 14, false);
    let model = ForwardModel::new(traj, CoilSet::uniform(8, 8));
    let gram = GramOperator::new(&model);
    let dense = materialize_hermitian(&gram, 1 << 20).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(29);
    let x = complex_gaussian_vec(64, &mut rng);
    let via_op = gram.apply(&x);
    let via_dense = &dense * nalgebra::DVector::from_column_slice(&x);
    let err: f64 = via_op
        .iter()
        .zip(via_dense.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if err < 1e-10 {
        Ok(())
    } else {
        Err(format!("gram application deviates from dense oracle by {err:.3e}"))
    }
}

fn check_polynomial_grid_positivity() -> Result<(), String> {
    // Both shipped recipes stay positive on [0, 1] — the η grid must agree.
    for (name, coeffs) in [("binomial:2", binomial_coeffs(2)), ("cheb2", cheb2_coeffs())] {
        let min = (0..=10_000)
            .map(|i| poly_eval(&coeffs, i as f64 / 10_000.0))
            .fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(format!("{name} polynomial dips to {min} on [0, 1]"));
        }
    }
    Ok(())
}

pub const CHECKS: [(&str, CheckFn); 7] = [
    ("adjoint-identity", check_adjoint_identity),
    ("power-method-vs-dense", check_power_method_against_dense),
    ("polynomial-identities", check_polynomial_identities),
    ("rank1-update-bounds", check_rank1_update_bounds),
    ("conv-equivariance", check_conv_equivariance),
    ("acceleration-factors", check_acceleration_factors),
    ("gram-vs-dense-oracle", check_gram_against_dense_oracle),
];

/// Runs every check, printing one line each; returns the failure count.
pub fn run_selfcheck(out: &mut dyn Write) -> usize {
    let mut failures = 0;
    let extra: [(&str, CheckFn); 1] = [("polynomial-grid-positivity", check_polynomial_grid_positivity)];
    for (name, f) in CHECKS.iter().chain(extra.iter()) {
        match f() {
            Ok(()) => {
                let _ = writeln!(out, "check {name:<28} ok");
            }
            Err(msg) => {
                failures += 1;
                let _ = writeln!(out, "check {name:<28} FAIL: {msg}");
            }
        }
    }
    failures
}
