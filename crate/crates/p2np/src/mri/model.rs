//! The multicoil measurement operator A = [M F C_1; …; M F C_L].
//!
//! F is the exact non-uniform DFT at the trajectory samples, evaluated by
//! explicit summation with precomputed separable phase tables:
//!
//!   (F w)_m = N^{-1/2} Σ_p e^{−2πi(k_x,m·p_x + k_y,m·p_y)} w(p),
//!
//! with centered integer pixel coordinates p_x = ix − nx/2, p_y = iy − ny/2.
//! The adjoint conjugates the phases. Both carry 1/√N, so the fully sampled
//! Cartesian single-coil model is unitary. Output is coil-major: block l
//! holds the M samples of coil l.

use super::coils::CoilSet;
use super::trajectory::Trajectory;
use super::MriError;
use crate::image::ComplexImage;
use crate::operator::{complex_gaussian_vec, seeded_rng, LinearOperator};
use num_complex::Complex64;
use std::sync::OnceLock;

pub struct ForwardModel {
    traj: Trajectory,
    coils: CoilSet,
    nx: usize,
    ny: usize,
    /// 1/√N applied on both forward and adjoint.
    norm: f64,
    // Forward tables, sample-major: e^{−2πi·k·p} per axis.
    row_phase: Vec<Complex64>, // [m·nx + ix]
    col_phase: Vec<Complex64>, // [m·ny + iy]
    // Adjoint tables, pixel-major transposes of the conjugates.
    row_adj: Vec<Complex64>, // [ix·M + m]
    col_adj: Vec<Complex64>, // [iy·M + m]
    lambda_cache: OnceLock<f64>,
}

impl ForwardModel {
    pub fn new(traj: Trajectory, coils: CoilSet) -> Self {
        assert!(!traj.samples.is_empty(), "trajectory must be nonempty");
        let (nx, ny) = coils.shape();
        let n = nx * ny;
        let m_count = traj.samples.len();
        let norm = 1.0 / (n as f64).sqrt();

        let mut row_phase = Vec::with_capacity(m_count * nx);
        let mut col_phase = Vec::with_capacity(m_count * ny);
        for &(kx, ky) in &traj.samples {
            for ix in 0..nx {
                let px = ix as f64 - (nx / 2) as f64;
                row_phase.push(Complex64::from_polar(1.0, -std::f64::consts::TAU * kx * px));
            }
            for iy in 0..ny {
                let py = iy as f64 - (ny / 2) as f64;
                col_phase.push(Complex64::from_polar(1.0, -std::f64::consts::TAU * ky * py));
            }
        }
        let mut row_adj = vec![Complex64::ZERO; m_count * nx];
        for m in 0..m_count {
            for ix in 0..nx {
                row_adj[ix * m_count + m] = row_phase[m * nx + ix].conj();
            }
        }
        let mut col_adj = vec![Complex64::ZERO; m_count * ny];
        for m in 0..m_count {
            for iy in 0..ny {
                col_adj[iy * m_count + m] = col_phase[m * ny + iy].conj();
            }
        }
        Self { traj, coils, nx, ny, norm, row_phase, col_phase, row_adj, col_adj, lambda_cache: OnceLock::new() }
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn n_pixels(&self) -> usize {
        self.nx * self.ny
    }

    /// Samples per coil (one trajectory pass).
    pub fn n_samples_per_coil(&self) -> usize {
        self.traj.samples.len()
    }

    pub fn n_coils(&self) -> usize {
        self.coils.n_coils()
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn coil_set(&self) -> &CoilSet {
        &self.coils
    }

    // One coil block of the non-uniform DFT, out[m] = N^{-1/2}·Σ_p phase·w(p).
    fn nudft_forward(&self, w: &[Complex64], out: &mut [Complex64]) {
        let (nx, ny) = (self.nx, self.ny);
        for (m, o) in out.iter_mut().enumerate() {
            let rp = &self.row_phase[m * nx..(m + 1) * nx];
            let cp = &self.col_phase[m * ny..(m + 1) * ny];
            let mut acc = Complex64::ZERO;
            for iy in 0..ny {
                let row = &w[iy * nx..(iy + 1) * nx];
                let mut s = Complex64::ZERO;
                for ix in 0..nx {
                    s += rp[ix] * row[ix];
                }
                acc += cp[iy] * s;
            }
            *o = acc * self.norm;
        }
    }

    // Adjoint of one coil block, z(p) = N^{-1/2}·Σ_m conj(phase)·y_m.
    fn nudft_adjoint(&self, y: &[Complex64], z: &mut [Complex64]) {
        let (nx, ny) = (self.nx, self.ny);
        let m_count = y.len();
        let mut t = vec![Complex64::ZERO; m_count];
        for iy in 0..ny {
            let cp = &self.col_adj[iy * m_count..(iy + 1) * m_count];
            for m in 0..m_count {
                t[m] = cp[m] * y[m];
            }
            for ix in 0..nx {
                let rp = &self.row_adj[ix * m_count..(ix + 1) * m_count];
                let mut s = Complex64::ZERO;
                for m in 0..m_count {
                    s += rp[m] * t[m];
                }
                z[iy * nx + ix] = s * self.norm;
            }
        }
    }

    fn forward_unchecked(&self, x: &[Complex64]) -> Vec<Complex64> {
        let m_count = self.n_samples_per_coil();
        let mut y = vec![Complex64::ZERO; m_count * self.n_coils()];
        let mut w = vec![Complex64::ZERO; x.len()];
        for (l, map) in self.coils.maps().iter().enumerate() {
            for (wp, (cp, xp)) in w.iter_mut().zip(map.data.iter().zip(x)) {
                *wp = cp * xp;
            }
            self.nudft_forward(&w, &mut y[l * m_count..(l + 1) * m_count]);
        }
        y
    }

    fn adjoint_unchecked(&self, y: &[Complex64]) -> Vec<Complex64> {
        let m_count = self.n_samples_per_coil();
        let n = self.n_pixels();
        let mut x = vec![Complex64::ZERO; n];
        let mut z = vec![Complex64::ZERO; n];
        for (l, map) in self.coils.maps().iter().enumerate() {
            self.nudft_adjoint(&y[l * m_count..(l + 1) * m_count], &mut z);
            for (xp, (cp, zp)) in x.iter_mut().zip(map.data.iter().zip(&z)) {
                *xp += cp.conj() * zp;
            }
        }
        x
    }

    /// A x for an image on this model's grid.
    pub fn forward_image(&self, x: &ComplexImage) -> Result<Vec<Complex64>, MriError> {
        if x.shape() != (self.nx, self.ny) {
            return Err(MriError::ShapeMismatch { expected: self.n_pixels(), got: x.len() });
        }
        Ok(self.forward_unchecked(&x.data))
    }

    /// Aᴴ y as an image on this model's grid.
    pub fn adjoint_image(&self, y: &[Complex64]) -> Result<ComplexImage, MriError> {
        let expected = self.n_samples_per_coil() * self.n_coils();
        if y.len() != expected {
            return Err(MriError::ShapeMismatch { expected, got: y.len() });
        }
        Ok(ComplexImage::from_vec(self.nx, self.ny, self.adjoint_unchecked(y)))
    }

    /// Density-compensated gridding reconstruction: Aᴴ(w ⊙ y) per coil block
    /// (weights broadcast across coils), rescaled by the per-coil sample
    /// count so that uniform weights on full Cartesian sampling invert A.
    pub fn density_compensated_adjoint(
        &self,
        y: &[Complex64],
        weights: &[f64],
    ) -> Result<ComplexImage, MriError> {
        let m_count = self.n_samples_per_coil();
        if weights.len() != m_count {
            return Err(MriError::ShapeMismatch { expected: m_count, got: weights.len() });
        }
        let expected = m_count * self.n_coils();
        if y.len() != expected {
            return Err(MriError::ShapeMismatch { expected, got: y.len() });
        }
        let weighted: Vec<Complex64> = y
            .iter()
            .enumerate()
            .map(|(i, &v)| v * weights[i % m_count])
            .collect();
        let img = ComplexImage::from_vec(self.nx, self.ny, self.adjoint_unchecked(&weighted));
        Ok(img.scale(Complex64::new(m_count as f64, 0.0)))
    }
}

impl LinearOperator for ForwardModel {
    fn domain_dim(&self) -> usize {
        self.n_pixels()
    }

    fn range_dim(&self) -> usize {
        self.n_samples_per_coil() * self.n_coils()
    }

    fn domain_shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.domain_dim(), "operator domain mismatch");
        self.forward_unchecked(x)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.range_dim(), "operator range mismatch");
        self.adjoint_unchecked(y)
    }

    fn lambda_max_cache(&self) -> Option<&OnceLock<f64>> {
        Some(&self.lambda_cache)
    }
}

/// y + n with n complex Gaussian, per-component variance `variance`/2
/// (total per-sample variance `variance`); deterministic per seed.
pub fn add_noise(y: &[Complex64], variance: f64, seed: u64) -> Vec<Complex64> {
    assert!(variance >= 0.0, "variance must be nonnegative");
    let scale = (variance / 2.0).sqrt();
    let mut rng = seeded_rng(seed);
    let noise = complex_gaussian_vec(y.len(), &mut rng);
    y.iter().zip(noise).map(|(v, n)| v + n * scale).collect()
}
