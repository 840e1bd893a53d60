//! Synthetic receive-coil sensitivity maps.
//!
//! Maps are smooth Gaussian bumps at equispaced angles around the field of
//! view, normalized pixelwise so Σ_l |C_l(p)|² = 1 — the property that makes
//! the fully sampled multicoil gram operator the identity.

use super::MriError;
use crate::image::ComplexImage;
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct CoilSet {
    maps: Vec<ComplexImage>,
}

impl CoilSet {
    /// Validates nonemptiness, uniform shape, and Σ_l |C_l|² = 1 to 1e-10.
    pub fn new(maps: Vec<ComplexImage>) -> Result<Self, MriError> {
        if maps.is_empty() {
            return Err(MriError::BadCoilSet);
        }
        let shape = maps[0].shape();
        if maps.iter().any(|m| m.shape() != shape) {
            return Err(MriError::BadCoilSet);
        }
        for p in 0..maps[0].len() {
            let total: f64 = maps.iter().map(|m| m.data[p].norm_sqr()).sum();
            let residual = (total - 1.0).abs();
            if residual > 1e-10 {
                return Err(MriError::NormalizationViolated { pixel: p, residual });
            }
        }
        Ok(Self { maps })
    }

    /// Single uniform coil of unit sensitivity.
    pub fn uniform(nx: usize, ny: usize) -> Self {
        let mut map = ComplexImage::zeros(nx, ny);
        map.data.fill(Complex64::ONE);
        Self { maps: vec![map] }
    }

    pub fn n_coils(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[ComplexImage] {
        &self.maps
    }

    pub fn shape(&self) -> (usize, usize) {
        self.maps[0].shape()
    }
}

/// Pre-normalization profile of coil `l` of `n_coils` at pixel (ix, iy):
/// a Gaussian bump of width 0.45·min(nx,ny) centered at radius
/// 0.3·min(nx,ny) along the angle 2πl/L, carrying the constant coil phase
/// e^{i·2πl/L}. This closed form is the definition the synthesized maps are
/// checked against.
pub fn sensitivity_bump(
    l: usize,
    n_coils: usize,
    nx: usize,
    ny: usize,
    ix: usize,
    iy: usize,
) -> Complex64 {
    let ang = std::f64::consts::TAU * l as f64 / n_coils as f64;
    let m = nx.min(ny) as f64;
    let (cx, cy) = (0.3 * m * ang.cos(), 0.3 * m * ang.sin());
    let s = 0.45 * m;
    let px = ix as f64 - (nx / 2) as f64;
    let py = iy as f64 - (ny / 2) as f64;
    let d2 = (px - cx).powi(2) + (py - cy).powi(2);
    Complex64::from_polar((-d2 / (2.0 * s * s)).exp(), ang)
}

/// L smooth complex coil profiles, pixelwise normalized to Σ|C_l|² = 1.
/// One coil normalizes to the constant unit map.
pub fn synth_sensitivity_maps(n_coils: usize, nx: usize, ny: usize) -> CoilSet {
    assert!(n_coils >= 1, "need at least one coil");
    let mut maps: Vec<ComplexImage> = (0..n_coils)
        .map(|l| {
            let mut img = ComplexImage::zeros(nx, ny);
            for iy in 0..ny {
                for ix in 0..nx {
                    img.data[iy * nx + ix] = sensitivity_bump(l, n_coils, nx, ny, ix, iy);
                }
            }
            img
        })
        .collect();
    for p in 0..nx * ny {
        let denom = maps.iter().map(|m| m.data[p].norm_sqr()).sum::<f64>().sqrt();
        for m in &mut maps {
            m.data[p] /= denom;
        }
    }
    CoilSet::new(maps).expect("normalization holds by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_coil_normalizes_to_the_unit_map() {
        let set = synth_sensitivity_maps(1, 8, 6);
        for z in &set.maps()[0].data {
            assert!((z - Complex64::ONE).norm() < 1e-12, "entry {z}");
        }
    }

    #[test]
    fn normalization_residual_is_tiny() {
        let set = synth_sensitivity_maps(4, 32, 32);
        let mut worst: f64 = 0.0;
        for p in 0..32 * 32 {
            let total: f64 = set.maps().iter().map(|m| m.data[p].norm_sqr()).sum();
            worst = worst.max((total - 1.0).abs());
        }
        assert!(worst < 1e-12, "residual {worst}");
    }

    #[test]
    fn maps_follow_the_bump_closed_form() {
        let (nx, ny, n_coils) = (16, 12, 4);
        let set = synth_sensitivity_maps(n_coils, nx, ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let denom = (0..n_coils)
                    .map(|l| sensitivity_bump(l, n_coils, nx, ny, ix, iy).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                for l in 0..n_coils {
                    let want = sensitivity_bump(l, n_coils, nx, ny, ix, iy) / denom;
                    let got = set.maps()[l].data[iy * nx + ix];
                    assert!((got - want).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn unnormalized_maps_are_rejected() {
        let mut map = ComplexImage::zeros(4, 4);
        map.data.fill(Complex64::new(2.0, 0.0));
        let err = CoilSet::new(vec![map]).unwrap_err();
        assert!(matches!(err, MriError::NormalizationViolated { .. }));
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let a = ComplexImage::zeros(4, 4);
        let b = ComplexImage::zeros(4, 5);
        assert!(matches!(CoilSet::new(vec![a, b]), Err(MriError::BadCoilSet)));
        assert!(matches!(CoilSet::new(vec![]), Err(MriError::BadCoilSet)));
    }

    #[test]
    fn uniform_coil_is_all_ones() {
        let set = CoilSet::uniform(3, 2);
        assert_eq!(set.n_coils(), 1);
        assert!(set.maps()[0].data.iter().all(|&z| z == Complex64::ONE));
    }
}
