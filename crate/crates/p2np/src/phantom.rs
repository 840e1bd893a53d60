//! Synthetic ground-truth images.
//!
//! Pixel (ix, iy) is evaluated at the physical point
//! X = −1 + 2(ix+½)/n, Y = −1 + 2(iy+½)/n ∈ (−1, 1); after evaluation the
//! image is rescaled so its maximum magnitude is exactly 1.

use crate::image::ComplexImage;
use crate::operator::{seeded_rng, uniform_unit};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("unknown phantom kind `{0}` (expected shepp-logan or blobs)")]
    UnknownKind(String),
    #[error("unknown phase option `{0}` (expected none or smooth)")]
    UnknownPhase(String),
    #[error("phantom size {0} is too small (need ≥ 8)")]
    TooSmall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    SheppLogan,
    Blobs,
}

impl std::str::FromStr for PhantomKind {
    type Err = PhantomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shepp-logan" => Ok(PhantomKind::SheppLogan),
            "blobs" => Ok(PhantomKind::Blobs),
            other => Err(PhantomError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomPhase {
    None,
    Smooth,
}

impl std::str::FromStr for PhantomPhase {
    type Err = PhantomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(PhantomPhase::None),
            "smooth" => Ok(PhantomPhase::Smooth),
            other => Err(PhantomError::UnknownPhase(other.to_string())),
        }
    }
}

/// (x0, y0, x-semiaxis, y-semiaxis, rotation degrees, additive intensity) —
/// the classical ten-ellipse head phantom table.
pub const SHEPP_LOGAN_ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (0.0, 0.0, 0.69, 0.92, 0.0, 2.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.02),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.02),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.01),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.01),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.01),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.01),
    (0.0, -0.605, 0.023, 0.023, 0.0, 0.01),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.01),
];

/// Sum of ellipse intensities covering the physical point (x, y).
pub fn shepp_logan_value(x: f64, y: f64) -> f64 {
    let mut v = 0.0;
    for &(x0, y0, a, b, theta_deg, intensity) in &SHEPP_LOGAN_ELLIPSES {
        let t = theta_deg.to_radians();
        let (dx, dy) = (x - x0, y - y0);
        let u = dx * t.cos() + dy * t.sin();
        let w = -dx * t.sin() + dy * t.cos();
        if u * u / (a * a) + w * w / (b * b) <= 1.0 {
            v += intensity;
        }
    }
    v
}

fn blobs_value(x: f64, y: f64, blobs: &[(f64, f64, f64, f64)]) -> f64 {
    blobs
        .iter()
        .map(|&(cx, cy, r, w)| {
            let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            w * (-d2 / (2.0 * r * r)).exp()
        })
        .sum()
}

fn pixel_coord(i: usize, n: usize) -> f64 {
    -1.0 + 2.0 * (i as f64 + 0.5) / n as f64
}

/// Ground-truth image of the given size, max magnitude exactly 1. The seed
/// feeds only the `blobs` kind; `shepp-logan` is deterministic.
pub fn make_phantom(
    size: usize,
    kind: PhantomKind,
    phase: PhantomPhase,
    seed: u64,
) -> Result<ComplexImage, PhantomError> {
    if size < 8 {
        return Err(PhantomError::TooSmall(size));
    }
    let blobs: Vec<(f64, f64, f64, f64)> = match kind {
        PhantomKind::SheppLogan => Vec::new(),
        PhantomKind::Blobs => {
            let mut rng = seeded_rng(seed);
            (0..6)
                .map(|_| {
                    let cx = -0.7 + 1.4 * uniform_unit(&mut rng);
                    let cy = -0.7 + 1.4 * uniform_unit(&mut rng);
                    let r = 0.08 + 0.22 * uniform_unit(&mut rng);
                    let w = 0.3 + 0.7 * uniform_unit(&mut rng);
                    (cx, cy, r, w)
                })
                .collect()
        }
    };

    let mut data = Vec::with_capacity(size * size);
    for iy in 0..size {
        let y = pixel_coord(iy, size);
        for ix in 0..size {
            let x = pixel_coord(ix, size);
            let mag = match kind {
                PhantomKind::SheppLogan => shepp_logan_value(x, y),
                PhantomKind::Blobs => blobs_value(x, y, &blobs),
            };
            let z = match phase {
                PhantomPhase::None => Complex64::new(mag, 0.0),
                PhantomPhase::Smooth => {
                    // Smooth quadratic phase ramp; magnitude untouched.
                    let phi = std::f64::consts::FRAC_PI_2 * (x * x + 0.5 * y * y);
                    Complex64::from_polar(mag, phi)
                }
            };
            data.push(z);
        }
    }
    let peak = data.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if peak > 0.0 {
        for z in &mut data {
            *z /= peak;
        }
    }
    Ok(ComplexImage::from_vec(size, size, data))
}
