//! K-space sampling trajectories: golden-angle radial spokes, Archimedean
//! spirals, and randomly undersampled Cartesian phase-encode masks.
//!
//! Coordinates are in cycles/pixel, each component in [−0.5, 0.5). Sample
//! order is spoke-major for radial, interleave-major for spiral, and
//! line-major (ascending phase-encode line, `ix` fastest) for Cartesian.

use super::MriError;
use crate::operator::seeded_rng;
use rand_chacha::rand_core::RngCore;

/// Golden-angle increment for radial acquisitions, degrees.
pub const GOLDEN_ANGLE_DEG: f64 = 111.246117975;

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryKind {
    /// Undersampled Cartesian acquisition; `lines` are the kept phase-encode
    /// indices (ascending). `clamped` flags a request that exceeded `ny` and
    /// was reduced to full sampling.
    CartesianMask { nx: usize, ny: usize, lines: Vec<usize>, clamped: bool },
    Radial { n_spokes: usize, n_readout: usize, golden: bool },
    Spiral { n_interleaves: usize, n_readout: usize, n_turns: f64 },
}

impl TrajectoryKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryKind::CartesianMask { .. } => "cartesian-mask",
            TrajectoryKind::Radial { .. } => "radial",
            TrajectoryKind::Spiral { .. } => "spiral",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// (k_x, k_y) pairs, cycles/pixel, each in [−0.5, 0.5).
    pub samples: Vec<(f64, f64)>,
    pub kind: TrajectoryKind,
}

impl Trajectory {
    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// Nonempty, every coordinate in range, and radial spoke·readout
    /// bookkeeping consistent with the sample count.
    pub fn check_invariants(&self) -> bool {
        if self.samples.is_empty() {
            return false;
        }
        if !self.samples.iter().all(|&(kx, ky)| (-0.5..0.5).contains(&kx) && (-0.5..0.5).contains(&ky)) {
            return false;
        }
        match &self.kind {
            TrajectoryKind::Radial { n_spokes, n_readout, .. } => {
                n_spokes * n_readout == self.samples.len()
            }
            _ => true,
        }
    }
}

// Fold into [−0.5, 0.5); for integer pixel grids a full-cycle shift is an
// exact alias, so this never changes the operator the trajectory induces.
fn wrap_half(v: f64) -> f64 {
    let mut w = v - v.round();
    if w < -0.5 {
        w += 1.0;
    }
    if w >= 0.5 {
        w -= 1.0;
    }
    w
}

/// Radial spokes through the k-space origin. Spoke j sits at angle
/// j·111.246117975° (golden) or j·180°/n_spokes (uniform); readout points are
/// equispaced along the diameter, r ∈ {−0.5 + i/n_readout}.
pub fn make_radial_trajectory(n_spokes: usize, n_readout: usize, golden_angle: bool) -> Trajectory {
    assert!(n_spokes >= 1, "need at least one spoke");
    assert!(n_readout >= 2, "need at least two readout points");
    let dtheta = if golden_angle {
        GOLDEN_ANGLE_DEG.to_radians()
    } else {
        std::f64::consts::PI / n_spokes as f64
    };
    let mut samples = Vec::with_capacity(n_spokes * n_readout);
    for j in 0..n_spokes {
        let theta = dtheta * j as f64;
        let (sin_t, cos_t) = theta.sin_cos();
        for i in 0..n_readout {
            let r = -0.5 + i as f64 / n_readout as f64;
            samples.push((wrap_half(r * cos_t), wrap_half(r * sin_t)));
        }
    }
    Trajectory {
        samples,
        kind: TrajectoryKind::Radial { n_spokes, n_readout, golden: golden_angle },
    }
}

/// Archimedean spiral interleaves: r(t) = 0.5·t, θ(t) = 2π·n_turns·t for
/// t ∈ [0, 1), interleave l rotated by 2πl/n_interleaves. The turn count
/// n_turns = grid_size/(2·n_interleaves) puts adjacent arms one Nyquist cell
/// (n_interleaves/(π·grid_size) cycles/pixel) apart at full radius.
pub fn make_spiral_trajectory(n_interleaves: usize, n_readout: usize, grid_size: usize) -> Trajectory {
    assert!(n_interleaves >= 1, "need at least one interleave");
    assert!(n_readout >= 2, "need at least two readout points");
    assert!(grid_size >= 1, "grid size must be positive");
    let n_turns = grid_size as f64 / (2.0 * n_interleaves as f64);
    let mut samples = Vec::with_capacity(n_interleaves * n_readout);
    for l in 0..n_interleaves {
        let phase = std::f64::consts::TAU * l as f64 / n_interleaves as f64;
        for i in 0..n_readout {
            let t = i as f64 / n_readout as f64;
            let r = 0.5 * t;
            let theta = std::f64::consts::TAU * n_turns * t + phase;
            let (sin_t, cos_t) = theta.sin_cos();
            samples.push((wrap_half(r * cos_t), wrap_half(r * sin_t)));
        }
    }
    Trajectory { samples, kind: TrajectoryKind::Spiral { n_interleaves, n_readout, n_turns } }
}

/// Random phase-encode undersampling: a fully sampled center band of
/// ⌈center_fraction·n_y⌉ lines plus uniformly random others, keeping
/// max(center, round(n_y/accel)) lines in total. Deterministic per seed.
/// A request above n_y is clamped to full sampling and flagged.
pub fn make_cartesian_mask(
    n_x: usize,
    n_y: usize,
    accel: f64,
    center_fraction: f64,
    seed: u64,
) -> Trajectory {
    assert!(n_x >= 1 && n_y >= 1, "grid must be nonempty");
    assert!(accel >= 1.0, "acceleration factor must be at least 1");
    assert!((0.0..=1.0).contains(&center_fraction), "center fraction must lie in [0, 1]");

    let n_center = (center_fraction * n_y as f64).ceil() as usize;
    let target = ((n_y as f64 / accel).round() as usize).max(1);
    let requested = n_center.max(target);
    let (n_keep, clamped) = if requested > n_y { (n_y, true) } else { (requested, false) };

    let center_start = (n_y - n_center) / 2;
    let center: Vec<usize> = (center_start..center_start + n_center).collect();

    let mut lines = center.clone();
    let mut candidates: Vec<usize> = (0..n_y).filter(|l| !center.contains(l)).collect();
    let mut rng = seeded_rng(seed);
    let n_random = n_keep - n_center.min(n_keep);
    for i in 0..n_random {
        // Partial Fisher-Yates; modulo bias is immaterial for mask synthesis.
        let j = i + (rng.next_u64() as usize) % (candidates.len() - i);
        candidates.swap(i, j);
        lines.push(candidates[i]);
    }
    lines.sort_unstable();

    let mut samples = Vec::with_capacity(lines.len() * n_x);
    for &line in &lines {
        let ky = (line as f64 - (n_y / 2) as f64) / n_y as f64;
        for ix in 0..n_x {
            let kx = (ix as f64 - (n_x / 2) as f64) / n_x as f64;
            samples.push((kx, ky));
        }
    }
    Trajectory { samples, kind: TrajectoryKind::CartesianMask { nx: n_x, ny: n_y, lines, clamped } }
}

/// Ramp density-compensation weights for a radial trajectory: |k| per sample,
/// the DC sample getting the half-cell weight 1/(2·n_readout), normalized to
/// sum 1.
pub fn radial_density_weights(traj: &Trajectory) -> Result<Vec<f64>, MriError> {
    let n_readout = match traj.kind {
        TrajectoryKind::Radial { n_readout, .. } => n_readout,
        ref other => {
            return Err(MriError::UnsupportedTrajectoryKind { expected: "radial", got: other.name() })
        }
    };
    let mut w: Vec<f64> = traj
        .samples
        .iter()
        .map(|&(kx, ky)| {
            let r = kx.hypot(ky);
            if r == 0.0 {
                1.0 / (2.0 * n_readout as f64)
            } else {
                r
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Radial acceleration factor: fully sampled spoke count over acquired.
pub fn acceleration_factor_radial(n_full: usize, n_acquired: usize) -> f64 {
    assert!(n_full > 0 && n_acquired > 0, "spoke counts must be positive");
    n_full as f64 / n_acquired as f64
}

/// Spiral acceleration factor: π·matrix_size over interleave count.
pub fn acceleration_factor_spiral(matrix_size: usize, n_interleaves: usize) -> f64 {
    assert!(matrix_size > 0 && n_interleaves > 0, "sizes must be positive");
    std::f64::consts::PI * matrix_size as f64 / n_interleaves as f64
}
