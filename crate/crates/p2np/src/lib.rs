//! Iterative image reconstruction for non-Cartesian MRI with polynomial and
//! quasi-Newton preconditioned plug-and-play solvers.
//!
//! Crate-wide conventions:
//! - Complex scalars are `num_complex::Complex64`.
//! - Inner products are conjugate-linear in the first argument:
//!   ⟨a, b⟩ = Σᵢ conj(aᵢ)·bᵢ.
//! - Images are flat row-major vectors (`ix` fastest) with an `(nx, ny)` grid
//!   shape carried alongside; see [`image::ComplexImage`].
//! - All randomness is driven by explicitly seeded ChaCha streams so that any
//!   run is reproducible bit for bit.

pub mod config;
pub mod denoise;
pub mod diag;
pub mod experiment;
pub mod image;
pub mod mri;
pub mod operator;
pub mod pgm;
pub mod phantom;
pub mod precond;
pub mod selfcheck;
pub mod solve;
