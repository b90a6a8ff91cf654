//! Constructive zero sets and interpolation for Hilbert spaces of Dirichlet series.
//!
//! Given a finite sequence `S` in the half-plane `Re s > 1/2`, the crate
//! builds a Dirichlet polynomial in `H^2` (square-summable coefficients) or
//! in `D_alpha` (coefficients weighted by `d(n)^alpha`) that vanishes on `S`,
//! or that takes prescribed values there, by iterating a smooth-cutoff /
//! d-bar correction operator until it contracts. Every run produces a
//! certificate of norms, residuals and contraction ratios.
//!
//! Modules, bottom up:
//!
//! * [`dirichlet`]: polynomials, `H^2`/`D_alpha` norms, divisor arithmetic.
//! * [`geometry`]: Blaschke products and zero-set criteria on `Re s > 1/2`.
//! * [`laplace`]: Laplace densities and their discretisation into coefficients.
//! * [`dbar`]: smooth cutoff and the Cauchy-transform d-bar solver.
//! * [`contraction`]: the correction operator and the construction loops.
//! * [`embedding`]: exact `H^p` norms for even `p` and embedding checks.
//! * [`verifier`]: argument-principle zero counting and zero scans.

pub mod contraction;
pub mod dbar;
pub mod dirichlet;
pub mod embedding;
pub mod error;
pub mod geometry;
pub mod laplace;
pub mod sum;
pub mod verifier;

pub use error::{Error, Result};
pub use num_complex::Complex64;
