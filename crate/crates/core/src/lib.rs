//! Numerical laboratory for weighted Bergman spaces on model pseudoconvex domains.
//!
//! The crate is organised bottom-up:
//!
//! - [`domains`]: defining functions, complex Hessians, Levi-form boundary
//!   classification and the Forelli–Rudin inflation `Ω^p_r`.
//! - [`quadrature`]: weighted measures `(-ρ)^r dV`, closed-form monomial moments on
//!   Reinhardt domains, quadrature rules and Monte Carlo volume estimates.
//! - [`bergman`]: truncated orthonormal bases, weighted Bergman kernels, normalized
//!   kernels, projections and kernel identity checks.
//! - [`symbol`]: a small expression language for continuous symbols.
//! - [`operators`]: truncated Toeplitz and Hankel operators, product
//!   decompositions, Berezin transforms and compactness diagnostics.
//!
//! Volume is Lebesgue measure on `C^n ≅ R^{2n}` throughout.

pub mod bergman;
pub mod domains;
mod error;
pub mod gauss;
pub mod multiindex;
pub mod operators;
pub mod quadrature;
pub mod special;
pub mod symbol;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Crate version, recorded in experiment reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
