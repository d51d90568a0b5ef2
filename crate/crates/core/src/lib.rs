//! Quasi-periodic complex finite-gap Toda coefficients and the arc spectrum
//! of the associated non-self-adjoint Jacobi operators.
//!
//! The pipeline runs curve -> periods -> theta -> finitegap -> toda ->
//! spectrum. Every stage is a pure function of immutable inputs.

pub mod config;
pub mod curve;
pub mod error;
pub mod finitegap;
pub mod io;
pub mod periods;
pub mod poly;
pub mod quad;
pub mod spectrum;
pub mod theta;
pub mod toda;

pub use num_complex::Complex64 as C64;

/// The imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);

/// Shorthand constructor.
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
