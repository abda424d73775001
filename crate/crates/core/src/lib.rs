//! Numerical perturbation theory for non-densely defined generators.
//!
//! The crate realizes integrated semigroups, the diamond convolution and its
//! Dyson-Phillips series, resolvent diagnostics and growth-bound transfer
//! rules in finite dimension, and applies them to the linear age-structured
//! population model
//!
//! ```text
//! (d/dt + d/da) u(t,a) = A(a) u(t,a),   u(t,0) = ∫_0^c C(a) u(t,a) da,   u(0,·) = u0
//! ```
//!
//! posed on `L^p((0,c), R^n)`.
//!
//! Module map:
//! - [`semigroup`]: matrix semigroups, evolution families, the Howland
//!   semigroup, integrated semigroups and their Laplace transforms.
//! - [`dyson`]: the diamond convolution, Dyson-Phillips terms, the perturbed
//!   semigroup fixed point and convolution-bound estimators.
//! - [`spectral`]: resolvents and resolvent scans, characteristic roots,
//!   growth fitting, subconvolutive certificates and transfer reports.
//! - [`age`]: the age-structured model itself (renewal solver, upwind
//!   oracle, flux kernel, resolvent powers, stability report).

pub mod age;
pub mod dyson;
mod error;
pub mod grid;
pub mod linalg;
pub mod quadrature;
pub mod semigroup;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use linalg::{CMat, LinearMap};
pub use nalgebra::Complex;

/// Complex scalar used for resolvent evaluation.
pub type C64 = Complex<f64>;
