//! Numerical verification toolkit for the Hartogs triangle
//! `T = {(z, w) ∈ C² : |z| < |w| < 1}`.
//!
//! Modules:
//! - [`numerics`]: polar points, quadrature over `T`, seeded sampling.
//! - [`geometry`]: boundary distances and the explicit curves showing that
//!   `T` and the cone `T_∞ = {|z| < |w|}` are uniform domains.
//! - [`boundary`]: surface measure of boundary balls (Ahlfors–David scans).
//! - [`bergman`]: the Laurent basis `(z/w)^j w^k` of the Bergman space.
//! - [`dbar`]: the `u_δ` approximation family and the radial cutoff `χ_δ`.
//! - [`spectral`]: the Neumann problem on functions, mode by mode.
//! - [`cli`]: reproducible verification campaigns and their reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bergman;
pub mod boundary;
pub mod cli;
pub mod dbar;
pub mod error;
pub mod exec;
pub mod geometry;
mod linalg;
pub mod numerics;
pub mod spectral;

pub use error::{Error, Result};
pub use numerics::{PolarPoint, QuadratureSpec};
