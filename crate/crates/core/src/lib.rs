//! Weighted fractional Sobolev spaces of radial functions.
//!
//! The crate covers three layers:
//!
//! * [`exponents`]: closed-form admissibility calculus for the embedding
//!   `H^s_{V,rad} ↪ L^{q1}_K + L^{q2}_K` and the classification of standard
//!   potential families.
//! * [`spaces`] and [`fraclap`]: a Galerkin discretization of radial functions
//!   on a geometric grid, with the Gagliardo seminorm, weighted norms and the
//!   fractional Laplacian in real-space and Fourier-side form.
//! * [`verify`] and [`solve`]: numerical checks of the embedding inequalities
//!   and a mountain-pass solver for `(-Δ)^s u + V u = K f(u)`.

pub mod error;
pub mod exponents;
pub mod fraclap;
pub mod grid;
pub mod kernel;
pub mod potentials;
pub mod quad;
pub mod report;
pub mod solve;
pub mod spaces;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
pub use exponents::{EmbeddingReport, SpaceParams, WeightExponents};
pub use grid::{Extrapolation, RadialFunction, RadialGrid};
pub use potentials::PotentialFamily;
