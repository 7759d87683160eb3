//! Numerical laboratory for the one-dimensional stochastic Landau-Lifshitz-Gilbert
//! equation on a ferromagnetic needle.
//!
//! The crate is split along the physics:
//!
//! - [`grid`]: the interval, Neumann Laplacian, cosine basis and discrete norms.
//! - [`model`]: pointwise vector algebra of the equation (drift, noise channels,
//!   Stratonovich-to-Ito correction, energy).
//! - [`det`]: projected Heun integration of the deterministic and controlled
//!   (skeleton) flows, stability diagnostics and a spectral Galerkin cross-check.
//! - [`sde`]: Stratonovich Heun and Ito-corrected Euler schemes, Brownian drivers
//!   and reproducible ensembles.
//! - [`ldp`]: reversal-field construction, control costs, probability bounds and
//!   Monte-Carlo event estimation.
//! - [`cli`] and [`verify`]: configuration, output files and the self-check suite.

pub mod cli;
pub mod det;
pub mod error;
pub mod grid;
pub mod ldp;
pub mod model;
pub mod sde;
pub mod vec3;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Grid1D, MagnetizationField};
pub use vec3::Vec3;
