//! Tomographic reconstruction of the initial state of a 2D wave field from
//! light-ray integrals over the evolved space-time field.
//!
//! The forward model is `A = H S`: `S` runs a leapfrog finite-difference
//! solve of the wave equation from an initial image, and `H` integrates the
//! resulting space-time field along null rays joining a source plane at
//! `t = 0` to a detector plane at `t = t_final`. Solvers in [`solvers`]
//! invert `A` from full or partial detector data, and [`analysis`] provides
//! spectral and visibility diagnostics.

pub mod analysis;
pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod model;
pub mod operator;
pub mod raytrace;
pub mod solvers;
pub mod wave;

pub use error::{Error, Result};
pub use grid::{GridSpec, Image, SpaceTimeField};
pub use model::ForwardModel;
pub use operator::LinearOperator;
pub use raytrace::{DetectorMask, Ray, RaySystem};
pub use wave::WavePropagator;
