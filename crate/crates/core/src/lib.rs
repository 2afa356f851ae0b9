//! Offline/online reduced-order modeling of coupled diffusion and
//! deformation in hydrogels.
//!
//! The full-order model is a Taylor–Hood discretization of normalized,
//! linearized chemoelasticity. Snapshots over sampled material parameters
//! feed POD or nested-POD bases, and Galerkin projection of the affine
//! operator blocks gives a reduced model cheap enough for parameter
//! identification and Monte Carlo propagation.

pub mod analysis;
pub mod calibration;
pub mod config;
pub mod element;
pub mod error;
pub mod fom;
pub mod io;
pub mod mesh;
pub mod pipeline;
pub mod pod;
pub mod quadrature;
pub mod rom;
pub mod sparse;
pub mod uq;

pub use error::{Error, Result};
