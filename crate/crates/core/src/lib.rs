//! Spectral experiments for the restricted Dirichlet fractional Laplacian
//! `(-Δ)^s` and the fractional Helmholtz operator `((-Δ) + κ²)^s` on
//! intervals, straight and locally enlarged tubes, and multi-tubes.
//!
//! Everything lives on uniform grids inside a padded periodic box. The
//! operators act through the FFT of the zero-extended function, which gives
//! an exact Galerkin form of the restricted operator up to box
//! periodization.

pub mod acceptance;
mod boxfft;
pub mod crosssection;
pub mod csextension;
pub mod eigensolve;
pub mod error;
pub mod extrapolate;
pub mod fracop;
pub mod grid;
pub mod report;
pub mod waveguide;
pub mod weyl;

pub use eigensolve::{rayleigh, smallest_eigs, EigenResult};
pub use error::{Error, Result};
pub use fracop::{FracOperator, SpectralParams};
pub use grid::{make_mask, DomainMask, Geometry, Grid, GridFunction};
