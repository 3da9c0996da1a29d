//! Radial numerical laboratory for the focusing energy-critical fourth-order NLS
//! `i u_t + Δ²u = |u|^{8/(d−4)} u` in dimension `d ≥ 5`.

pub mod diagnostics;
pub mod error;
pub mod frequency;
pub mod grid;
pub mod ground_state;
pub mod propagator;
pub mod quadrature;
pub mod symmetry;
pub mod harness;

pub use error::{Error, Result};
pub use grid::{build_grid, radial_laplacian, Grid, GridSpec, RadialField, SpectralBasis, C64};
