//! A numerical laboratory for Fourier-localisation estimates on the
//! periodic torus: Littlewood–Paley blocks, Besov norms, Bony paraproducts,
//! a pseudospectral Navier–Stokes solver and the uniqueness diagnostics that
//! are evaluated on its trajectories.
//!
//! Everything lives on `[0, 2π)^dim` with exact FFTs; the whole-space
//! operators become Fourier multipliers on the integer lattice.

pub mod error;
mod fft;
pub mod field;
pub mod grid;
pub mod besov;
pub mod lp;
pub mod monitor;
pub mod paraproduct;
pub mod random;
pub mod snapshot;
pub mod solver;
pub mod suites;

pub use error::{Error, Result};
pub use field::{Field, ProductRule, Representation};
pub use grid::Grid;
