//! Total-variation deblurring by alternating minimization with
//! boundary-aware fast solvers.

pub mod dense;
pub mod error;
pub mod grid;
pub mod harness;
pub mod operators;
pub mod solver;
pub mod transforms;

pub use error::{DeblurError, Result};
pub use grid::{energy, BoundaryModel, EnergyReport, GradientField, Image, Psf, SolveParams};
