//! Numerical laboratory for the relativistic heat equation
//! `u_t = div(u Du / sqrt(u² + c⁻²|Du|²))`.

pub mod error;
pub mod evolve;
pub mod grid;
pub mod linalg;
pub mod newton;
pub mod operators;
pub mod report;
pub mod stationary;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{BoundaryCondition, FaceFluxes, Grid, ScalarField};
pub use operators::{Classification, ModelParams, PointState};
pub use evolve::{Method, TimeStepConfig};
pub use report::RunReport;
pub use verify::CheckResult;
