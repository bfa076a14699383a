//! Discretization of the controlled heat equation on an interval.

mod grid;
mod solver;
mod tridiag;

pub use grid::{ScalarField, SpaceTimeField, SpatialGrid, SubdomainMask, TimeGrid, Trajectory};
pub use solver::{first_eigenvalue, solve_adjoint, solve_forward, solve_linearized};
