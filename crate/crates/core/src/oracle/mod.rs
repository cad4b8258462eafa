//! Independent reference solutions used to validate the Monte Carlo solvers.

pub mod fixtures;
mod lattice;
mod linear;

pub use lattice::{brute_force_1d, LatticeConfig, LatticeSolution};
pub use linear::{
    linear_closed_form, linear_mean_flow, LinearComponent, LinearMeanFieldSpec, LinearSolution,
    Piecewise,
};
