//! Regression-based backward scheme for BSDEs with frozen mean terms.

mod driver;
mod regression;
mod solver;

pub use driver::{Driver, ExprDriver, FnDriver, StateInput};
pub use regression::{regress_conditional, Projector, RegressionBasis};
pub use solver::{
    evaluate_driver, solve_standard, terminal_values, BackwardSolver, StandardSolution, StepOutput, SweepStats,
};
