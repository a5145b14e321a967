//! Envy-constrained allocation of a continuous stream of items to a finite
//! set of recipients, solved as semi-discrete optimal transport.
//!
//! An item with valuation vector `x` goes to the Laguerre cell minimizing
//! an adjusted cost built from dual potentials `g` and envy multipliers
//! `gamma`; [`solver::solve_sgd`] learns the duals from samples.

// `!(x > 0.0)` style checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cells;
pub mod error;
pub mod lab;
pub mod metrics;
pub mod problem;
pub mod seed;
pub mod shift;
pub mod solver;
pub mod sources;

pub use cells::{assign, cell_mass, empirical_objective, Assignment, LaguerreCells};
pub use error::{Error, Result};
pub use metrics::{evaluate, EvaluationReport};
pub use problem::{uniform_budget, DualSolution, EnvyBudget, ProblemSpec, SolveReport, TargetDistribution};
pub use solver::{solve_erm, solve_erm_from, solve_sgd, ErmConfig, SgdConfig};
pub use sources::{SampleSet, SourceSpec};
