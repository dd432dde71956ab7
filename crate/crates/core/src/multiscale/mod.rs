//! Solvers for the slow-fast system, its controlled version, the frozen
//! fast dynamics, the averaged equation and the skeleton equation.

mod averaged;
pub(crate) mod ode;
mod registry;
mod solver;
mod system;

pub use averaged::{estimate_bar_f1, AveragedDrift, DriftEstimate, DriftLattice, DriftSource, ErgodicParams, Lattice};
pub use ode::{solve_averaged, solve_skeleton};
pub use registry::{build_system, register_system, SystemBuilder, SystemParams, BUILTIN_SYSTEMS};
pub use solver::{
    control_cost, fast_grid, sample_fast_noise, solve_controlled, solve_frozen_fast, solve_frozen_fast_with_noise,
    solve_slow_fast, SlowFastPath,
};
pub use system::{AssumptionReport, Constants, Coupled, Dims, ScaleParams, SlowMap, SystemSpec, STABILITY_LIMIT};
