//! Energy-optimal joint mode selection, uplink/downlink time split and power
//! allocation for device-to-device (D2D) pairs in a single dynamic-TDD cell.
//!
//! The crate is organised bottom-up:
//!
//! * [`scenario`] builds problem instances and the derived [`LinkBudget`].
//! * [`energy`] holds the closed-form rate/energy functions and the
//!   single-pair mode selection rule.
//! * [`fo`] solves the multi-pair problem when every D2D pair gets its own
//!   channel (no D2D interference), for both objectives.
//! * [`rs`] solves the problem when all D2D pairs share one channel: the
//!   SINR-target system, Perron-root feasibility, exhaustive enumeration and
//!   a customised branch-and-bound.
//! * [`heuristic`] is the FO-seeded distributed power-control heuristic.

// `!(x <= y)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod fo;
pub mod heuristic;
pub mod numeric;
pub mod rs;
pub mod scenario;
pub mod types;

pub use energy::{single_pair_select, SinglePairSolution};
pub use error::{Error, Result};
pub use fo::{solve_fo, FoSolution, PairInterval, PiecewiseCost};
pub use heuristic::{run_heuristic, HeuristicConfig, HeuristicTrace};
pub use rs::{
    cellular_common_time, d2d_set_feasible, rs_branch_and_bound, rs_exhaustive, BranchingRule,
    D2dFeasibility, RsSolution, SinrSystem, SolverStats,
};
pub use scenario::{
    build_link_budget, pathloss_gain, random_scenario, CellScenario, LinkBudget, LinkRow,
    PhysParams, Point, Radio, UserPair,
};
pub use types::{EnergyObjective, ExtEnergy, Mode, ModeVector, PairPowers};
