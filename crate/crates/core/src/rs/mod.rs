//! Resource-sharing case: every D2D pair transmits on one shared channel.
//!
//! A mode vector is feasible when its D2D set passes the SINR-target test of
//! [`d2d_set_feasible`] and its cellular set has a common power-feasible
//! uplink time. The cost of a feasible vector is `T * sum p*` over the D2D
//! set plus the best common-time cellular cost over the cellular set.

mod bnb;
mod sinr;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{minimize_convex, BISECTION_REL_TOL};
use crate::scenario::LinkBudget;
use crate::types::{EnergyObjective, ModeVector, PairPowers};

pub use bnb::{rs_branch_and_bound, rs_branch_and_bound_logged, BranchingRule, NodeRecord};
pub use sinr::{d2d_set_feasible, D2dFeasibility, PerronRoot, SinrSystem};

/// Largest pair count accepted by exhaustive enumeration.
pub const MAX_EXHAUSTIVE_PAIRS: usize = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    /// Search nodes (B&B) or mode vectors (enumeration) whose D2D set was
    /// tested for feasibility.
    pub nodes_explored: u64,
    pub pruned_infeasible: u64,
    pub pruned_bound: u64,
    /// Complete mode vectors evaluated.
    pub leaves: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsSolution {
    pub objective: EnergyObjective,
    pub modes: ModeVector,
    pub t_ul_star: f64,
    /// Shared-channel powers; zero for cellular pairs.
    pub d2d_powers: Vec<f64>,
    pub powers: Vec<PairPowers>,
    /// Energy charged to each pair under the objective.
    pub energies: Vec<f64>,
    pub total: f64,
    pub stats: SolverStats,
    /// False only for a heuristic run that hit its iteration limit.
    pub converged: bool,
}

impl RsSolution {
    /// `|C| + 1` when any pair uses the shared D2D channel, else `|C|`.
    pub fn channels_used(&self) -> usize {
        let d2d = self.modes.d2d_set().len();
        self.modes.len() - d2d + usize::from(d2d > 0)
    }
}

/// Best common uplink time for the cellular set `cell` and its total cost,
/// or `None` when the pairs' feasible uplink intervals do not intersect. An
/// empty set costs nothing and leaves the whole frame to the uplink.
pub fn cellular_common_time(budget: &LinkBudget, cell: &[usize], objective: EnergyObjective) -> Option<(f64, f64)> {
    let frame = budget.frame();
    if cell.is_empty() {
        return Some((frame, 0.0));
    }
    let rows = cell.iter().map(|&l| &budget.rows[l]);
    let lo = rows.clone().map(|r| r.ul_lo).fold(0.0, f64::max);
    let hi = rows.clone().map(|r| r.ul_hi).fold(frame, f64::min);
    if !(lo <= hi) {
        return None;
    }
    let t = match objective {
        EnergyObjective::UserEnergy => hi,
        EnergyObjective::SystemEnergy => minimize_convex(lo, hi, BISECTION_REL_TOL * frame, |t| {
            rows.clone().map(|r| r.cellular_energy_slope(t, objective)).sum()
        }),
    };
    Some((t, rows.map(|r| r.cellular_energy(t, objective)).sum()))
}

/// Full solution record for a feasible mode vector.
pub(crate) fn assemble(
    budget: &LinkBudget,
    objective: EnergyObjective,
    d2d: &[usize],
    d2d_powers: &[f64],
    stats: SolverStats,
) -> Result<RsSolution> {
    let n = budget.len();
    let modes = ModeVector::from_d2d_set(n, d2d);
    let cell = modes.cellular_set();
    let (t, _) = cellular_common_time(budget, &cell, objective)
        .ok_or_else(|| Error::CellularInfeasible("cellular set has no common uplink time".into()))?;
    let frame = budget.frame();
    let mut powers = vec![PairPowers::default(); n];
    let mut energies = vec![0.0; n];
    let mut full_d2d = vec![0.0; n];
    for &l in &cell {
        powers[l] = budget.rows[l].cellular_powers(t);
        energies[l] = budget.rows[l].cellular_energy(t, objective);
    }
    for (&l, &p) in d2d.iter().zip(d2d_powers) {
        powers[l] = PairPowers { d2d: p, ..PairPowers::default() };
        energies[l] = p * frame;
        full_d2d[l] = p;
    }
    Ok(RsSolution {
        objective,
        modes,
        t_ul_star: t,
        d2d_powers: full_d2d,
        powers,
        total: energies.iter().sum(),
        energies,
        stats,
        converged: true,
    })
}

/// Cost of a D2D set with known minimum powers, or `None` when the
/// complementary cellular set has no common uplink time.
pub(crate) fn vector_cost(
    budget: &LinkBudget,
    objective: EnergyObjective,
    in_d2d: &[bool],
    d2d_powers: &[f64],
) -> Option<f64> {
    let cell: Vec<usize> = (0..budget.len()).filter(|&l| !in_d2d[l]).collect();
    let (_, cost) = cellular_common_time(budget, &cell, objective)?;
    Some(cost + budget.frame() * d2d_powers.iter().sum::<f64>())
}

/// Exact optimum by enumerating every mode vector in order of increasing
/// D2D-set size. A D2D set is skipped without testing when removing any one
/// member gives a set already known to be infeasible, since supersets of
/// an infeasible set are infeasible.
pub fn rs_exhaustive(budget: &LinkBudget, sys: &SinrSystem, objective: EnergyObjective) -> Result<RsSolution> {
    let start = Instant::now();
    let n = budget.len();
    if n > MAX_EXHAUSTIVE_PAIRS {
        return Err(Error::TooManyPairs { got: n, max: MAX_EXHAUSTIVE_PAIRS });
    }
    let mut stats = SolverStats::default();
    let mut dead = vec![false; 1usize << n];
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut in_d2d = vec![false; n];
    for size in 0..=n {
        for mask in subsets_of_size(n, size) {
            if (0..n).any(|i| mask & (1 << i) != 0 && dead[mask & !(1 << i)]) {
                dead[mask] = true;
                stats.pruned_infeasible += 1;
                continue;
            }
            stats.nodes_explored += 1;
            let set: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            let powers = match d2d_set_feasible(sys, &set) {
                D2dFeasibility::Feasible { powers } => powers,
                _ => {
                    dead[mask] = true;
                    continue;
                }
            };
            for (l, flag) in in_d2d.iter_mut().enumerate() {
                *flag = mask & (1 << l) != 0;
            }
            let Some(cost) = vector_cost(budget, objective, &in_d2d, &powers) else {
                continue;
            };
            stats.leaves += 1;
            if best.as_ref().is_none_or(|(b, _, _)| cost < *b) {
                best = Some((cost, set, powers));
            }
        }
    }
    let (_, set, powers) =
        best.ok_or_else(|| Error::CellularInfeasible("no feasible mode selection vector".into()))?;
    stats.wall_time = start.elapsed();
    assemble(budget, objective, &set, &powers, stats)
}

/// All `n`-bit masks with `k` bits set, in increasing numeric order.
fn subsets_of_size(n: usize, k: usize) -> impl Iterator<Item = usize> {
    let limit = 1usize << n;
    let first = if k == 0 { 0 } else { (1usize << k) - 1 };
    let mut next = Some(first).filter(|&m| m < limit);
    std::iter::from_fn(move || {
        let current = next?;
        next = if current == 0 {
            None
        } else {
            // Gosper's hack: the next larger integer with the same popcount.
            let c = current & current.wrapping_neg();
            let r = current + c;
            let m = (((r ^ current) >> 2) / c) | r;
            Some(m).filter(|&m| m < limit)
        };
        Some(current)
    })
}
