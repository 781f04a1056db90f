//! Depth-first branch-and-bound over mode vectors.
//!
//! A node fixes some pairs to D2D (`F_D`) or cellular (`F_C`) and leaves the
//! rest (`U`) open. Its lower bound is `T * sum p*(F_D)` plus the
//! orthogonal-channel optimum over `F_C ∪ U`, where `F_C` is forced cellular
//! and the D2D noise of each open pair is raised by the interference of
//! `F_D` at its minimum powers. Minimum powers only grow as `F_D` grows,
//! so this never exceeds the cost of any completion.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sinr::{d2d_set_feasible, D2dFeasibility, SinrSystem};
use super::{assemble, cellular_common_time, RsSolution, SolverStats};
use crate::energy::d2d_energy_ext;
use crate::error::{Error, Result};
use crate::fo::{solve_fo_rows, PiecewiseCost};
use crate::scenario::LinkBudget;
use crate::types::{EnergyObjective, ExtEnergy, Mode};

/// A node is pruned when its bound is within this relative margin of the
/// incumbent; the margin absorbs bisection round-off in the bound.
const PRUNE_REL_MARGIN: f64 = 1e-12;

/// Order in which pairs become branching variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchingRule {
    /// Pairs that are D2D in the orthogonal-channel optimum first, strongest
    /// interferers first; then the rest by decreasing D2D saving.
    Proposed,
    /// A seeded uniform shuffle.
    Random { seed: u64 },
}

/// One visited node, for inspecting the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub depth: usize,
    pub fixed_d2d: Vec<usize>,
    pub fixed_cellular: Vec<usize>,
    /// Absent at leaves.
    pub lower_bound: Option<f64>,
    /// Cost of sending every open pair to cellular, when feasible.
    pub upper_bound: Option<f64>,
}

/// Exact optimum by branch-and-bound.
pub fn rs_branch_and_bound(
    budget: &LinkBudget,
    sys: &SinrSystem,
    objective: EnergyObjective,
    rule: BranchingRule,
) -> Result<RsSolution> {
    Search::new(budget, sys, objective, rule, false).run().map(|(s, _)| s)
}

/// [`rs_branch_and_bound`] plus a record of every visited node.
pub fn rs_branch_and_bound_logged(
    budget: &LinkBudget,
    sys: &SinrSystem,
    objective: EnergyObjective,
    rule: BranchingRule,
) -> Result<(RsSolution, Vec<NodeRecord>)> {
    Search::new(budget, sys, objective, rule, true).run()
}

struct Incumbent {
    cost: f64,
    d2d: Vec<usize>,
    powers: Vec<f64>,
}

struct Search<'a> {
    budget: &'a LinkBudget,
    sys: &'a SinrSystem,
    objective: EnergyObjective,
    rule: BranchingRule,
    order: Vec<usize>,
    stats: SolverStats,
    best: Option<Incumbent>,
    log: Option<Vec<NodeRecord>>,
}

impl<'a> Search<'a> {
    fn new(
        budget: &'a LinkBudget,
        sys: &'a SinrSystem,
        objective: EnergyObjective,
        rule: BranchingRule,
        logged: bool,
    ) -> Self {
        Search {
            budget,
            sys,
            objective,
            rule,
            order: Vec::new(),
            stats: SolverStats::default(),
            best: None,
            log: logged.then(Vec::new),
        }
    }

    fn run(mut self) -> Result<(RsSolution, Vec<NodeRecord>)> {
        let start = Instant::now();
        self.order = self.branching_order()?;
        let all: Vec<usize> = (0..self.budget.len()).collect();
        if let Some((_, cost)) = cellular_common_time(self.budget, &all, self.objective) {
            self.best = Some(Incumbent { cost, d2d: Vec::new(), powers: Vec::new() });
        }
        self.stats.nodes_explored += 1;
        self.visit(0, &[], &[], &[]);
        self.stats.wall_time = start.elapsed();
        let best = self.best.take().ok_or_else(|| Error::CellularInfeasible("no feasible mode selection vector".into()))?;
        let solution = assemble(self.budget, self.objective, &best.d2d, &best.powers, self.stats)?;
        Ok((solution, self.log.unwrap_or_default()))
    }

    fn branching_order(&self) -> Result<Vec<usize>> {
        let n = self.budget.len();
        match self.rule {
            BranchingRule::Random { seed } => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                Ok(order)
            }
            BranchingRule::Proposed => {
                let rows = &self.budget.rows;
                let d2d: Vec<ExtEnergy> = rows.iter().map(|r| d2d_energy_ext(r, 0.0)).collect();
                let fo = solve_fo_rows(rows, &d2d, self.objective)?;
                let cross = &self.budget.cross;
                let d_fo = fo.modes.d2d_set();
                let strength =
                    |l: usize| d_fo.iter().filter(|&&i| i != l).map(|&i| cross[l][i]).sum::<f64>() / cross[l][l];
                let mut first = d_fo.clone();
                first.sort_by(|&a, &b| strength(b).total_cmp(&strength(a)));
                let saving = |l: usize| {
                    let cell = rows[l].cellular_energy(fo.t_ul_star, self.objective);
                    d2d[l].finite().map_or(f64::NEG_INFINITY, |e| cell - e)
                };
                let mut rest = fo.modes.cellular_set();
                rest.sort_by(|&a, &b| saving(b).total_cmp(&saving(a)));
                first.extend(rest);
                Ok(first)
            }
        }
    }

    fn offer(&mut self, cost: f64, d2d: &[usize], powers: &[f64]) {
        if self.best.as_ref().is_none_or(|b| cost < b.cost) {
            self.best = Some(Incumbent { cost, d2d: d2d.to_vec(), powers: powers.to_vec() });
        }
    }

    /// Visits a counted node whose fixed D2D set is feasible with minimum
    /// powers `powers`.
    fn visit(&mut self, k: usize, fixed_d2d: &[usize], powers: &[f64], fixed_cell: &[usize]) {
        let open = self.order[k..].to_vec();
        let d2d_cost = self.budget.frame() * powers.iter().sum::<f64>();

        let mut cell: Vec<usize> = fixed_cell.to_vec();
        cell.extend_from_slice(&open);
        let upper = cellular_common_time(self.budget, &cell, self.objective).map(|(_, c)| d2d_cost + c);
        if let Some(cost) = upper {
            self.offer(cost, fixed_d2d, powers);
        }

        if open.is_empty() {
            self.stats.leaves += 1;
            self.record(k, fixed_d2d, fixed_cell, None, upper);
            return;
        }

        let lower = d2d_cost + self.relaxation(fixed_d2d, powers, fixed_cell, &open).to_f64();
        self.record(k, fixed_d2d, fixed_cell, Some(lower), upper);
        if let Some(best) = &self.best {
            if lower >= best.cost * (1.0 - PRUNE_REL_MARGIN) {
                self.stats.pruned_bound += 1;
                return;
            }
        }

        let l = self.order[k];
        self.stats.nodes_explored += 1;
        let mut child_d2d = fixed_d2d.to_vec();
        child_d2d.push(l);
        match d2d_set_feasible(self.sys, &child_d2d) {
            D2dFeasibility::Feasible { powers: child_powers } => {
                self.visit(k + 1, &child_d2d, &child_powers, fixed_cell);
            }
            _ => self.stats.pruned_infeasible += 1,
        }

        self.stats.nodes_explored += 1;
        let mut child_cell = fixed_cell.to_vec();
        child_cell.push(l);
        if cellular_common_time(self.budget, &child_cell, self.objective).is_some() {
            self.visit(k + 1, fixed_d2d, powers, &child_cell);
        } else {
            self.stats.pruned_infeasible += 1;
        }
    }

    /// Orthogonal-channel optimum over `fixed_cell ∪ open` with `fixed_cell`
    /// forced cellular and open pairs' D2D noise raised by `fixed_d2d`.
    fn relaxation(&self, fixed_d2d: &[usize], powers: &[f64], fixed_cell: &[usize], open: &[usize]) -> ExtEnergy {
        let rows = &self.budget.rows;
        let mut sub_rows = Vec::with_capacity(fixed_cell.len() + open.len());
        let mut sub_d2d = Vec::with_capacity(sub_rows.capacity());
        for &l in fixed_cell {
            sub_rows.push(rows[l]);
            sub_d2d.push(ExtEnergy::Infinite);
        }
        for &l in open {
            let interference = self.sys.interference(l, fixed_d2d, powers);
            sub_rows.push(rows[l]);
            sub_d2d.push(d2d_energy_ext(&rows[l], interference));
        }
        PiecewiseCost::from_rows(&sub_rows, &sub_d2d, self.objective).minimize().1
    }

    fn record(&mut self, depth: usize, d2d: &[usize], cell: &[usize], lower: Option<f64>, upper: Option<f64>) {
        if let Some(log) = &mut self.log {
            log.push(NodeRecord {
                depth,
                fixed_d2d: d2d.to_vec(),
                fixed_cellular: cell.to_vec(),
                lower_bound: lower,
                upper_bound: upper,
            });
        }
    }
}

impl BranchingRule {
    pub fn name(self) -> &'static str {
        match self {
            BranchingRule::Proposed => "proposed",
            BranchingRule::Random { .. } => "random",
        }
    }
}

impl NodeRecord {
    /// Mode of pair `l` in this node's partial assignment, if fixed.
    pub fn fixed_mode(&self, l: usize) -> Option<Mode> {
        if self.fixed_d2d.contains(&l) {
            Some(Mode::D2d)
        } else if self.fixed_cellular.contains(&l) {
            Some(Mode::Cellular)
        } else {
            None
        }
    }
}
