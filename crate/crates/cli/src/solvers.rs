//! Named solvers and the per-(seed, solver) result record.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use d2d_core::rs::rs_exhaustive;
use d2d_core::{
    cellular_common_time, rs_branch_and_bound, run_heuristic, solve_fo, BranchingRule, EnergyObjective,
    HeuristicConfig, LinkBudget, ModeVector, SinrSystem,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Solver {
    AllCellular,
    FoUe,
    FoSe,
    RsUeBnb,
    /// Branch-and-bound with a seeded random branching order; the scenario
    /// seed is used.
    RsUeBnbRandom,
    RsUeExhaustive,
    RsUeHeuristic { theta: f64 },
}

impl Solver {
    pub const NAMES: &'static str =
        "all-cellular, fo-ue, fo-se, rs-ue-bnb, rs-ue-bnb-random, rs-ue-exhaustive, rs-ue-heuristic[@theta]";

    pub fn heuristic(theta: f64) -> Self {
        Solver::RsUeHeuristic { theta }
    }

    /// Whether the solver shares one channel among all D2D pairs.
    pub fn shares_channel(self) -> bool {
        !matches!(self, Solver::AllCellular | Solver::FoUe | Solver::FoSe)
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Solver::AllCellular => f.write_str("all-cellular"),
            Solver::FoUe => f.write_str("fo-ue"),
            Solver::FoSe => f.write_str("fo-se"),
            Solver::RsUeBnb => f.write_str("rs-ue-bnb"),
            Solver::RsUeBnbRandom => f.write_str("rs-ue-bnb-random"),
            Solver::RsUeExhaustive => f.write_str("rs-ue-exhaustive"),
            Solver::RsUeHeuristic { theta } => write!(f, "rs-ue-heuristic@{theta}"),
        }
    }
}

impl FromStr for Solver {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(theta) = s.strip_prefix("rs-ue-heuristic@") {
            let theta: f64 = theta.parse().with_context(|| format!("bad theta in solver name `{s}`"))?;
            return Ok(Solver::heuristic(theta));
        }
        Ok(match s.as_str() {
            "all-cellular" => Solver::AllCellular,
            "fo-ue" => Solver::FoUe,
            "fo-se" => Solver::FoSe,
            "rs-ue-bnb" => Solver::RsUeBnb,
            "rs-ue-bnb-random" => Solver::RsUeBnbRandom,
            "rs-ue-exhaustive" => Solver::RsUeExhaustive,
            "rs-ue-heuristic" => Solver::heuristic(HeuristicConfig::default().theta),
            _ => bail!("unknown solver `{s}`; expected one of: {}", Solver::NAMES),
        })
    }
}

/// One solver run on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub solver: String,
    pub pairs: usize,
    pub total_energy: f64,
    pub pair_energies: Vec<f64>,
    pub modes: String,
    pub channels_used: usize,
    pub t_ul_star: f64,
    pub nodes_explored: Option<u64>,
    pub leaves: Option<u64>,
    pub converged: bool,
    /// `None` on success, else the error message.
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ResultRow {
    pub const HEADER: [&'static str; 12] = [
        "seed",
        "solver",
        "pairs",
        "total_energy_j",
        "pair_energies_j",
        "modes",
        "channels_used",
        "t_ul_star",
        "nodes_explored",
        "leaves",
        "converged",
        "status",
    ];

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn failed(seed: u64, solver: Solver, pairs: usize, err: &anyhow::Error, wall_time: Duration) -> Self {
        ResultRow {
            seed,
            solver: solver.to_string(),
            pairs,
            total_energy: f64::NAN,
            pair_energies: Vec::new(),
            modes: String::new(),
            channels_used: 0,
            t_ul_star: f64::NAN,
            nodes_explored: None,
            leaves: None,
            converged: false,
            error: Some(format!("{err:#}")),
            wall_time,
        }
    }

    /// Fields in [`ResultRow::HEADER`] order; floats carry 17 significant
    /// digits.
    pub fn record(&self) -> Vec<String> {
        let opt = |v: Option<u64>| v.map(|n| n.to_string()).unwrap_or_default();
        vec![
            self.seed.to_string(),
            self.solver.clone(),
            self.pairs.to_string(),
            fmt_f64(self.total_energy),
            self.pair_energies.iter().map(|&e| fmt_f64(e)).collect::<Vec<_>>().join(";"),
            self.modes.clone(),
            self.channels_used.to_string(),
            fmt_f64(self.t_ul_star),
            opt(self.nodes_explored),
            opt(self.leaves),
            self.converged.to_string(),
            self.error.clone().map_or_else(|| "ok".into(), |e| format!("error: {e}")),
        ]
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Runs `solver` on a budget built from the scenario with `seed`.
pub fn run_solver(budget: &LinkBudget, sys: &SinrSystem, seed: u64, solver: Solver) -> ResultRow {
    let start = Instant::now();
    match solve(budget, sys, seed, solver) {
        Ok(mut row) => {
            row.wall_time = start.elapsed();
            row
        }
        Err(e) => ResultRow::failed(seed, solver, budget.len(), &e, start.elapsed()),
    }
}

fn solve(budget: &LinkBudget, sys: &SinrSystem, seed: u64, solver: Solver) -> anyhow::Result<ResultRow> {
    let n = budget.len();
    let ue = EnergyObjective::UserEnergy;
    let row = |modes: &ModeVector, energies: Vec<f64>, total: f64, channels: usize, t: f64| ResultRow {
        seed,
        solver: solver.to_string(),
        pairs: n,
        total_energy: total,
        pair_energies: energies,
        modes: modes.to_string(),
        channels_used: channels,
        t_ul_star: t,
        nodes_explored: None,
        leaves: None,
        converged: true,
        error: None,
        wall_time: Duration::ZERO,
    };
    let rs = match solver {
        Solver::AllCellular => {
            let all: Vec<usize> = (0..n).collect();
            let (t, _) = cellular_common_time(budget, &all, ue).context("pairs have no common uplink time")?;
            let energies: Vec<f64> = budget.rows.iter().map(|r| r.cellular_energy(t, ue)).collect();
            let total = energies.iter().sum();
            return Ok(row(&ModeVector::all(n, d2d_core::Mode::Cellular), energies, total, n, t));
        }
        Solver::FoUe | Solver::FoSe => {
            let obj = if solver == Solver::FoUe { ue } else { EnergyObjective::SystemEnergy };
            let fo = solve_fo(budget, obj)?;
            // Every pair holds its own channel: one per cellular pair and
            // one per D2D pair.
            return Ok(row(&fo.modes, fo.energies, fo.total, n, fo.t_ul_star));
        }
        Solver::RsUeBnb => rs_branch_and_bound(budget, sys, ue, BranchingRule::Proposed)?,
        Solver::RsUeBnbRandom => rs_branch_and_bound(budget, sys, ue, BranchingRule::Random { seed })?,
        Solver::RsUeExhaustive => rs_exhaustive(budget, sys, ue)?,
        Solver::RsUeHeuristic { theta } => run_heuristic(budget, sys, &HeuristicConfig::with_theta(theta))?.0,
    };
    let mut out = row(&rs.modes, rs.energies.clone(), rs.total, rs.channels_used(), rs.t_ul_star);
    out.converged = rs.converged;
    if !matches!(solver, Solver::RsUeHeuristic { .. }) {
        out.nodes_explored = Some(rs.stats.nodes_explored);
        out.leaves = Some(rs.stats.leaves);
    }
    Ok(out)
}
