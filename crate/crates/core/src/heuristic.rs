//! Distributed power control with threshold-based fallback to cellular mode.
//!
//! Starting from the orthogonal-channel user-energy optimum, every D2D pair
//! repeatedly scales its power by `target SINR / measured SINR` on the
//! shared channel. A pair whose power would exceed
//! `min(theta / T * E_cell, p_max)` gives up and moves to cellular mode for
//! good, where `E_cell` is its cellular energy at the starting uplink time.

use std::fmt::Write as _;
use std::io;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fo::solve_fo;
use crate::rs::{assemble, d2d_set_feasible, D2dFeasibility, RsSolution, SinrSystem, SolverStats};
use crate::scenario::LinkBudget;
use crate::types::{EnergyObjective, ModeVector};

/// Starting power for a pair with zero target, keeping the update defined.
const MIN_START_POWER: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    /// Switch threshold, at least 1.
    pub theta: f64,
    pub max_iters: usize,
    /// Relative SINR shortfall accepted as convergence.
    pub sinr_tol: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig { theta: 1.2, max_iters: 500, sinr_tol: 1e-6 }
    }
}

impl HeuristicConfig {
    pub fn with_theta(theta: f64) -> Self {
        HeuristicConfig { theta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 1.0 && self.theta.is_finite()) {
            return Err(Error::InvalidParams(format!("theta must be a finite value >= 1, got {}", self.theta)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("max_iters must be at least 1".into()));
        }
        if !(self.sinr_tol > 0.0 && self.sinr_tol < 1.0) {
            return Err(Error::InvalidParams(format!("sinr_tol must lie in (0, 1), got {}", self.sinr_tol)));
        }
        Ok(())
    }
}

/// State after one synchronous power-control sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    /// Shared-channel powers, zero outside the D2D set.
    pub powers: Vec<f64>,
    /// Perceived SINR before the sweep, zero outside the D2D set.
    pub sinr: Vec<f64>,
    pub modes: ModeVector,
    /// Pairs that moved to cellular mode in this step.
    pub switched: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HeuristicTrace {
    /// Per-pair switch thresholds.
    pub caps: Vec<f64>,
    pub steps: Vec<TraceStep>,
}

impl HeuristicTrace {
    /// Size of the D2D set after each step.
    pub fn d2d_set_sizes(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.modes.d2d_set().len()).collect()
    }

    /// One row per (iteration, pair) with header
    /// `iteration,pair,mode,power_w,sinr,switched`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,pair,mode,power_w,sinr,switched\n");
        for step in &self.steps {
            for l in 0..step.powers.len() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    step.iteration,
                    l + 1,
                    step.modes.get(l).bit(),
                    step.powers[l],
                    step.sinr[l],
                    u8::from(step.switched.contains(&l)),
                );
            }
        }
        out
    }

    pub fn write_csv(&self, mut w: impl io::Write) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

/// `p_l G_ll / (sigma^2 + sum_{j in D, j != l} p_j G_jl)` for `l` in `active`;
/// zero elsewhere. `powers` is indexed by pair.
pub fn perceived_sinr(sys: &SinrSystem, active: &[usize], powers: &[f64]) -> Vec<f64> {
    let mut sinr = vec![0.0; sys.len()];
    for &l in active {
        let interference: f64 = active.iter().filter(|&&j| j != l).map(|&j| powers[j] * sys.gain[j][l]).sum();
        sinr[l] = powers[l] * sys.gain[l][l] / (sys.noise + interference);
    }
    sinr
}

/// One synchronous update `p_l <- (gamma_tgt_l / gamma_l) p_l` over `active`.
pub fn fm_update(sys: &SinrSystem, active: &[usize], powers: &[f64]) -> Result<Vec<f64>> {
    let sinr = perceived_sinr(sys, active, powers);
    let mut next = powers.to_vec();
    for &l in active {
        if sys.gamma_tgt[l] == 0.0 {
            next[l] = 0.0;
        } else if sinr[l] > 0.0 {
            next[l] = sys.gamma_tgt[l] / sinr[l] * powers[l];
        } else {
            return Err(Error::Contract(format!("pair {} entered power control with zero SINR", l + 1)));
        }
    }
    Ok(next)
}

fn targets_met(sys: &SinrSystem, active: &[usize], sinr: &[f64], tol: f64) -> bool {
    active.iter().all(|&l| sinr[l] >= sys.gamma_tgt[l] * (1.0 - tol))
}

/// Runs the heuristic for the user-energy objective.
pub fn run_heuristic(
    budget: &LinkBudget,
    sys: &SinrSystem,
    cfg: &HeuristicConfig,
) -> Result<(RsSolution, HeuristicTrace)> {
    cfg.validate()?;
    let start = Instant::now();
    let n = budget.len();
    let objective = EnergyObjective::UserEnergy;
    let fo = solve_fo(budget, objective)?;
    let frame = budget.frame();
    let caps: Vec<f64> = budget
        .rows
        .iter()
        .enumerate()
        .map(|(l, row)| {
            if row.uplink_time_feasible(fo.t_ul_star) {
                (cfg.theta / frame * row.cellular_energy(fo.t_ul_star, objective)).min(sys.p_max[l])
            } else {
                sys.p_max[l]
            }
        })
        .collect();

    let mut active = fo.modes.d2d_set();
    let mut powers = vec![0.0; n];
    for &l in &active {
        powers[l] = sys.eta[l].max(MIN_START_POWER);
    }
    let mut trace = HeuristicTrace { caps: caps.clone(), steps: Vec::new() };
    let push = |trace: &mut HeuristicTrace, k: usize, active: &[usize], p: &[f64], sinr: Vec<f64>, sw: Vec<usize>| {
        trace.steps.push(TraceStep {
            iteration: k,
            powers: p.to_vec(),
            sinr,
            modes: ModeVector::from_d2d_set(n, active),
            switched: sw,
        });
    };
    push(&mut trace, 0, &active, &powers, perceived_sinr(sys, &active, &powers), Vec::new());

    let mut iterations = 0;
    let mut final_powers: Option<Vec<f64>> = None;
    while !active.is_empty() {
        let sinr = perceived_sinr(sys, &active, &powers);
        if targets_met(sys, &active, &sinr, cfg.sinr_tol) {
            // Settle on the exact minimum powers of the surviving set; any
            // pair whose exact power breaks its cap still has to leave.
            let exact = d2d_set_feasible(sys, &active);
            let over: Vec<usize> = match exact.min_powers() {
                Some(p) => active.iter().zip(p).filter(|(&l, &v)| v > caps[l]).map(|(&l, _)| l).collect(),
                None => vec![worst_pair(&active, &powers, &caps)],
            };
            if over.is_empty() {
                final_powers = exact.min_powers().map(<[f64]>::to_vec);
                break;
            }
            drop_pairs(&mut active, &mut powers, &over);
            push(&mut trace, iterations, &active, &powers, sinr, over);
            continue;
        }
        if iterations == cfg.max_iters {
            break;
        }
        iterations += 1;
        powers = fm_update(sys, &active, &powers)?;
        let switched: Vec<usize> = active.iter().copied().filter(|&l| powers[l] > caps[l]).collect();
        drop_pairs(&mut active, &mut powers, &switched);
        push(&mut trace, iterations, &active, &powers, sinr, switched);
    }

    let converged = active.is_empty() || final_powers.is_some();
    let final_powers = match final_powers {
        Some(p) => p,
        None => {
            // Out of iterations: shed the pairs furthest over their caps
            // until the rest is feasible.
            loop {
                if active.is_empty() {
                    break Vec::new();
                }
                let exact = d2d_set_feasible(sys, &active);
                let fits = exact
                    .min_powers()
                    .filter(|p| active.iter().zip(p.iter()).all(|(&l, &v)| v <= caps[l]));
                if let (D2dFeasibility::Feasible { .. }, Some(p)) = (&exact, fits) {
                    break p.to_vec();
                }
                let worst = match exact.min_powers() {
                    Some(p) => {
                        let mut full = vec![0.0; n];
                        active.iter().zip(p).for_each(|(&l, &v)| full[l] = v);
                        worst_pair(&active, &full, &caps)
                    }
                    None => worst_pair(&active, &powers, &caps),
                };
                drop_pairs(&mut active, &mut powers, &[worst]);
                push(&mut trace, iterations, &active, &powers, vec![0.0; n], vec![worst]);
            }
        }
    };

    let stats = SolverStats { nodes_explored: iterations as u64, wall_time: start.elapsed(), ..SolverStats::default() };
    let mut solution = assemble(budget, objective, &active, &final_powers, stats)?;
    solution.converged = converged;
    Ok((solution, trace))
}

fn drop_pairs(active: &mut Vec<usize>, powers: &mut [f64], leaving: &[usize]) {
    active.retain(|l| !leaving.contains(l));
    for &l in leaving {
        powers[l] = 0.0;
    }
}

/// Active pair with the largest power-to-cap ratio.
fn worst_pair(active: &[usize], powers: &[f64], caps: &[f64]) -> usize {
    *active
        .iter()
        .max_by(|&&a, &&b| (powers[a] / caps[a]).total_cmp(&(powers[b] / caps[b])))
        .expect("active set is non-empty")
}
