//! Optimal multi-pair solver when every D2D pair has its own channel.
//!
//! Without D2D interference each pair's D2D cost is a constant, so the only
//! coupling is the common uplink time `t_ul` shared by all cellular pairs.
//! For a fixed `t_ul` each pair independently takes the cheaper feasible
//! mode; the total cost `F(t_ul)` is piecewise convex (system energy) or
//! piecewise decreasing (user energy) over at most `2L + 1` intervals whose
//! endpoints are the ends of the per-pair intervals `Delta_l` on which
//! cellular mode is the cheaper choice.

use serde::{Deserialize, Serialize};

use crate::energy::d2d_energy_ext;
use crate::error::{Error, Result};
use crate::numeric::{bisect_boundary, minimize_convex, BISECTION_REL_TOL};
use crate::scenario::{LinkBudget, LinkRow};
use crate::types::{EnergyObjective, ExtEnergy, Mode, ModeVector, PairPowers};

/// Breakpoints closer than this fraction of the frame are merged.
const BREAKPOINT_DEDUP_REL: f64 = 1e-15;

/// The closed set of uplink times on which cellular mode is power-feasible
/// and no more expensive than D2D mode for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PairInterval {
    Empty,
    Span { lo: f64, hi: f64 },
}

impl PairInterval {
    pub fn contains(self, t: f64) -> bool {
        match self {
            PairInterval::Empty => false,
            PairInterval::Span { lo, hi } => lo <= t && t <= hi,
        }
    }

    pub fn bounds(self) -> Option<(f64, f64)> {
        match self {
            PairInterval::Empty => None,
            PairInterval::Span { lo, hi } => Some((lo, hi)),
        }
    }
}

/// `Delta_l` for an interference-free pair.
pub fn pair_interval(row: &LinkRow, objective: EnergyObjective) -> PairInterval {
    interval_against(row, objective, d2d_energy_ext(row, 0.0))
}

/// `Delta_l` against an arbitrary D2D cost.
pub(crate) fn interval_against(row: &LinkRow, objective: EnergyObjective, d2d: ExtEnergy) -> PairInterval {
    let (lo, hi) = (row.ul_lo, row.ul_hi);
    if !(lo <= hi) {
        return PairInterval::Empty;
    }
    let bound = match d2d {
        ExtEnergy::Infinite => return PairInterval::Span { lo, hi },
        ExtEnergy::Finite(e) => e,
    };
    let cheaper = |t: f64| row.cellular_energy(t, objective) <= bound;
    let tol = BISECTION_REL_TOL * row.radio.frame;
    match objective {
        // Decreasing cost: at most one crossing, and Delta extends to hi.
        EnergyObjective::UserEnergy => {
            if !cheaper(hi) {
                PairInterval::Empty
            } else if cheaper(lo) {
                PairInterval::Span { lo, hi }
            } else {
                PairInterval::Span { lo: bisect_boundary(lo, hi, tol, cheaper), hi }
            }
        }
        // Convex cost: up to two crossings around the minimiser.
        EnergyObjective::SystemEnergy => {
            let t_min = minimize_convex(lo, hi, tol, |t| row.cellular_energy_slope(t, objective));
            if !cheaper(t_min) {
                return PairInterval::Empty;
            }
            let left = if cheaper(lo) { lo } else { bisect_boundary(lo, t_min, tol, cheaper) };
            let right = if cheaper(hi) { hi } else { bisect_boundary(hi, t_min, tol, cheaper) };
            PairInterval::Span { lo: left, hi: right }
        }
    }
}

/// One pair as seen by the piecewise cost: its link, its D2D cost and the
/// interval on which it is served in cellular mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerm {
    pub row: LinkRow,
    pub d2d: ExtEnergy,
    pub interval: PairInterval,
}

impl CostTerm {
    /// `E_l(t)`: cellular cost inside `Delta_l`, D2D cost outside.
    fn energy_at(&self, t: f64, objective: EnergyObjective) -> ExtEnergy {
        if self.interval.contains(t) {
            ExtEnergy::Finite(self.row.cellular_energy(t, objective))
        } else {
            self.d2d
        }
    }
}

/// One interval of the partition and the pairs that are cellular on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    /// Indices into [`PiecewiseCost::terms`] of the pairs in cellular mode.
    pub active: Vec<usize>,
    /// Sum of the D2D costs of all other pairs.
    pub constant: ExtEnergy,
}

/// `F(t_ul)` over `[0, T]` as a sorted partition with per-piece active sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCost {
    pub objective: EnergyObjective,
    pub frame: f64,
    pub terms: Vec<CostTerm>,
    /// Strictly increasing, from 0 to T.
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<Piece>,
}

impl PiecewiseCost {
    pub fn new(terms: Vec<CostTerm>, objective: EnergyObjective, frame: f64) -> Self {
        let mut points = vec![0.0, frame];
        for term in &terms {
            if let Some((lo, hi)) = term.interval.bounds() {
                points.extend([lo, hi]);
            }
        }
        points.sort_by(f64::total_cmp);
        let tol = BREAKPOINT_DEDUP_REL * frame;
        let mut breakpoints: Vec<f64> = Vec::with_capacity(points.len());
        for p in points {
            match breakpoints.last() {
                Some(&last) if p - last <= tol => {}
                _ => breakpoints.push(p),
            }
        }
        let pieces = breakpoints
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let (active, rest): (Vec<usize>, Vec<usize>) =
                    (0..terms.len()).partition(|&l| terms[l].interval.contains(mid));
                Piece {
                    start: w[0],
                    end: w[1],
                    active,
                    constant: rest.iter().map(|&l| terms[l].d2d).sum(),
                }
            })
            .collect();
        PiecewiseCost { objective, frame, terms, breakpoints, pieces }
    }

    /// Interference-free structure for `rows` with per-pair D2D costs.
    pub fn from_rows(rows: &[LinkRow], d2d: &[ExtEnergy], objective: EnergyObjective) -> Self {
        let frame = rows.first().map_or(1.0, |r| r.radio.frame);
        let terms = rows
            .iter()
            .zip(d2d)
            .map(|(row, &d2d)| CostTerm { row: *row, d2d, interval: interval_against(row, objective, d2d) })
            .collect();
        Self::new(terms, objective, frame)
    }

    pub fn intervals(&self) -> Vec<PairInterval> {
        self.terms.iter().map(|t| t.interval).collect()
    }

    /// `F(t)` for `t` in `[0, T]`.
    pub fn evaluate(&self, t: f64) -> ExtEnergy {
        let tol = BREAKPOINT_DEDUP_REL * self.frame;
        let idx = self.breakpoints.partition_point(|&b| b < t);
        let on_breakpoint = self.breakpoints.get(idx).is_some_and(|&b| b - t <= tol)
            || (idx > 0 && t - self.breakpoints[idx - 1] <= tol);
        if on_breakpoint {
            // The closed intervals of both neighbouring pieces meet here.
            return self.terms.iter().map(|term| term.energy_at(t, self.objective)).sum();
        }
        let piece = &self.pieces[idx.clamp(1, self.pieces.len()) - 1];
        self.piece_value(piece, t)
    }

    fn piece_value(&self, piece: &Piece, t: f64) -> ExtEnergy {
        piece.constant
            + piece
                .active
                .iter()
                .map(|&l| self.terms[l].row.cellular_energy(t, self.objective))
                .sum::<f64>()
    }

    /// Global minimiser of `F`; on equal values the smallest `t` wins. With
    /// every `Delta_l` empty, `F` is constant and `T` is returned.
    pub fn minimize(&self) -> (f64, ExtEnergy) {
        let mut best: Option<(f64, ExtEnergy)> = None;
        let mut consider = |t: f64, value: ExtEnergy| match best {
            Some((bt, bv)) if !(value < bv || (value == bv && t < bt)) => {}
            _ => best = Some((t, value)),
        };
        match self.objective {
            // Piecewise decreasing: the minimum sits at the right end of
            // some Delta_l.
            EnergyObjective::UserEnergy => {
                for term in &self.terms {
                    if let Some((_, hi)) = term.interval.bounds() {
                        consider(hi, self.evaluate(hi));
                    }
                }
            }
            // Piecewise convex: minimise each piece with a non-empty active
            // set (the outer pieces are constant and never better), and
            // check every breakpoint where F may jump down.
            EnergyObjective::SystemEnergy => {
                let tol = BISECTION_REL_TOL * self.frame;
                for piece in &self.pieces {
                    if piece.active.is_empty() || !piece.constant.is_finite() {
                        continue;
                    }
                    let t = minimize_convex(piece.start, piece.end, tol, |t| {
                        piece
                            .active
                            .iter()
                            .map(|&l| self.terms[l].row.cellular_energy_slope(t, self.objective))
                            .sum()
                    });
                    consider(t, self.piece_value(piece, t));
                }
                for term in &self.terms {
                    if let Some((lo, hi)) = term.interval.bounds() {
                        consider(lo, self.evaluate(lo));
                        consider(hi, self.evaluate(hi));
                    }
                }
            }
        }
        best.unwrap_or((self.frame, self.evaluate(self.frame)))
    }
}

/// Piecewise structure of `F` for an interference-free budget.
pub fn build_piecewise(budget: &LinkBudget, objective: EnergyObjective) -> PiecewiseCost {
    let d2d: Vec<ExtEnergy> = budget.rows.iter().map(|r| d2d_energy_ext(r, 0.0)).collect();
    PiecewiseCost::from_rows(&budget.rows, &d2d, objective)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoSolution {
    pub objective: EnergyObjective,
    pub t_ul_star: f64,
    pub modes: ModeVector,
    pub powers: Vec<PairPowers>,
    /// Energy charged to each pair under the objective.
    pub energies: Vec<f64>,
    pub total: f64,
}

impl FoSolution {
    pub fn d2d_set(&self) -> Vec<usize> {
        self.modes.d2d_set()
    }
}

/// Optimal common uplink time, modes and powers with orthogonal D2D channels.
pub fn solve_fo(budget: &LinkBudget, objective: EnergyObjective) -> Result<FoSolution> {
    let d2d: Vec<ExtEnergy> = budget.rows.iter().map(|r| d2d_energy_ext(r, 0.0)).collect();
    solve_fo_rows(&budget.rows, &d2d, objective)
}

/// FO solver over an arbitrary set of pairs with given D2D costs (used by
/// the branch-and-bound relaxation with interference-raised noise).
pub(crate) fn solve_fo_rows(rows: &[LinkRow], d2d: &[ExtEnergy], objective: EnergyObjective) -> Result<FoSolution> {
    let frame = rows.first().map_or(1.0, |r| r.radio.frame);
    if rows.is_empty() {
        return Ok(FoSolution {
            objective,
            t_ul_star: frame,
            modes: ModeVector(Vec::new()),
            powers: Vec::new(),
            energies: Vec::new(),
            total: 0.0,
        });
    }
    let cost = PiecewiseCost::from_rows(rows, d2d, objective);
    let (t, _) = cost.minimize();
    assign_at(rows, d2d, objective, t)
}

/// Per-pair mode choice at a fixed uplink time: cellular iff feasible at
/// `t` and no more expensive than D2D.
pub(crate) fn assign_at(rows: &[LinkRow], d2d: &[ExtEnergy], objective: EnergyObjective, t: f64) -> Result<FoSolution> {
    let mut modes = Vec::with_capacity(rows.len());
    let mut powers = Vec::with_capacity(rows.len());
    let mut energies = Vec::with_capacity(rows.len());
    for (row, &d2d) in rows.iter().zip(d2d) {
        let cell = if row.uplink_time_feasible(t) {
            ExtEnergy::Finite(row.cellular_energy(t, objective))
        } else {
            ExtEnergy::Infinite
        };
        match (cell, d2d) {
            (ExtEnergy::Finite(c), d) if ExtEnergy::Finite(c) <= d => {
                modes.push(Mode::Cellular);
                powers.push(row.cellular_powers(t));
                energies.push(c);
            }
            (_, ExtEnergy::Finite(e)) => {
                modes.push(Mode::D2d);
                powers.push(PairPowers { d2d: e / row.radio.frame, ..PairPowers::default() });
                energies.push(e);
            }
            _ => {
                return Err(Error::CellularInfeasible(format!(
                    "pair {} has no feasible mode at t_ul = {t}",
                    row.id
                )))
            }
        }
    }
    Ok(FoSolution {
        objective,
        t_ul_star: t,
        modes: ModeVector(modes),
        powers,
        total: energies.iter().sum(),
        energies,
    })
}
