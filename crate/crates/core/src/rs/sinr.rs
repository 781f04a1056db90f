//! SINR-target model of the shared D2D channel and its feasibility test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::scenario::LinkBudget;

/// Power iteration stops once the Collatz–Wielandt bounds are this close
/// (relative).
const PERRON_REL_TOL: f64 = 1e-12;
const PERRON_MAX_ITERS: usize = 10_000;
/// Inside this band around 1 the linear-solve test decides.
const BOUNDARY_BAND: f64 = 1e-10;

/// Per-pair SINR targets and the normalised interference matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrSystem {
    /// `exp(b / (W T)) - 1`.
    pub gamma_tgt: Vec<f64>,
    /// `gamma_tgt * sigma^2 / G_ll`, W.
    pub eta: Vec<f64>,
    /// `h[l][j] = gamma_tgt_l * G_jl / G_ll` for `l != j`, zero diagonal.
    pub h: Vec<Vec<f64>>,
    pub p_max: Vec<f64>,
    /// `gain[j][l]`: Tx-j to Rx-l, as in [`LinkBudget::cross`].
    pub gain: Vec<Vec<f64>>,
    pub noise: f64,
    pub frame: f64,
}

/// Bracket on the Perron root of a principal submatrix of `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerronRoot {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

impl PerronRoot {
    pub fn estimate(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Outcome of the shared-channel feasibility test for a D2D set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum D2dFeasibility {
    /// Minimum powers, aligned with the queried set.
    Feasible { powers: Vec<f64> },
    /// `rho(H_D) >= 1`: no positive power vector meets every target.
    Unstable { rho: f64 },
    /// Minimum powers exist but some exceed the device maximum.
    PowerLimited { powers: Vec<f64> },
}

impl D2dFeasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, D2dFeasibility::Feasible { .. })
    }

    /// Componentwise-minimum powers, when they exist.
    pub fn min_powers(&self) -> Option<&[f64]> {
        match self {
            D2dFeasibility::Feasible { powers } | D2dFeasibility::PowerLimited { powers } => Some(powers),
            D2dFeasibility::Unstable { .. } => None,
        }
    }
}

impl SinrSystem {
    pub fn new(budget: &LinkBudget) -> Self {
        let r = &budget.radio;
        let gamma_tgt: Vec<f64> =
            budget.rows.iter().map(|row| (row.demand / (r.bandwidth * r.frame)).exp_m1()).collect();
        let n = budget.len();
        let g_ll = |l: usize| budget.cross[l][l];
        let eta = (0..n).map(|l| gamma_tgt[l] * r.noise / g_ll(l)).collect();
        let h = (0..n)
            .map(|l| {
                (0..n)
                    .map(|j| if j == l { 0.0 } else { gamma_tgt[l] * budget.cross[j][l] / g_ll(l) })
                    .collect()
            })
            .collect();
        SinrSystem {
            gamma_tgt,
            eta,
            h,
            p_max: vec![r.p_max_ue; n],
            gain: budget.cross.clone(),
            noise: r.noise,
            frame: r.frame,
        }
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    /// Interference at Rx-`l` from the transmitters in `set` at `powers`.
    pub fn interference(&self, l: usize, set: &[usize], powers: &[f64]) -> f64 {
        set.iter().zip(powers).filter(|(&j, _)| j != l).map(|(&j, &p)| p * self.gain[j][l]).sum()
    }

    /// Perron root of `H` restricted to `set`, bracketed by Collatz–Wielandt
    /// bounds from power iteration on the shifted matrix `H + cI`.
    pub fn perron_root(&self, set: &[usize]) -> PerronRoot {
        self.perron_iterate(set, |_| false)
    }

    /// Power iteration, stopping early once `decided` accepts the bracket.
    fn perron_iterate(&self, set: &[usize], decided: impl Fn(&PerronRoot) -> bool) -> PerronRoot {
        let n = set.len();
        if n <= 1 {
            return PerronRoot { lower: 0.0, upper: 0.0, iterations: 0 };
        }
        let mut x = vec![1.0; n];
        let mut hx = vec![0.0; n];
        let mut root = PerronRoot { lower: 0.0, upper: f64::INFINITY, iterations: 0 };
        for k in 0..PERRON_MAX_ITERS {
            for (a, &l) in set.iter().enumerate() {
                hx[a] = set.iter().enumerate().map(|(b, &j)| self.h[l][j] * x[b]).sum();
            }
            let ratios = hx.iter().zip(&x).map(|(y, x)| y / x);
            let lower = ratios.clone().fold(f64::INFINITY, f64::min);
            let upper = ratios.fold(0.0, f64::max);
            root = PerronRoot { lower: lower.max(root.lower), upper: upper.min(root.upper), iterations: k + 1 };
            if root.upper - root.lower <= PERRON_REL_TOL * root.upper || decided(&root) {
                break;
            }
            // The shift keeps the iteration primitive; any c > 0 works and
            // c near rho damps the oscillating part of the spectrum.
            let shift = lower.max(f64::MIN_POSITIVE);
            let mut norm = 0.0;
            for a in 0..n {
                x[a] = hx[a] + shift * x[a];
                norm += x[a];
            }
            if !(norm > 0.0 && norm.is_finite()) {
                break;
            }
            x.iter_mut().for_each(|v| *v /= norm);
        }
        root
    }

    /// Componentwise-minimum solution of `(I - H_D) p = eta_D`, or `None` when
    /// it does not exist or is not positive.
    pub fn solve_min_powers(&self, set: &[usize]) -> Option<Vec<f64>> {
        let n = set.len();
        let m = DMatrix::from_fn(n, n, |a, b| if a == b { 1.0 } else { -self.h[set[a]][set[b]] });
        let rhs = DVector::from_iterator(n, set.iter().map(|&l| self.eta[l]));
        let p = m.lu().solve(&rhs)?;
        let ok = p.iter().zip(set).all(|(&v, &l)| v.is_finite() && (v > 0.0 || (v == 0.0 && self.eta[l] == 0.0)));
        ok.then(|| p.iter().copied().collect())
    }
}

/// Whether every pair in `set` can meet its SINR target on the shared
/// channel within its power limit. Pairs with zero demand need no power
/// and cause no interference.
pub fn d2d_set_feasible(sys: &SinrSystem, set: &[usize]) -> D2dFeasibility {
    let active: Vec<usize> = set.iter().copied().filter(|&l| sys.gamma_tgt[l] > 0.0).collect();
    let active_powers = match active.len() {
        0 => Vec::new(),
        1 => vec![sys.eta[active[0]]],
        _ => {
            let root = sys.perron_iterate(&active, |r| r.upper < 1.0 - BOUNDARY_BAND || r.lower > 1.0 + BOUNDARY_BAND);
            if root.lower > 1.0 + BOUNDARY_BAND {
                return D2dFeasibility::Unstable { rho: root.estimate() };
            }
            // Below the band, or too close to call: a positive solution of
            // the linear system exists exactly when rho < 1.
            match sys.solve_min_powers(&active) {
                Some(p) => p,
                None => return D2dFeasibility::Unstable { rho: root.estimate() },
            }
        }
    };
    let mut powers = vec![0.0; set.len()];
    for (slot, &l) in set.iter().enumerate() {
        if let Some(a) = active.iter().position(|&j| j == l) {
            powers[slot] = active_powers[a];
        }
    }
    if set.iter().zip(&powers).all(|(&l, &p)| p <= sys.p_max[l]) {
        D2dFeasibility::Feasible { powers }
    } else {
        D2dFeasibility::PowerLimited { powers }
    }
}
