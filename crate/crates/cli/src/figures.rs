//! Figure-ready tables derived from campaign rows.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, ensure};

use crate::solvers::{fmt_f64, ResultRow, Solver};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    /// Per-pair FO-UE saving over all-cellular, sorted within each seed and
    /// averaged per rank.
    GainCurve,
    /// Relative excess of each heuristic run over the B&B optimum.
    HeuristicGapHist,
    /// Mean channels and energy per solver.
    EnergyVsChannels,
    /// Mean explored nodes of the exact RS solvers.
    BnbNodeTable,
}

impl FigureKind {
    pub const ALL: [FigureKind; 4] =
        [FigureKind::GainCurve, FigureKind::HeuristicGapHist, FigureKind::EnergyVsChannels, FigureKind::BnbNodeTable];

    pub fn name(self) -> &'static str {
        match self {
            FigureKind::GainCurve => "gain-curve",
            FigureKind::HeuristicGapHist => "heuristic-gap-hist",
            FigureKind::EnergyVsChannels => "energy-vs-channels",
            FigureKind::BnbNodeTable => "bnb-node-table",
        }
    }

    pub fn parse(s: &str) -> anyhow::Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| anyhow::anyhow!("unknown figure `{s}`"))
    }
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl FigureTable {
    fn new(header: &[&str]) -> Self {
        FigureTable { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn emit_figure_data(kind: FigureKind, rows: &[ResultRow]) -> anyhow::Result<FigureTable> {
    Ok(match kind {
        FigureKind::GainCurve => {
            let mut t = FigureTable::new(&["rank", "mean_gain_j", "mean_gain_pct"]);
            for p in gain_curve(rows)? {
                t.rows.push(vec![p.rank.to_string(), fmt_f64(p.mean_gain_j), fmt_f64(p.mean_gain_pct)]);
            }
            t
        }
        FigureKind::HeuristicGapHist => {
            let mut t = FigureTable::new(&["theta", "seed", "heuristic_j", "optimal_j", "gap_pct"]);
            for g in heuristic_gaps(rows)? {
                t.rows.push(vec![
                    g.theta.to_string(),
                    g.seed.to_string(),
                    fmt_f64(g.heuristic_j),
                    fmt_f64(g.optimal_j),
                    fmt_f64(g.gap_pct),
                ]);
            }
            t
        }
        FigureKind::EnergyVsChannels => {
            let mut t = FigureTable::new(&["solver", "instances", "mean_channels", "mean_energy_j"]);
            for m in energy_vs_channels(rows)? {
                t.rows.push(vec![m.solver, m.instances.to_string(), fmt_f64(m.mean_channels), fmt_f64(m.mean_energy_j)]);
            }
            t
        }
        FigureKind::BnbNodeTable => {
            let mut t = FigureTable::new(&["solver", "instances", "mean_nodes_explored", "mean_leaves"]);
            for m in bnb_node_table(rows)? {
                t.rows.push(vec![m.solver, m.instances.to_string(), fmt_f64(m.mean_nodes), fmt_f64(m.mean_leaves)]);
            }
            t
        }
    })
}

/// Successful rows of one solver keyed by seed.
fn by_seed<'a>(rows: &'a [ResultRow], solver: &str) -> BTreeMap<u64, &'a ResultRow> {
    rows.iter().filter(|r| r.solver == solver && r.ok()).map(|r| (r.seed, r)).collect()
}

fn require(rows: &[ResultRow], figure: &str, solvers: &[&str]) -> anyhow::Result<()> {
    let missing: Vec<&str> =
        solvers.iter().copied().filter(|s| !rows.iter().any(|r| r.solver == *s && r.ok())).collect();
    ensure!(missing.is_empty(), "{figure} needs rows from: {}", missing.join(", "));
    Ok(())
}

/// Per-pair gain of FO-UE over all-cellular for one seed, sorted by
/// increasing percentage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGain {
    pub gain_j: f64,
    pub gain_pct: f64,
}

/// Sorted per-pair gains for every seed with both rows present.
pub fn pair_gains(rows: &[ResultRow]) -> anyhow::Result<Vec<(u64, Vec<PairGain>)>> {
    let (cell, fo) = (Solver::AllCellular.to_string(), Solver::FoUe.to_string());
    require(rows, "gain-curve", &[&cell, &fo])?;
    let cell_rows = by_seed(rows, &cell);
    let mut out = Vec::new();
    for (seed, fo_row) in by_seed(rows, &fo) {
        let Some(c) = cell_rows.get(&seed) else { continue };
        ensure!(c.pair_energies.len() == fo_row.pair_energies.len(), "seed {seed}: pair counts differ");
        let mut gains: Vec<PairGain> = c
            .pair_energies
            .iter()
            .zip(&fo_row.pair_energies)
            .map(|(&ec, &ef)| PairGain { gain_j: ec - ef, gain_pct: 100.0 * (ec - ef) / ec })
            .collect();
        gains.sort_by(|a, b| a.gain_pct.total_cmp(&b.gain_pct));
        out.push((seed, gains));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPoint {
    /// 1 for the smallest gain.
    pub rank: usize,
    pub mean_gain_j: f64,
    pub mean_gain_pct: f64,
}

pub fn gain_curve(rows: &[ResultRow]) -> anyhow::Result<Vec<GainPoint>> {
    let gains = pair_gains(rows)?;
    let Some(n) = gains.first().map(|(_, g)| g.len()) else { bail!("gain-curve: no seed has both rows") };
    ensure!(gains.iter().all(|(_, g)| g.len() == n), "gain-curve needs equal pair counts across seeds");
    let seeds = gains.len() as f64;
    Ok((0..n)
        .map(|k| GainPoint {
            rank: k + 1,
            mean_gain_j: gains.iter().map(|(_, g)| g[k].gain_j).sum::<f64>() / seeds,
            mean_gain_pct: gains.iter().map(|(_, g)| g[k].gain_pct).sum::<f64>() / seeds,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub theta: f64,
    pub seed: u64,
    pub heuristic_j: f64,
    pub optimal_j: f64,
    /// `100 * (heuristic - optimal) / optimal`.
    pub gap_pct: f64,
}

pub fn heuristic_gaps(rows: &[ResultRow]) -> anyhow::Result<Vec<GapRow>> {
    let bnb = Solver::RsUeBnb.to_string();
    require(rows, "heuristic-gap-hist", &[&bnb])?;
    let optimal = by_seed(rows, &bnb);
    let mut out = Vec::new();
    for r in rows.iter().filter(|r| r.ok()) {
        let Ok(Solver::RsUeHeuristic { theta }) = r.solver.parse::<Solver>() else { continue };
        if let Some(opt) = optimal.get(&r.seed) {
            out.push(GapRow {
                theta,
                seed: r.seed,
                heuristic_j: r.total_energy,
                optimal_j: opt.total_energy,
                gap_pct: 100.0 * (r.total_energy - opt.total_energy) / opt.total_energy,
            });
        }
    }
    ensure!(!out.is_empty(), "heuristic-gap-hist needs rows from: rs-ue-heuristic@<theta>");
    out.sort_by(|a, b| a.theta.total_cmp(&b.theta).then(a.seed.cmp(&b.seed)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverMeans {
    pub solver: String,
    pub instances: usize,
    pub mean_channels: f64,
    pub mean_energy_j: f64,
}

/// Means over the seeds solved by every listed solver, so the columns are
/// comparable.
pub fn energy_vs_channels(rows: &[ResultRow]) -> anyhow::Result<Vec<SolverMeans>> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.solver.as_str()) {
            names.push(&r.solver);
        }
    }
    ensure!(!names.is_empty(), "energy-vs-channels needs solver rows");
    let tables: Vec<BTreeMap<u64, &ResultRow>> = names.iter().map(|n| by_seed(rows, n)).collect();
    let common: Vec<u64> = tables[0].keys().copied().filter(|s| tables.iter().all(|t| t.contains_key(s))).collect();
    ensure!(!common.is_empty(), "energy-vs-channels: no seed solved by every solver");
    let k = common.len() as f64;
    Ok(names
        .iter()
        .zip(&tables)
        .map(|(name, t)| SolverMeans {
            solver: name.to_string(),
            instances: common.len(),
            mean_channels: common.iter().map(|s| t[s].channels_used as f64).sum::<f64>() / k,
            mean_energy_j: common.iter().map(|s| t[s].total_energy).sum::<f64>() / k,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeMeans {
    pub solver: String,
    pub instances: usize,
    pub mean_nodes: f64,
    pub mean_leaves: f64,
}

/// Exhaustive, random-branching and proposed-branching node means.
pub fn bnb_node_table(rows: &[ResultRow]) -> anyhow::Result<Vec<NodeMeans>> {
    let names = [Solver::RsUeExhaustive, Solver::RsUeBnbRandom, Solver::RsUeBnb].map(|s| s.to_string());
    require(rows, "bnb-node-table", &names.iter().map(String::as_str).collect::<Vec<_>>())?;
    Ok(names
        .iter()
        .map(|name| {
            let t = by_seed(rows, name);
            let k = t.len() as f64;
            NodeMeans {
                solver: name.clone(),
                instances: t.len(),
                mean_nodes: t.values().filter_map(|r| r.nodes_explored).sum::<u64>() as f64 / k,
                mean_leaves: t.values().filter_map(|r| r.leaves).sum::<u64>() as f64 / k,
            }
        })
        .collect())
}
