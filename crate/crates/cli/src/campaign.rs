//! Monte Carlo campaigns over random scenarios.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context};
use d2d_core::{build_link_budget, random_scenario, PhysParams, SinrSystem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::solvers::{fmt_f64, run_solver, ResultRow, Solver};

/// Seeds used at desk scale and with `--full-scale`.
pub const DESK_SEEDS: u64 = 100;
pub const FULL_SCALE_SEEDS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl Seeds {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Range { start: 0, count: DESK_SEEDS }
    }
}

/// Campaign description, as read from a TOML file.
///
/// ```toml
/// pairs = 10
/// seeds = { start = 0, count = 100 }
/// solvers = ["all-cellular", "fo-ue", "rs-ue-bnb", "rs-ue-heuristic"]
/// thetas = [1.0, 1.5, 2.0, 4.0]
/// out = "results/l10"
/// ```
///
/// `rs-ue-heuristic` without an explicit `@theta` expands to one solver per
/// entry of `thetas`. A `[params]` table overrides the urban LTE defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    pub pairs: usize,
    #[serde(default)]
    pub seeds: Seeds,
    pub solvers: Vec<String>,
    #[serde(default)]
    pub thetas: Vec<f64>,
    #[serde(default)]
    pub params: Option<PhysParams>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Campaign {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let c: Campaign = toml::from_str(text).context("campaign spec")?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(self.pairs >= 1, "pairs must be at least 1");
        let seeds = self.seeds.expand();
        ensure!(!seeds.is_empty(), "at least one seed is required");
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        ensure!(sorted.len() == seeds.len(), "seeds must be distinct");
        ensure!(!self.solvers.is_empty(), "at least one solver is required");
        self.solver_list()?;
        if let Some(p) = &self.params {
            p.validate()?;
        }
        Ok(())
    }

    pub fn params(&self) -> PhysParams {
        self.params.clone().unwrap_or_default()
    }

    /// Parsed solvers with heuristic entries expanded over `thetas`.
    pub fn solver_list(&self) -> anyhow::Result<Vec<Solver>> {
        let mut out = Vec::new();
        for name in &self.solvers {
            if name.trim().eq_ignore_ascii_case("rs-ue-heuristic") && !self.thetas.is_empty() {
                out.extend(self.thetas.iter().map(|&t| Solver::heuristic(t)));
            } else {
                out.push(name.parse()?);
            }
        }
        for s in &out {
            if let Solver::RsUeHeuristic { theta } = s {
                ensure!(*theta >= 1.0, "heuristic theta must be >= 1, got {theta}");
            }
        }
        Ok(out)
    }

    /// Replaces a default seed range with the full-scale seed count.
    pub fn full_scale(mut self) -> Self {
        if let Seeds::Range { count, .. } = &mut self.seeds {
            *count = (*count).max(FULL_SCALE_SEEDS);
        }
        self
    }
}

/// All result rows of a campaign, in seed order then solver order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CampaignOutput {
    pub rows: Vec<ResultRow>,
}

/// Runs every solver on every seed. Instances are spread over the rayon
/// pool; rows are merged back in seed order, so output does not depend on
/// scheduling. A scenario or solver failure is recorded in its row.
pub fn run_campaign(c: &Campaign) -> anyhow::Result<CampaignOutput> {
    c.validate()?;
    let solvers = c.solver_list()?;
    let params = c.params();
    let per_seed: Vec<Vec<ResultRow>> = c
        .seeds
        .expand()
        .into_par_iter()
        .map(|seed| {
            let budget = random_scenario(c.pairs, seed, &params).and_then(|s| build_link_budget(&s));
            match budget {
                Ok(budget) => {
                    let sys = SinrSystem::new(&budget);
                    solvers.iter().map(|&s| run_solver(&budget, &sys, seed, s)).collect()
                }
                Err(e) => {
                    let e = anyhow::Error::from(e).context("scenario generation");
                    solvers.iter().map(|&s| ResultRow::failed(seed, s, c.pairs, &e, Default::default())).collect()
                }
            }
        })
        .collect();
    Ok(CampaignOutput { rows: per_seed.into_iter().flatten().collect() })
}

impl CampaignOutput {
    pub fn rows_for(&self, solver: &str) -> impl Iterator<Item = &ResultRow> {
        let solver = solver.to_string();
        self.rows.iter().filter(move |r| r.solver == solver)
    }

    pub fn write_results(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(ResultRow::HEADER)?;
        for row in &self.rows {
            w.write_record(row.record())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Wall times live apart from the results so that `results.csv` is
    /// byte-identical across runs.
    pub fn write_timing(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["seed", "solver", "wall_time_s"])?;
        for row in &self.rows {
            w.write_record([row.seed.to_string(), row.solver.clone(), fmt_f64(row.wall_time.as_secs_f64())])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-solver means and quantiles.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut names: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.solver.as_str()) {
                names.push(&r.solver);
            }
        }
        names
            .into_iter()
            .map(|name| {
                let ok: Vec<&ResultRow> = self.rows_for(name).filter(|r| r.ok()).collect();
                let failed = self.rows_for(name).count() - ok.len();
                let mut energy: Vec<f64> = ok.iter().map(|r| r.total_energy).collect();
                energy.sort_by(f64::total_cmp);
                let mean = |v: &mut dyn Iterator<Item = f64>| {
                    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
                    if n == 0 { f64::NAN } else { s / n as f64 }
                };
                SummaryRow {
                    solver: name.to_string(),
                    instances: ok.len(),
                    failed,
                    mean_energy: mean(&mut energy.iter().copied()),
                    q10_energy: quantile(&energy, 0.1),
                    median_energy: quantile(&energy, 0.5),
                    q90_energy: quantile(&energy, 0.9),
                    mean_channels: mean(&mut ok.iter().map(|r| r.channels_used as f64)),
                    mean_nodes: mean(&mut ok.iter().filter_map(|r| r.nodes_explored).map(|n| n as f64)),
                }
            })
            .collect()
    }

    pub fn write_summary(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "solver",
            "instances",
            "failed",
            "mean_energy_j",
            "q10_energy_j",
            "median_energy_j",
            "q90_energy_j",
            "mean_channels",
            "mean_nodes_explored",
        ])?;
        for s in self.summary() {
            w.write_record([
                s.solver,
                s.instances.to_string(),
                s.failed.to_string(),
                fmt_f64(s.mean_energy),
                fmt_f64(s.q10_energy),
                fmt_f64(s.median_energy),
                fmt_f64(s.q90_energy),
                fmt_f64(s.mean_channels),
                fmt_f64(s.mean_nodes),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes results, timing and summary CSVs plus every figure table the
    /// available rows support. Returns the written paths.
    pub fn write_all(&self, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        for (name, f) in [
            ("results.csv", Self::write_results as fn(&Self, &Path) -> anyhow::Result<()>),
            ("timing.csv", Self::write_timing),
            ("summary.csv", Self::write_summary),
        ] {
            let path = dir.join(name);
            f(self, &path)?;
            written.push(path);
        }
        for kind in crate::figures::FigureKind::ALL {
            if let Ok(table) = crate::figures::emit_figure_data(kind, &self.rows) {
                let path = dir.join(format!("{}.csv", kind.name()));
                table.write(&path)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub solver: String,
    pub instances: usize,
    pub failed: usize,
    pub mean_energy: f64,
    pub q10_energy: f64,
    pub median_energy: f64,
    pub q90_energy: f64,
    pub mean_channels: f64,
    pub mean_nodes: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if i + 1 < n {
                sorted[i] + frac * (sorted[i + 1] - sorted[i])
            } else {
                sorted[i]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parses_and_expands_heuristics() {
        let c = Campaign::from_toml(
            r#"
pairs = 4
seeds = { start = 10, count = 3 }
solvers = ["fo-ue", "rs-ue-heuristic"]
thetas = [1.0, 2.0]
"#,
        )
        .unwrap();
        assert_eq!(c.seeds.expand(), vec![10, 11, 12]);
        assert_eq!(c.solver_list().unwrap(), vec![Solver::FoUe, Solver::heuristic(1.0), Solver::heuristic(2.0)]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(Campaign::from_toml("pairs = 0\nsolvers = [\"fo-ue\"]").is_err());
        assert!(Campaign::from_toml("pairs = 3\nseeds = [1, 1]\nsolvers = [\"fo-ue\"]").is_err());
        assert!(Campaign::from_toml("pairs = 3\nsolvers = [\"magic\"]").is_err());
        assert!(Campaign::from_toml("pairs = 3\nsolvers = [\"rs-ue-heuristic@0.5\"]").is_err());
        assert!(Campaign::from_toml("pairs = 3\nsolvers = [\"fo-ue\"]\ntypo = 1").is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert!((quantile(&v, 0.1) - 1.4).abs() < 1e-15);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn full_scale_raises_the_seed_count() {
        let c = Campaign::from_toml("pairs = 3\nsolvers = [\"fo-ue\"]").unwrap().full_scale();
        assert_eq!(c.seeds.expand().len(), FULL_SCALE_SEEDS as usize);
    }
}
