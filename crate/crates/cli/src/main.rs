use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use d2d_cli::area_map::d2d_area_map;
use d2d_cli::campaign::{run_campaign, Campaign};
use d2d_cli::solvers::{run_solver, ResultRow, Solver};
use d2d_core::{build_link_budget, random_scenario, CellScenario, EnergyObjective, PhysParams, SinrSystem};

/// Grid resolution of `map` at desk scale and with `--full-scale`.
const DESK_RESOLUTION: usize = 200;
const FULL_SCALE_RESOLUTION: usize = 1000;

#[derive(Parser)]
#[command(name = "d2d", version, about = "Energy-optimal D2D mode selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random scenario as JSON.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one scenario with one solver and print the result row as CSV.
    Solve {
        /// Scenario JSON; otherwise one is generated from --seed/--pairs.
        #[arg(long, conflicts_with_all = ["seed", "pairs"])]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        pairs: Option<usize>,
        /// One of: all-cellular, fo-ue, fo-se, rs-ue-bnb, rs-ue-bnb-random,
        /// rs-ue-exhaustive, rs-ue-heuristic[@theta].
        #[arg(long)]
        solver: String,
        /// Heuristic threshold; only valid with rs-ue-heuristic.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a campaign spec (TOML) and write result, summary and figure CSVs.
    Campaign {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory; overrides `out` in the spec.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Raise seed ranges to the full-scale count.
        #[arg(long)]
        full_scale: bool,
    },
    /// Classify receiver positions for a fixed transmitter and write a CSV grid.
    Map {
        #[arg(long)]
        tx_distance: f64,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, value_enum, default_value_t = Objective::Ue)]
        objective: Objective,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        full_scale: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    Ue,
    Se,
}

impl From<Objective> for EnergyObjective {
    fn from(o: Objective) -> Self {
        match o {
            Objective::Ue => EnergyObjective::UserEnergy,
            Objective::Se => EnergyObjective::SystemEnergy,
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen { seed, pairs, out } => {
            let s = random_scenario(pairs, seed, &PhysParams::urban_lte())?;
            emit(out.as_deref(), &(s.to_json() + "\n"))
        }
        Command::Solve { scenario, seed, pairs, solver, theta, out } => {
            let mut solver: Solver = solver.parse()?;
            if let Some(theta) = theta {
                let Solver::RsUeHeuristic { .. } = solver else {
                    bail!("--theta only applies to rs-ue-heuristic");
                };
                solver = Solver::heuristic(theta);
            }
            let s = match scenario {
                Some(path) => {
                    CellScenario::load(&path).with_context(|| format!("loading {}", path.display()))?
                }
                None => random_scenario(pairs.unwrap_or(10), seed.unwrap_or(0), &PhysParams::urban_lte())?,
            };
            let budget = build_link_budget(&s)?;
            let sys = SinrSystem::new(&budget);
            let row = run_solver(&budget, &sys, s.seed, solver);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(ResultRow::HEADER)?;
            w.write_record(row.record())?;
            emit(out.as_deref(), &String::from_utf8(w.into_inner()?)?)?;
            if let Some(e) = &row.error {
                bail!("{solver} failed: {e}");
            }
            Ok(())
        }
        Command::Campaign { spec, out, full_scale } => {
            let mut c = Campaign::load(&spec)?;
            if full_scale {
                c = c.full_scale();
            }
            let dir = out.or_else(|| c.out.clone()).context("no output directory: pass --out or set `out`")?;
            let output = run_campaign(&c)?;
            let failed = output.rows.iter().filter(|r| !r.ok()).count();
            for path in output.write_all(&dir)? {
                println!("wrote {}", path.display());
            }
            if failed > 0 {
                eprintln!("warning: {failed} of {} runs failed; see the status column", output.rows.len());
            }
            Ok(())
        }
        Command::Map { tx_distance, resolution, objective, out, full_scale } => {
            let default = if full_scale { FULL_SCALE_RESOLUTION } else { DESK_RESOLUTION };
            let map = d2d_area_map(tx_distance, resolution.unwrap_or(default), objective.into(), &PhysParams::urban_lte())?;
            map.write_csv(&out)?;
            println!("cells: {}, d2d-optimal fraction: {:.4}", map.cells.len(), map.d2d_fraction());
            if let Some(dev) = map.max_kappa_deviation() {
                let (agree, checked) = map.kappa_agreement();
                println!("max |kappa - 1|: {dev:.6e}, kappa rule agrees on {agree}/{checked} cells");
                if agree != checked {
                    bail!("kappa rule disagrees with the energy comparison on {} cells", checked - agree);
                }
            }
            Ok(())
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}
