//! Where in the cell a single pair prefers D2D mode, for a fixed transmitter.

use std::path::Path;

use anyhow::ensure;
use d2d_core::scenario::MIN_DISTANCE;
use d2d_core::scenario::edge_demand;
use d2d_core::{pathloss_gain, single_pair_select, EnergyObjective, LinkRow, Mode, PhysParams, Point};

use crate::solvers::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaClass {
    D2dOptimal,
    CellularOptimal,
    /// D2D cannot meet the demand at maximum power.
    D2dInfeasible,
}

impl AreaClass {
    pub fn name(self) -> &'static str {
        match self {
            AreaClass::D2dOptimal => "d2d-optimal",
            AreaClass::CellularOptimal => "cellular-optimal",
            AreaClass::D2dInfeasible => "d2d-infeasible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaCell {
    /// Receiver position, at the centre of the grid cell.
    pub rx: Point,
    /// Ground truth from the single-pair energy comparison.
    pub class: AreaClass,
    /// Distance-ratio threshold at this receiver's distance to the BS (UE
    /// only).
    pub kappa: Option<f64>,
    /// Classification by `D_ll < kappa * D_l0` (UE only).
    pub kappa_class: Option<AreaClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaMap {
    pub tx: Point,
    pub resolution: usize,
    pub objective: EnergyObjective,
    /// Grid cells whose centre lies inside the cell disc, row-major from the
    /// bottom-left corner.
    pub cells: Vec<AreaCell>,
}

impl AreaMap {
    pub fn count(&self, class: AreaClass) -> usize {
        self.cells.iter().filter(|c| c.class == class).count()
    }

    /// Share of receiver positions where D2D is optimal.
    pub fn d2d_fraction(&self) -> f64 {
        self.count(AreaClass::D2dOptimal) as f64 / self.cells.len() as f64
    }

    /// `max |kappa - 1|` over the grid; `None` for the SE objective.
    pub fn max_kappa_deviation(&self) -> Option<f64> {
        self.cells.iter().map(|c| c.kappa.map(|k| (k - 1.0).abs())).try_fold(0.0, |m, d| d.map(|d| f64::max(m, d)))
    }

    /// Cells where the kappa rule and the energy comparison agree, and the
    /// number of cells checked.
    pub fn kappa_agreement(&self) -> (usize, usize) {
        let checked: Vec<_> = self.cells.iter().filter_map(|c| c.kappa_class.map(|k| k == c.class)).collect();
        (checked.iter().filter(|&&ok| ok).count(), checked.len())
    }

    pub fn write_csv(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["rx_x", "rx_y", "class", "kappa", "kappa_class"])?;
        for c in &self.cells {
            w.write_record([
                fmt_f64(c.rx.x),
                fmt_f64(c.rx.y),
                c.class.name().to_string(),
                c.kappa.map(fmt_f64).unwrap_or_default(),
                c.kappa_class.map(|k| k.name().to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Classifies receiver positions on a `resolution x resolution` grid over
/// the cell for a transmitter at `tx_distance` from the BS on the x axis.
/// The pair carries the edge demand used by generated scenarios.
pub fn d2d_area_map(
    tx_distance: f64,
    resolution: usize,
    objective: EnergyObjective,
    params: &PhysParams,
) -> anyhow::Result<AreaMap> {
    params.validate()?;
    let radius = params.cell_radius;
    ensure!(
        tx_distance > 0.0 && tx_distance < radius,
        "tx distance must lie in (0, {radius}), got {tx_distance}"
    );
    ensure!(resolution >= 1, "resolution must be at least 1");
    let bs = Point::ORIGIN;
    let tx = Point::new(tx_distance, 0.0);
    let demand = edge_demand(params);
    let radio = params.radio();
    let g_l0 = pathloss_gain(tx_distance, params)?;
    let step = 2.0 * radius / resolution as f64;
    let mut cells = Vec::new();
    for iy in 0..resolution {
        for ix in 0..resolution {
            let rx = Point::new(-radius + (ix as f64 + 0.5) * step, -radius + (iy as f64 + 0.5) * step);
            let d_0l = rx.distance(bs);
            if d_0l > radius || d_0l == 0.0 {
                continue;
            }
            let g_ll = params.ref_gain * rx.distance(tx).max(MIN_DISTANCE).powf(-params.pathloss_exponent);
            let row = LinkRow::from_gains(1, demand, g_ll, g_l0, pathloss_gain(d_0l, params)?, radio);
            let d2d_ok = row.d2d_power(0.0) <= radio.p_max_ue;
            let class = match single_pair_select(&row, objective)?.mode {
                Mode::D2d => AreaClass::D2dOptimal,
                Mode::Cellular if d2d_ok => AreaClass::CellularOptimal,
                Mode::Cellular => AreaClass::D2dInfeasible,
            };
            let (kappa, kappa_class) = match objective {
                EnergyObjective::UserEnergy => {
                    let k = kappa(d_0l, demand, params);
                    let d_ll = rx.distance(tx).max(MIN_DISTANCE);
                    let c = match (d2d_ok, d_ll < k * tx_distance.max(MIN_DISTANCE)) {
                        (false, _) => AreaClass::D2dInfeasible,
                        (true, true) => AreaClass::D2dOptimal,
                        (true, false) => AreaClass::CellularOptimal,
                    };
                    (Some(k), Some(c))
                }
                EnergyObjective::SystemEnergy => (None, None),
            };
            cells.push(AreaCell { rx, class, kappa, kappa_class });
        }
    }
    Ok(AreaMap { tx, resolution, objective, cells })
}

/// UE distance-ratio threshold for a receiver `d_0l` from the BS: D2D beats
/// cellular iff `D_ll < kappa * D_l0`, with
/// `kappa = ((e^{b/(W t*)} - 1) t* / ((e^{b/(W T)} - 1) T))^{1/alpha}` and
/// `t* = T - b / r_dl_max`.
pub fn kappa(d_0l: f64, demand: f64, params: &PhysParams) -> f64 {
    let w = params.bandwidth_hz;
    let frame = params.frame;
    let g_0l = params.ref_gain * d_0l.max(MIN_DISTANCE).powf(-params.pathloss_exponent);
    let r_dl = w * (params.p_max_bs * g_0l / params.noise_power()).ln_1p();
    let t_star = frame - demand / r_dl;
    let cell = (demand / (w * t_star)).exp_m1() * t_star;
    let d2d = (demand / (w * frame)).exp_m1() * frame;
    (cell / d2d).powf(1.0 / params.pathloss_exponent)
}
