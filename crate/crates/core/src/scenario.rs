//! Problem instances: physical parameters, pair geometry, the path-loss
//! channel model and the per-pair link budget derived from them.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gains are evaluated at no less than this distance (metres).
pub const MIN_DISTANCE: f64 = 1.0;

/// Radius slack when checking that a position lies inside the cell.
const RADIUS_SLACK: f64 = 1e-9;

/// Attempts per pair before random placement gives up.
const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(radius: f64, angle: f64) -> Self {
        Point::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Physical parameters of the cell. Noise is given as a density in dBm/Hz
/// and converted to watts once, by [`PhysParams::noise_power`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub pathloss_exponent: f64,
    /// Channel gain at the 1 m reference distance.
    pub ref_gain: f64,
    pub p_max_bs: f64,
    pub p_max_ue: f64,
    /// Frame length; any consistent time unit.
    pub frame: f64,
    pub cell_radius: f64,
    /// Informational only; the channel model does not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_hz: Option<f64>,
}

impl PhysParams {
    /// Urban LTE deployment used throughout the experiments: 5 MHz channels,
    /// -174 dBm/Hz noise, exponent 4, G0 = 5.7e-4, 40 W / 0.25 W power caps,
    /// unit frame, 500 m radius, 1 GHz carrier.
    pub fn urban_lte() -> Self {
        PhysParams {
            bandwidth_hz: 5e6,
            noise_density_dbm_hz: -174.0,
            pathloss_exponent: 4.0,
            ref_gain: 5.7e-4,
            p_max_bs: 40.0,
            p_max_ue: 0.25,
            frame: 1.0,
            cell_radius: 500.0,
            carrier_hz: Some(1e9),
        }
    }

    /// Noise power over one channel, in watts.
    pub fn noise_power(&self) -> f64 {
        10f64.powf((self.noise_density_dbm_hz - 30.0) / 10.0) * self.bandwidth_hz
    }

    pub fn radio(&self) -> Radio {
        Radio {
            bandwidth: self.bandwidth_hz,
            noise: self.noise_power(),
            frame: self.frame,
            p_max_ue: self.p_max_ue,
            p_max_bs: self.p_max_bs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("pathloss_exponent", self.pathloss_exponent),
            ("ref_gain", self.ref_gain),
            ("p_max_bs", self.p_max_bs),
            ("p_max_ue", self.p_max_ue),
            ("frame", self.frame),
            ("cell_radius", self.cell_radius),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {value}")));
            }
        }
        if !self.noise_density_dbm_hz.is_finite() {
            return Err(Error::InvalidParams("noise_density_dbm_hz must be finite".into()));
        }
        if self.pathloss_exponent < 2.0 {
            return Err(Error::InvalidParams(format!(
                "pathloss_exponent must be >= 2, got {}",
                self.pathloss_exponent
            )));
        }
        let noise = self.noise_power();
        if !(noise.is_finite() && noise > 0.0) {
            return Err(Error::InvalidParams(format!("derived noise power {noise} W is not positive")));
        }
        Ok(())
    }
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams::urban_lte()
    }
}

/// The scalar radio constants every energy formula needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radio {
    pub bandwidth: f64,
    /// Noise power sigma^2 in W.
    pub noise: f64,
    pub frame: f64,
    pub p_max_ue: f64,
    pub p_max_bs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPair {
    pub id: u32,
    pub tx: Point,
    pub rx: Point,
    /// Traffic demand per frame, in nats.
    #[serde(rename = "b")]
    pub demand: f64,
}

/// A validated single-cell problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScenario")]
pub struct CellScenario {
    pub params: PhysParams,
    pub bs: Point,
    pub pairs: Vec<UserPair>,
    pub seed: u64,
}

#[derive(Deserialize)]
struct RawScenario {
    params: PhysParams,
    #[serde(default)]
    bs: Point,
    pairs: Vec<UserPair>,
    #[serde(default)]
    seed: u64,
}

impl TryFrom<RawScenario> for CellScenario {
    type Error = Error;

    fn try_from(raw: RawScenario) -> Result<Self> {
        CellScenario::new(raw.params, raw.bs, raw.pairs, raw.seed)
    }
}

impl CellScenario {
    /// Validates the parameters, the pair list and joint cellular
    /// feasibility (a common uplink time must exist for all pairs).
    pub fn new(params: PhysParams, bs: Point, pairs: Vec<UserPair>, seed: u64) -> Result<Self> {
        params.validate()?;
        if pairs.is_empty() {
            return Err(Error::InvalidScenario("scenario has no pairs".into()));
        }
        let reach = params.cell_radius * (1.0 + RADIUS_SLACK);
        for (i, pair) in pairs.iter().enumerate() {
            if pair.id as usize != i + 1 {
                return Err(Error::InvalidScenario(format!(
                    "pair ids must be 1..=L in order; position {} has id {}",
                    i + 1,
                    pair.id
                )));
            }
            if !(pair.demand.is_finite() && pair.demand > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "pair {}: demand must be positive, got {}",
                    pair.id, pair.demand
                )));
            }
            for (what, p) in [("tx", pair.tx), ("rx", pair.rx)] {
                if !(p.x.is_finite() && p.y.is_finite()) || p.distance(bs) > reach {
                    return Err(Error::InvalidScenario(format!(
                        "pair {}: {what} position ({}, {}) outside the cell",
                        pair.id, p.x, p.y
                    )));
                }
            }
        }
        let scenario = CellScenario { params, bs, pairs, seed };
        build_link_budget(&scenario)?;
        Ok(scenario)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Link budget of a validated scenario.
    pub fn budget(&self) -> LinkBudget {
        build_link_budget(self).expect("validated scenario has a valid link budget")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// Path-loss gain `G0 * d^-alpha`, with distances below 1 m clamped to 1 m.
pub fn pathloss_gain(distance: f64, params: &PhysParams) -> Result<f64> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {distance}")));
    }
    Ok(params.ref_gain * distance.max(MIN_DISTANCE).powf(-params.pathloss_exponent))
}

/// Gain of a device-to-device link; coincident devices sit at the 1 m floor.
fn device_gain(a: Point, b: Point, params: &PhysParams) -> f64 {
    params.ref_gain * a.distance(b).max(MIN_DISTANCE).powf(-params.pathloss_exponent)
}

/// `W ln(1 + p G / sigma^2)`, the interference-free Shannon rate.
fn max_rate(radio: &Radio, power: f64, gain: f64) -> f64 {
    radio.bandwidth * (power * gain / radio.noise).ln_1p()
}

/// Quantities derived for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRow {
    pub id: u32,
    /// Demand per frame, nats.
    pub demand: f64,
    /// Direct D2D gain, Tx-l to Rx-l.
    pub g_ll: f64,
    /// Uplink gain, Tx-l to the base station.
    pub g_l0: f64,
    /// Downlink gain, base station to Rx-l.
    pub g_0l: f64,
    pub r_ul_max: f64,
    pub r_dl_max: f64,
    pub r_d2d_max: f64,
    /// Shortest feasible uplink time, `b / r_ul_max`.
    pub ul_lo: f64,
    /// Longest feasible uplink time, `T - b / r_dl_max`.
    pub ul_hi: f64,
    pub radio: Radio,
}

impl LinkRow {
    /// Builds a row directly from gains; rates and the feasible uplink
    /// interval are derived.
    pub fn from_gains(id: u32, demand: f64, g_ll: f64, g_l0: f64, g_0l: f64, radio: Radio) -> Self {
        let r_ul_max = max_rate(&radio, radio.p_max_ue, g_l0);
        let r_dl_max = max_rate(&radio, radio.p_max_bs, g_0l);
        let r_d2d_max = max_rate(&radio, radio.p_max_ue, g_ll);
        let (ul_lo, ul_hi) = if demand == 0.0 {
            (0.0, radio.frame)
        } else {
            (demand / r_ul_max, radio.frame - demand / r_dl_max)
        };
        LinkRow {
            id,
            demand,
            g_ll,
            g_l0,
            g_0l,
            r_ul_max,
            r_dl_max,
            r_d2d_max,
            ul_lo,
            ul_hi,
            radio,
        }
    }

    /// Whether `t` is a power-feasible common uplink time for this pair.
    pub fn uplink_time_feasible(&self, t: f64) -> bool {
        self.ul_lo <= t && t <= self.ul_hi
    }
}

/// Per-pair link quantities plus the full cross-gain matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub radio: Radio,
    pub rows: Vec<LinkRow>,
    /// `cross[j][l]` is the gain from Tx-j to Rx-l; the diagonal holds
    /// the direct gains.
    pub cross: Vec<Vec<f64>>,
}

impl LinkBudget {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn frame(&self) -> f64 {
        self.radio.frame
    }

    /// Joint cellular feasibility: `max_l ul_lo <= min_l ul_hi`.
    pub fn common_uplink_window(&self) -> Option<(f64, f64)> {
        let lo = self.rows.iter().map(|r| r.ul_lo).fold(0.0, f64::max);
        let hi = self.rows.iter().map(|r| r.ul_hi).fold(self.radio.frame, f64::min);
        (lo <= hi).then_some((lo, hi))
    }

    /// Multiplies every off-diagonal cross gain by `factor`.
    pub fn scale_cross_gains(&mut self, factor: f64) {
        for (j, row) in self.cross.iter_mut().enumerate() {
            for (l, g) in row.iter_mut().enumerate() {
                if j != l {
                    *g *= factor;
                }
            }
        }
    }
}

/// Derives gains, maximum rates and feasible uplink intervals for every pair.
///
/// Fails with [`Error::Domain`] if a device sits exactly on the base
/// station, and with [`Error::CellularInfeasible`] if a pair, or the pair set
/// jointly, has no power-feasible uplink/downlink split.
pub fn build_link_budget(s: &CellScenario) -> Result<LinkBudget> {
    let params = &s.params;
    let radio = params.radio();
    let mut rows = Vec::with_capacity(s.pairs.len());
    for pair in &s.pairs {
        let g_l0 = pathloss_gain(pair.tx.distance(s.bs), params)
            .map_err(|e| Error::Domain(format!("pair {} tx co-located with the base station: {e}", pair.id)))?;
        let g_0l = pathloss_gain(pair.rx.distance(s.bs), params)
            .map_err(|e| Error::Domain(format!("pair {} rx co-located with the base station: {e}", pair.id)))?;
        let g_ll = device_gain(pair.tx, pair.rx, params);
        let row = LinkRow::from_gains(pair.id, pair.demand, g_ll, g_l0, g_0l, radio);
        if !(row.ul_lo <= row.ul_hi) {
            return Err(Error::CellularInfeasible(format!(
                "pair {}: needs uplink time >= {} but at most {} is available",
                pair.id, row.ul_lo, row.ul_hi
            )));
        }
        rows.push(row);
    }
    let cross = s
        .pairs
        .iter()
        .map(|from| s.pairs.iter().map(|to| device_gain(from.tx, to.rx, params)).collect())
        .collect();
    let budget = LinkBudget { radio, rows, cross };
    if budget.common_uplink_window().is_none() {
        return Err(Error::CellularInfeasible(
            "no uplink time is power-feasible for all pairs at once".into(),
        ));
    }
    Ok(budget)
}

/// Common demand for generated scenarios: the largest per-frame demand a
/// pair with both devices on the cell edge can carry in cellular mode,
/// `r_ul r_dl / (r_ul + r_dl) * T` at edge rates.
pub fn edge_demand(params: &PhysParams) -> f64 {
    let radio = params.radio();
    let edge_gain = params.ref_gain * params.cell_radius.max(MIN_DISTANCE).powf(-params.pathloss_exponent);
    let r_ul = max_rate(&radio, params.p_max_ue, edge_gain);
    let r_dl = max_rate(&radio, params.p_max_bs, edge_gain);
    r_ul * r_dl / (r_ul + r_dl) * params.frame
}

/// Area-uniform point in the disc of `radius` around `center`.
pub fn sample_disc(rng: &mut impl Rng, center: Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let angle = std::f64::consts::TAU * rng.random::<f64>();
    let p = Point::polar(r, angle);
    Point::new(center.x + p.x, center.y + p.y)
}

/// `pairs` pairs with transmitters and receivers placed uniformly over the
/// cell and the common edge demand; identical for identical seeds.
pub fn random_scenario(pairs: usize, seed: u64, params: &PhysParams) -> Result<CellScenario> {
    params.validate()?;
    if pairs == 0 {
        return Err(Error::InvalidScenario("at least one pair is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let demand = edge_demand(params);
    let radio = params.radio();
    let bs = Point::ORIGIN;
    let mut placed = Vec::with_capacity(pairs);
    for id in 1..=pairs as u32 {
        let mut attempt = 0;
        let pair = loop {
            attempt += 1;
            if attempt > MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::CellularInfeasible(format!(
                    "could not place pair {id} feasibly in {MAX_PLACEMENT_ATTEMPTS} attempts"
                )));
            }
            let tx = sample_disc(&mut rng, bs, params.cell_radius);
            let rx = sample_disc(&mut rng, bs, params.cell_radius);
            let (d_tx, d_rx) = (tx.distance(bs), rx.distance(bs));
            if d_tx == 0.0 || d_rx == 0.0 {
                continue;
            }
            let row = LinkRow::from_gains(
                id,
                demand,
                device_gain(tx, rx, params),
                pathloss_gain(d_tx, params)?,
                pathloss_gain(d_rx, params)?,
                radio,
            );
            if row.ul_lo <= row.ul_hi {
                break UserPair { id, tx, rx, demand };
            }
        };
        placed.push(pair);
    }
    CellScenario::new(params.clone(), bs, placed, seed)
}
