//! Shannon rates, transmit energies and the single-pair mode decision.
//!
//! Sending `b` nats in time `t` over a link with gain `G` and noise plus
//! interference `N` needs power `(exp(b / (W t)) - 1) N / G`, hence energy
//! `(exp(b / (W t)) - 1) N t / G`. That energy is convex and strictly
//! decreasing in `t`, so an energy-optimal schedule always uses the full
//! frame: D2D pairs transmit for `T`, cellular pairs split `t_ul + t_dl = T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{minimize_convex, BISECTION_REL_TOL};
use crate::scenario::LinkRow;
use crate::types::{EnergyObjective, ExtEnergy, Mode, PairPowers};

/// Shannon rate `W ln(1 + p G / (sigma2 + I))` in nats/s.
pub fn rate(power: f64, gain: f64, noise: f64, interference: f64, bandwidth: f64) -> f64 {
    bandwidth * (power * gain / (noise + interference)).ln_1p()
}

/// Power needed to deliver `demand` nats in time `t`.
pub fn required_power(t: f64, demand: f64, gain: f64, noise_plus_interference: f64, bandwidth: f64) -> f64 {
    if demand == 0.0 {
        return 0.0;
    }
    (demand / (bandwidth * t)).exp_m1() * noise_plus_interference / gain
}

/// Energy needed to deliver `demand` nats in time `t`.
pub fn transmit_energy(t: f64, demand: f64, gain: f64, noise_plus_interference: f64, bandwidth: f64) -> Result<f64> {
    if demand == 0.0 && t >= 0.0 {
        return Ok(0.0);
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("transmission time must be positive, got {t}")));
    }
    Ok(required_power(t, demand, gain, noise_plus_interference, bandwidth) * t)
}

/// Derivative of [`transmit_energy`] with respect to `t`; always <= 0.
fn transmit_energy_slope(t: f64, demand: f64, gain: f64, noise: f64, bandwidth: f64) -> f64 {
    if demand == 0.0 {
        return 0.0;
    }
    let x = demand / (bandwidth * t);
    (x.exp_m1() - x * x.exp()) * noise / gain
}

pub fn energy_ul(t: f64, demand: f64, g_l0: f64, noise: f64, bandwidth: f64) -> Result<f64> {
    transmit_energy(t, demand, g_l0, noise, bandwidth)
}

pub fn energy_dl(t: f64, demand: f64, g_0l: f64, noise: f64, bandwidth: f64) -> Result<f64> {
    transmit_energy(t, demand, g_0l, noise, bandwidth)
}

pub fn energy_d2d(t: f64, demand: f64, g_ll: f64, noise: f64, interference: f64, bandwidth: f64) -> Result<f64> {
    if !(interference >= 0.0) {
        return Err(Error::Domain(format!("interference must be non-negative, got {interference}")));
    }
    transmit_energy(t, demand, g_ll, noise + interference, bandwidth)
}

impl LinkRow {
    pub fn uplink_power(&self, t_ul: f64) -> f64 {
        required_power(t_ul, self.demand, self.g_l0, self.radio.noise, self.radio.bandwidth)
    }

    pub fn downlink_power(&self, t_dl: f64) -> f64 {
        required_power(t_dl, self.demand, self.g_0l, self.radio.noise, self.radio.bandwidth)
    }

    /// Minimum D2D power over the full frame under interference `I`.
    pub fn d2d_power(&self, interference: f64) -> f64 {
        required_power(
            self.radio.frame,
            self.demand,
            self.g_ll,
            self.radio.noise + interference,
            self.radio.bandwidth,
        )
    }

    pub fn uplink_energy(&self, t_ul: f64) -> f64 {
        if self.demand == 0.0 {
            return 0.0;
        }
        self.uplink_power(t_ul) * t_ul
    }

    pub fn downlink_energy(&self, t_dl: f64) -> f64 {
        if self.demand == 0.0 {
            return 0.0;
        }
        self.downlink_power(t_dl) * t_dl
    }

    /// Cellular energy cost when the common uplink time is `t_ul` and the
    /// downlink gets the rest of the frame. Defined for `0 < t_ul < T`
    /// (`t_ul <= T` under the user-energy objective).
    pub fn cellular_energy(&self, t_ul: f64, objective: EnergyObjective) -> f64 {
        match objective {
            EnergyObjective::UserEnergy => self.uplink_energy(t_ul),
            EnergyObjective::SystemEnergy => {
                self.uplink_energy(t_ul) + self.downlink_energy(self.radio.frame - t_ul)
            }
        }
    }

    /// Derivative of [`LinkRow::cellular_energy`] in `t_ul`.
    pub fn cellular_energy_slope(&self, t_ul: f64, objective: EnergyObjective) -> f64 {
        let r = &self.radio;
        let ul = transmit_energy_slope(t_ul, self.demand, self.g_l0, r.noise, r.bandwidth);
        match objective {
            EnergyObjective::UserEnergy => ul,
            EnergyObjective::SystemEnergy => {
                ul - transmit_energy_slope(r.frame - t_ul, self.demand, self.g_0l, r.noise, r.bandwidth)
            }
        }
    }

    /// Optimal powers of this pair in cellular mode at uplink time `t_ul`.
    pub fn cellular_powers(&self, t_ul: f64) -> PairPowers {
        PairPowers {
            uplink: self.uplink_power(t_ul),
            downlink: self.downlink_power(self.radio.frame - t_ul),
            d2d: 0.0,
        }
    }
}

/// Whether some split `t_ul + t_dl <= T` meets the demand at maximum power.
pub fn cellular_feasible(row: &LinkRow) -> bool {
    if row.demand == 0.0 {
        return true;
    }
    row.demand / row.r_ul_max + row.demand / row.r_dl_max <= row.radio.frame
}

/// Whether the pair meets its demand in D2D mode without interference.
pub fn d2d_feasible(row: &LinkRow) -> bool {
    row.r_d2d_max * row.radio.frame >= row.demand
}

/// Minimum cellular energy and the uplink time achieving it.
///
/// Under the user-energy objective the uplink energy is decreasing, so the
/// optimum is the latest feasible uplink time `T - b / r_dl_max`. Under the
/// system-energy objective the convex sum of uplink and downlink energy is
/// minimised by bisection on its derivative.
pub fn cellular_energy_opt(row: &LinkRow, objective: EnergyObjective) -> Result<(f64, f64)> {
    if !cellular_feasible(row) {
        return Err(Error::CellularInfeasible(format!("pair {}", row.id)));
    }
    let t = match objective {
        EnergyObjective::UserEnergy => row.ul_hi,
        EnergyObjective::SystemEnergy => minimize_convex(
            row.ul_lo,
            row.ul_hi,
            BISECTION_REL_TOL * row.radio.frame,
            |t| row.cellular_energy_slope(t, objective),
        ),
    };
    Ok((t, row.cellular_energy(t, objective)))
}

/// Full-frame D2D energy under interference `I`, or `Infinite` when the
/// required power exceeds the device's maximum.
pub fn d2d_energy_ext(row: &LinkRow, interference: f64) -> ExtEnergy {
    let p = row.d2d_power(interference);
    if p <= row.radio.p_max_ue {
        ExtEnergy::Finite(p * row.radio.frame)
    } else {
        ExtEnergy::Infinite
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePairSolution {
    pub mode: Mode,
    /// Set only in cellular mode.
    pub t_ul_star: Option<f64>,
    pub powers: PairPowers,
    pub energy: f64,
}

/// Picks the cheaper mode for an isolated pair; ties go to cellular.
pub fn single_pair_select(row: &LinkRow, objective: EnergyObjective) -> Result<SinglePairSolution> {
    let (t_ul, e_cell) = cellular_energy_opt(row, objective)?;
    let e_d2d = d2d_energy_ext(row, 0.0);
    Ok(match e_d2d {
        ExtEnergy::Finite(e) if e < e_cell => SinglePairSolution {
            mode: Mode::D2d,
            t_ul_star: None,
            powers: PairPowers { d2d: row.d2d_power(0.0), ..PairPowers::default() },
            energy: e,
        },
        _ => SinglePairSolution {
            mode: Mode::Cellular,
            t_ul_star: Some(t_ul),
            powers: row.cellular_powers(t_ul),
            energy: e_cell,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{PhysParams, Radio};
    use proptest::prelude::*;

    fn radio() -> Radio {
        PhysParams::urban_lte().radio()
    }

    fn row(demand: f64, g_ll: f64, g_l0: f64, g_0l: f64) -> LinkRow {
        LinkRow::from_gains(1, demand, g_ll, g_l0, g_0l, radio())
    }

    /// Gain at `d` metres with the urban parameters.
    fn g(d: f64) -> f64 {
        5.7e-4 * d.max(1.0).powi(-4)
    }

    #[test]
    fn zero_power_gives_zero_rate() {
        assert_eq!(rate(0.0, 1e-10, 1e-14, 0.0, 5e6), 0.0);
    }

    #[test]
    fn rate_depends_only_on_snr() {
        let a = rate(0.1, 1e-10, 1e-14, 3e-15, 5e6);
        let b = rate(0.1, 2e-10, 2e-14, 6e-15, 5e6);
        assert!((a - b).abs() <= a * 1e-15);
    }

    #[test]
    fn rate_matches_scalar_evaluation() {
        // 5e6 * ln(1 + 0.25e-10 / (10^-20.4 * 5e6)) with 50-digit arithmetic.
        let sigma2 = 10f64.powf(-204.0 / 10.0) * 5e6;
        let r = rate(0.25, 1e-10, sigma2, 0.0, 5e6);
        assert!((r - 35_682_190.165_752_17).abs() <= 35_682_190.0 * 1e-12, "{r}");
    }

    #[test]
    fn zero_demand_costs_nothing() {
        assert_eq!(energy_ul(0.5, 0.0, 1e-12, 1e-14, 5e6).unwrap(), 0.0);
        assert_eq!(energy_d2d(1.0, 0.0, 1e-12, 1e-14, 1e-13, 5e6).unwrap(), 0.0);
    }

    #[test]
    fn halving_the_time_costs_more() {
        let e1 = energy_ul(1.0, 4e5, 1e-12, 2e-14, 5e6).unwrap();
        let e2 = energy_ul(0.5, 4e5, 1e-12, 2e-14, 5e6).unwrap();
        assert!(e2 > e1);
    }

    #[test]
    fn energy_matches_extended_precision_value() {
        // (exp(1e6 / (5e6 * 0.5)) - 1) * sigma2 / 1e-12 * 0.5 with 50-digit
        // arithmetic: exp(0.4) - 1 = 0.49182469764127031782...
        let sigma2 = 10f64.powf(-20.4) * 5e6;
        let expected = 0.491_824_697_641_270_3 * sigma2 / 1e-12 * 0.5;
        let got = energy_ul(0.5, 1e6, 1e-12, sigma2, 5e6).unwrap();
        assert!((got - expected).abs() <= expected * 1e-14);
    }

    #[test]
    fn non_positive_time_is_a_domain_error() {
        assert!(matches!(energy_ul(0.0, 1.0, 1e-12, 1e-14, 5e6), Err(Error::Domain(_))));
        assert!(matches!(energy_dl(-1.0, 1.0, 1e-12, 1e-14, 5e6), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_demand_is_feasible_in_both_modes() {
        let r = row(0.0, g(400.0), g(400.0), g(400.0));
        assert!(cellular_feasible(&r));
        assert!(d2d_feasible(&r));
    }

    #[test]
    fn cellular_feasible_at_the_boundary() {
        let mut r = row(1.0, 1e-12, 1e-12, 1e-12);
        r.r_ul_max = 2.0;
        r.r_dl_max = 2.0;
        assert!(cellular_feasible(&r));
        r.r_dl_max = 1.999;
        assert!(!cellular_feasible(&r));
    }

    #[test]
    fn edge_pair_with_edge_demand_is_cellular_feasible() {
        let params = PhysParams::urban_lte();
        let b = crate::scenario::edge_demand(&params);
        let r = row(b, g(1000.0), g(499.999), g(499.999));
        assert!(cellular_feasible(&r));
    }

    #[test]
    fn user_energy_optimum_is_the_latest_uplink_time() {
        let r = row(3e5, g(50.0), g(200.0), g(300.0));
        let (t, e) = cellular_energy_opt(&r, EnergyObjective::UserEnergy).unwrap();
        assert_eq!(t, 1.0 - 3e5 / r.r_dl_max);
        assert_eq!(e, r.uplink_energy(t));
    }

    #[test]
    fn symmetric_link_splits_the_frame_in_half() {
        let mut radio = radio();
        radio.p_max_bs = radio.p_max_ue;
        let r = LinkRow::from_gains(1, 2e5, g(10.0), g(200.0), g(200.0), radio);
        let (t, _) = cellular_energy_opt(&r, EnergyObjective::SystemEnergy).unwrap();
        assert!((t - 0.5).abs() <= 1e-11, "{t}");
    }

    #[test]
    fn system_energy_optimum_beats_a_dense_grid() {
        let r = row(4e5, g(80.0), g(150.0), g(420.0));
        let obj = EnergyObjective::SystemEnergy;
        let (t_star, e_star) = cellular_energy_opt(&r, obj).unwrap();
        let n = 1_000_000;
        let (mut best_t, mut best_e) = (f64::NAN, f64::INFINITY);
        for i in 0..=n {
            let t = r.ul_lo + (r.ul_hi - r.ul_lo) * i as f64 / n as f64;
            let e = r.cellular_energy(t, obj);
            if e < best_e {
                best_e = e;
                best_t = t;
            }
        }
        assert!((t_star - best_t).abs() <= 1e-6, "{t_star} vs {best_t}");
        assert!((e_star - best_e).abs() / best_e <= 1e-9);
    }

    #[test]
    fn infeasible_pair_has_no_cellular_optimum() {
        let mut r = row(1e6, g(10.0), g(490.0), g(490.0));
        r.r_ul_max = 1.0;
        assert!(cellular_energy_opt(&r, EnergyObjective::UserEnergy).is_err());
    }

    #[test]
    fn d2d_extended_energy() {
        let b = crate::scenario::edge_demand(&PhysParams::urban_lte());
        let far = row(b, g(900.0), g(100.0), g(100.0));
        assert!(!d2d_feasible(&far));
        assert_eq!(d2d_energy_ext(&far, 0.0), ExtEnergy::Infinite);

        let near = row(b, g(20.0), g(100.0), g(100.0));
        let e0 = d2d_energy_ext(&near, 0.0).finite().unwrap();
        let direct = energy_d2d(1.0, b, near.g_ll, near.radio.noise, 0.0, 5e6).unwrap();
        assert_eq!(e0, direct);
        let e1 = d2d_energy_ext(&near, near.radio.noise).finite().unwrap();
        assert!((e1 - 2.0 * e0).abs() <= e0 * 1e-15);
    }

    #[test]
    fn colocated_devices_choose_d2d() {
        let b = crate::scenario::edge_demand(&PhysParams::urban_lte());
        let r = row(b, g(0.0), g(300.0), g(300.0));
        let s = single_pair_select(&r, EnergyObjective::UserEnergy).unwrap();
        assert_eq!(s.mode, Mode::D2d);
        let s = single_pair_select(&r, EnergyObjective::SystemEnergy).unwrap();
        assert_eq!(s.mode, Mode::D2d);
    }

    #[test]
    fn opposite_edges_choose_cellular() {
        let b = crate::scenario::edge_demand(&PhysParams::urban_lte());
        let r = row(b, g(999.0), g(499.0), g(499.0));
        let s = single_pair_select(&r, EnergyObjective::UserEnergy).unwrap();
        assert_eq!(s.mode, Mode::Cellular);
        assert_eq!(s.t_ul_star, Some(r.ul_hi));
    }

    #[test]
    fn ties_go_to_cellular() {
        // With zero demand both modes cost exactly nothing.
        let r = row(0.0, g(5.0), g(300.0), g(300.0));
        let s = single_pair_select(&r, EnergyObjective::UserEnergy).unwrap();
        assert_eq!(s.energy, 0.0);
        assert_eq!(d2d_energy_ext(&r, 0.0), ExtEnergy::Finite(0.0));
        assert_eq!(s.mode, Mode::Cellular);
    }

    fn arb_row() -> impl Strategy<Value = LinkRow> {
        (1e4f64..5e5, 1.0f64..500.0, 1.0f64..500.0, 1.0f64..500.0)
            .prop_map(|(b, dll, dl0, d0l)| row(b, g(dll), g(dl0), g(d0l)))
    }

    proptest! {
        #[test]
        fn energies_are_convex_and_decreasing(
            b in 1e4f64..1e6, gain in 1e-15f64..1e-6, t1 in 0.05f64..1.0, t2 in 0.05f64..1.0,
        ) {
            let n = radio().noise;
            let e = |t: f64| energy_ul(t, b, gain, n, 5e6).unwrap();
            let mid = e(0.5 * (t1 + t2));
            let chord = 0.5 * (e(t1) + e(t2));
            prop_assert!(mid <= chord * (1.0 + 1e-12));
            if t1 < t2 {
                prop_assert!(e(t1) > e(t2));
            }
        }

        #[test]
        fn d2d_energy_is_affine_in_interference(b in 1e4f64..1e6, i in 0.0f64..1e-12) {
            let n = radio().noise;
            let e0 = energy_d2d(1.0, b, 1e-9, n, 0.0, 5e6).unwrap();
            let ei = energy_d2d(1.0, b, 1e-9, n, i, 5e6).unwrap();
            prop_assert!((ei - e0 * (n + i) / n).abs() <= ei * 1e-13);
        }

        #[test]
        fn implied_power_delivers_the_demand(b in 1e3f64..1e6, gain in 1e-15f64..1e-6, t in 0.05f64..1.0) {
            let n = radio().noise;
            let p = required_power(t, b, gain, n, 5e6);
            let delivered = rate(p, gain, n, 0.0, 5e6) * t;
            prop_assert!((delivered - b).abs() <= b * 1e-9);
        }

        #[test]
        fn system_energy_optimum_beats_a_grid(r in arb_row()) {
            let obj = EnergyObjective::SystemEnergy;
            let (_, e_star) = cellular_energy_opt(&r, obj).unwrap();
            let n = 100_000;
            for i in 0..=n {
                let t = r.ul_lo + (r.ul_hi - r.ul_lo) * i as f64 / n as f64;
                prop_assert!(r.cellular_energy(t, obj) >= e_star * (1.0 - 1e-9));
            }
        }

        #[test]
        fn selection_is_feasible_and_within_power_limits(r in arb_row()) {
            for obj in [EnergyObjective::UserEnergy, EnergyObjective::SystemEnergy] {
                let s = single_pair_select(&r, obj).unwrap();
                let radio = r.radio;
                match s.mode {
                    Mode::D2d => {
                        prop_assert!(d2d_feasible(&r) || s.powers.d2d <= radio.p_max_ue);
                        prop_assert!(s.powers.d2d <= radio.p_max_ue + 1e-12);
                    }
                    Mode::Cellular => {
                        let t = s.t_ul_star.unwrap();
                        prop_assert!(r.ul_lo <= t && t <= r.ul_hi);
                        // T - t_ul loses digits to cancellation at the right end.
                        prop_assert!(s.powers.uplink <= radio.p_max_ue * (1.0 + 1e-9));
                        prop_assert!(s.powers.downlink <= radio.p_max_bs * (1.0 + 1e-9));
                    }
                }
                prop_assert!(s.energy >= 0.0);
            }
        }
    }
}
