use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

/// Which energy a cellular pair is charged for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnergyObjective {
    /// Device uplink plus base-station downlink energy.
    SystemEnergy,
    /// Device uplink energy only.
    UserEnergy,
}

impl EnergyObjective {
    pub fn short_name(self) -> &'static str {
        match self {
            EnergyObjective::SystemEnergy => "se",
            EnergyObjective::UserEnergy => "ue",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Cellular,
    D2d,
}

impl Mode {
    /// The 0/1 encoding used by mode selection vectors (D2D = 1).
    pub fn bit(self) -> u8 {
        match self {
            Mode::Cellular => 0,
            Mode::D2d => 1,
        }
    }
}

/// Mode of every pair, indexed by pair position in the scenario.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeVector(pub Vec<Mode>);

impl ModeVector {
    pub fn all(len: usize, mode: Mode) -> Self {
        ModeVector(vec![mode; len])
    }

    pub fn from_d2d_set(len: usize, d2d: &[usize]) -> Self {
        let mut modes = vec![Mode::Cellular; len];
        for &l in d2d {
            modes[l] = Mode::D2d;
        }
        ModeVector(modes)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, l: usize) -> Mode {
        self.0[l]
    }

    pub fn d2d_set(&self) -> Vec<usize> {
        self.indices(Mode::D2d)
    }

    pub fn cellular_set(&self) -> Vec<usize> {
        self.indices(Mode::Cellular)
    }

    fn indices(&self, mode: Mode) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == mode)
            .map(|(l, _)| l)
            .collect()
    }

    pub fn count(&self, mode: Mode) -> usize {
        self.0.iter().filter(|&&m| m == mode).count()
    }
}

impl fmt::Display for ModeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.0 {
            write!(f, "{}", m.bit())?;
        }
        Ok(())
    }
}

/// An energy value that may be `+inf` when the mode is power-infeasible.
///
/// Infinity is a variant rather than `f64::INFINITY` so that comparisons are
/// total and never see a NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtEnergy {
    Finite(f64),
    Infinite,
}

impl ExtEnergy {
    pub const ZERO: ExtEnergy = ExtEnergy::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtEnergy::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtEnergy::Finite(e) => Some(e),
            ExtEnergy::Infinite => None,
        }
    }

    /// Lossy view for reporting only.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtEnergy::Finite(e) => e,
            ExtEnergy::Infinite => f64::INFINITY,
        }
    }

    pub fn min(self, other: ExtEnergy) -> ExtEnergy {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl PartialOrd for ExtEnergy {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtEnergy::Finite(a), ExtEnergy::Finite(b)) => a.partial_cmp(b),
            (ExtEnergy::Finite(_), ExtEnergy::Infinite) => Some(Ordering::Less),
            (ExtEnergy::Infinite, ExtEnergy::Finite(_)) => Some(Ordering::Greater),
            (ExtEnergy::Infinite, ExtEnergy::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl Add for ExtEnergy {
    type Output = ExtEnergy;

    fn add(self, rhs: ExtEnergy) -> ExtEnergy {
        match (self, rhs) {
            (ExtEnergy::Finite(a), ExtEnergy::Finite(b)) => ExtEnergy::Finite(a + b),
            _ => ExtEnergy::Infinite,
        }
    }
}

impl Add<f64> for ExtEnergy {
    type Output = ExtEnergy;

    fn add(self, rhs: f64) -> ExtEnergy {
        self + ExtEnergy::Finite(rhs)
    }
}

impl std::iter::Sum for ExtEnergy {
    fn sum<I: Iterator<Item = ExtEnergy>>(iter: I) -> ExtEnergy {
        iter.fold(ExtEnergy::ZERO, |acc, e| acc + e)
    }
}

/// Transmit powers of one pair; only the fields of the selected mode are
/// non-zero (the downlink power is the base station's).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairPowers {
    pub uplink: f64,
    pub downlink: f64,
    pub d2d: f64,
}
