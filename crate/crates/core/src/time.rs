//! Simulation time as exact integer microseconds.
//!
//! Scheduling keys must be exact: two runs of the same config have to produce
//! byte-identical traces, so event times are never accumulated in floating
//! point. Tick rates given in Hz are quantized to a whole-microsecond period
//! once, and every tick instant is an integer multiple of that period.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use crate::error::{Error, Result};

const MICROS_PER_SEC: u64 = 1_000_000;

/// Non-negative instant (or duration) since episode start, in microseconds.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    /// Nearest-microsecond conversion; negative or non-finite input is an error.
    pub fn from_secs(seconds: f64) -> Result<Self> {
        if !seconds.is_finite() || seconds < 0.0 {
            return Err(Error::config(format!(
                "time must be finite and non-negative, got {seconds}"
            )));
        }
        Ok(SimTime((seconds * MICROS_PER_SEC as f64).round() as u64))
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC as f64
    }

    /// Tick period for a rate in Hz, quantized to whole microseconds.
    ///
    /// Rates that do not divide 1e6 exactly (e.g. 30 Hz) are honoured to the
    /// nearest microsecond; the effective rate differs by at most 0.005%.
    pub fn period_of_rate(rate_hz: f64) -> Result<Self> {
        if !rate_hz.is_finite() || rate_hz <= 0.0 {
            return Err(Error::config(format!(
                "tick rate must be positive, got {rate_hz}"
            )));
        }
        let period = (MICROS_PER_SEC as f64 / rate_hz).round() as u64;
        if period == 0 {
            return Err(Error::config(format!(
                "tick rate {rate_hz} Hz exceeds the microsecond resolution"
            )));
        }
        Ok(SimTime(period))
    }

    pub fn saturating_sub(self, other: Self) -> Self {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: Self) -> Self {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: Self) -> Self {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs())
    }
}
