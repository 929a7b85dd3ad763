use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use super::KernelError;

/// A point on the global time axis, in seconds. The external input arrives at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn new(seconds: f64) -> Result<Self, KernelError> {
        if seconds.is_finite() && seconds >= 0.0 {
            Ok(SimTime(seconds))
        } else {
            Err(KernelError::InvalidTime(seconds))
        }
    }

    pub fn seconds(self) -> f64 {
        self.0
    }

    /// Advances by a nonnegative duration.
    pub fn after(self, duration: f64) -> Result<Self, KernelError> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(KernelError::InvalidDelay(duration));
        }
        SimTime::new(self.0 + duration)
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for SimTime {
    type Output = SimTime;

    /// Panics on a negative or non-finite duration; use [`SimTime::after`] for checked addition.
    fn add(self, duration: f64) -> SimTime {
        self.after(duration).expect("SimTime + duration requires a finite nonnegative duration")
    }
}

impl TryFrom<f64> for SimTime {
    type Error = KernelError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        SimTime::new(value)
    }
}

impl From<SimTime> for f64 {
    fn from(t: SimTime) -> f64 {
        t.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}", self.0)
    }
}

/// Exponential delay rate λ in 1/seconds. Mean delay is `1/λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Rate(f64);

impl Rate {
    pub fn new(lambda: f64) -> Result<Self, KernelError> {
        if lambda.is_finite() && lambda > 0.0 {
            Ok(Rate(lambda))
        } else {
            Err(KernelError::InvalidRate(lambda))
        }
    }

    pub fn lambda(self) -> f64 {
        self.0
    }

    pub fn mean_delay(self) -> f64 {
        1.0 / self.0
    }
}

impl Default for Rate {
    fn default() -> Self {
        Rate(1.0)
    }
}

impl TryFrom<f64> for Rate {
    type Error = KernelError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Rate::new(value)
    }
}

impl From<Rate> for f64 {
    fn from(r: Rate) -> f64 {
        r.0
    }
}
