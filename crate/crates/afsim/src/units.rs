//! Scalar quantities used throughout the simulator.
//!
//! Everything internal is kept in one canonical unit: rates in bits per
//! second, times in seconds. Conversions from packet counts happen at the
//! call sites that need them.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Sub};

/// A non-negative data rate in bits per second.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rate(f64);

impl Rate {
    pub const ZERO: Rate = Rate(0.0);

    /// Construct from bits per second. Panics on negative or non-finite input;
    /// untrusted inputs are range-checked during scenario validation instead.
    pub fn bps(value: f64) -> Rate {
        assert!(value.is_finite() && value >= 0.0, "rate must be finite and >= 0");
        Rate(value)
    }

    pub fn mbps(value: f64) -> Rate {
        Rate::bps(value * 1_000_000.0)
    }

    pub fn as_bps(self) -> f64 {
        self.0
    }

    /// Rate expressed in packets (segments) per second for a given packet size.
    pub fn as_packets_per_sec(self, packet_bytes: u32) -> f64 {
        self.0 / (packet_bytes as f64 * 8.0)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    pub fn max(self, other: Rate) -> Rate {
        Rate(self.0.max(other.0))
    }

    pub fn min(self, other: Rate) -> Rate {
        Rate(self.0.min(other.0))
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} bit/s", self.0)
    }
}

impl Add for Rate {
    type Output = Rate;
    fn add(self, rhs: Rate) -> Rate {
        Rate(self.0 + rhs.0)
    }
}

impl AddAssign for Rate {
    fn add_assign(&mut self, rhs: Rate) {
        self.0 += rhs.0;
    }
}

impl Mul<f64> for Rate {
    type Output = Rate;
    fn mul(self, rhs: f64) -> Rate {
        Rate(self.0 * rhs)
    }
}

/// A span of simulated time in seconds. Always non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Duration(f64);

impl Duration {
    pub const ZERO: Duration = Duration(0.0);

    pub fn secs(value: f64) -> Duration {
        assert!(value.is_finite() && value >= 0.0, "duration must be finite and >= 0");
        Duration(value)
    }

    pub fn millis(value: f64) -> Duration {
        Duration::secs(value / 1000.0)
    }

    pub fn as_secs(self) -> f64 {
        self.0
    }

    /// Serialization time of `bytes` on a link running at `rate`.
    pub fn transmission(bytes: u32, rate: Rate) -> Duration {
        Duration(bytes as f64 * 8.0 / rate.as_bps())
    }
}

impl Add for Duration {
    type Output = Duration;
    fn add(self, rhs: Duration) -> Duration {
        Duration(self.0 + rhs.0)
    }
}

impl Sub for Duration {
    type Output = Duration;
    fn sub(self, rhs: Duration) -> Duration {
        Duration((self.0 - rhs.0).max(0.0))
    }
}

impl Mul<f64> for Duration {
    type Output = Duration;
    fn mul(self, rhs: f64) -> Duration {
        Duration(self.0 * rhs)
    }
}

impl Div<f64> for Duration {
    type Output = Duration;
    fn div(self, rhs: f64) -> Duration {
        Duration(self.0 / rhs)
    }
}

/// A point on the simulated clock, seconds since the start of the run.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Instant(f64);

impl Instant {
    pub const ZERO: Instant = Instant(0.0);

    pub fn at_secs(value: f64) -> Instant {
        assert!(value.is_finite() && value >= 0.0, "instant must be finite and >= 0");
        Instant(value)
    }

    pub fn as_secs(self) -> f64 {
        self.0
    }

    /// Elapsed time since `earlier`, clamped at zero.
    pub fn since(self, earlier: Instant) -> Duration {
        Duration((self.0 - earlier.0).max(0.0))
    }
}

impl Add<Duration> for Instant {
    type Output = Instant;
    fn add(self, rhs: Duration) -> Instant {
        Instant(self.0 + rhs.as_secs())
    }
}
