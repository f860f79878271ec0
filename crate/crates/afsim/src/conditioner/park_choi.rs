//! ECN-driven proportional target adjustment.
//!
//! A single controller scales every flow's marking target by a common factor
//! γ, steered by the fraction of ECN-marked feedback: high marking fractions
//! shrink γ multiplicatively, near-zero fractions grow it, and the scale is
//! clamped so the summed targets never exceed the bottleneck capacity. The
//! fixed point makes the marked aggregate match the bottleneck, with target
//! ratios preserved exactly.

use crate::conditioner::CongestionSignal;
use crate::units::Rate;

pub const DEFAULT_F_LO: f64 = 0.02;
pub const DEFAULT_F_HI: f64 = 0.10;
pub const DEFAULT_BETA: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct ParkChoiController {
    base_targets: Vec<Rate>,
    bottleneck: Rate,
    gamma: f64,
    beta: f64,
    f_lo: f64,
    f_hi: f64,
}

impl ParkChoiController {
    pub fn new(base_targets: Vec<Rate>, bottleneck: Rate, beta: f64, f_lo: f64, f_hi: f64) -> ParkChoiController {
        assert!(bottleneck.as_bps() > 0.0, "bottleneck must be positive");
        assert!(f_lo <= f_hi);
        ParkChoiController { base_targets, bottleneck, gamma: 1.0, beta, f_lo, f_hi }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn targets(&self) -> Vec<Rate> {
        self.base_targets.iter().map(|r| *r * self.gamma).collect()
    }

    /// One adjustment interval: updates γ from the marked-feedback fraction
    /// and returns the new per-flow targets. A window with no feedback at
    /// all leaves everything unchanged.
    pub fn adjust(&mut self, signal: &CongestionSignal) -> Vec<Rate> {
        if signal.total_feedback == 0 {
            return self.targets();
        }
        let f = signal.ecn_marked_count as f64 / signal.total_feedback as f64;
        if f > self.f_hi {
            self.gamma *= 1.0 - self.beta * f;
        } else if f < self.f_lo {
            self.gamma *= 1.0 + self.beta * (self.f_lo - f);
        }
        let base_sum: f64 = self.base_targets.iter().map(|r| r.as_bps()).sum();
        if base_sum > 0.0 {
            let cap = self.bottleneck.as_bps() / base_sum;
            self.gamma = self.gamma.clamp(0.0, cap);
        }
        self.targets()
    }
}
