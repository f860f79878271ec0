//! Adaptive marking with a dynamic target rate.
//!
//! The marker is a token bucket whose rate m is retuned once per epoch from
//! the throughput model: with measured throughput b, contracted rate r_as,
//! and elastic headroom ε, one of three regimes applies and moves m down,
//! up, or down toward the contract.

use crate::analytic;
use crate::conditioner::token_bucket::TokenBucketMarker;
use crate::conditioner::tsw::TswEstimator;
use crate::conditioner::{Conditioner, EpochTaps, Marking};
use crate::flow::Packet;
use crate::units::{Duration, Instant, Rate};

pub const DEFAULT_EPOCH: f64 = 1.0;
pub const DEFAULT_GAIN: f64 = 0.25;

/// Which adaptation regime a measurement lands in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptState {
    /// Throughput at or under the model prediction, prediction under the
    /// contract: the model target is too generous, cut m to track b.
    Oversubscribed,
    /// Throughput above prediction but under contract: resources are there,
    /// raise m toward the contract.
    BelowTarget,
    /// Contract met or exceeded: back m off to stop wasting profile.
    TargetReached,
}

/// Mutable adaptation state: current marking target plus the most recent
/// epoch measurements.
#[derive(Debug, Clone)]
pub struct AdaptiveTargetState {
    pub m: Rate,
    pub r_as: Rate,
    pub measured_rate: Rate,
    pub epsilon: Rate,
    pub epoch: Duration,
}

/// Classifies a measurement.
///
/// The oversubscription cut applies only when the model prediction
/// (3/4)m + ε itself sits under the contract; a throughput below an
/// over-contract prediction is not evidence of in-profile loss, so that
/// case raises m like any other under-target measurement. Boundary ties go
/// to the lowest-numbered regime (deterministic, arbitrary).
pub fn classify_adapt(b: Rate, m: Rate, epsilon: Rate, r_as: Rate) -> AdaptState {
    let predicted = 0.75 * m.as_bps() + epsilon.as_bps();
    if b.as_bps() >= r_as.as_bps() {
        AdaptState::TargetReached
    } else if b.as_bps() <= predicted && predicted < r_as.as_bps() {
        AdaptState::Oversubscribed
    } else {
        AdaptState::BelowTarget
    }
}

/// One adaptation step; returns the new marking target, clamped to
/// [0, peak].
pub fn adapt_target(state: &AdaptiveTargetState, alpha: f64, peak: Rate) -> Rate {
    let m = state.m.as_bps();
    let b = state.measured_rate.as_bps();
    let r_as = state.r_as.as_bps();
    let eps = state.epsilon.as_bps();
    let next = match classify_adapt(state.measured_rate, state.m, state.epsilon, state.r_as) {
        // Multiplicative cut keeping b > (3/4)m: m ← min(m, (4/3)(b − ε)).
        AdaptState::Oversubscribed => m.min((4.0 / 3.0 * (b - eps)).max(0.0)),
        AdaptState::BelowTarget => m + alpha * (r_as - b),
        AdaptState::TargetReached => (m - alpha * (b - r_as)).max(0.0),
    };
    Rate::bps(next.clamp(0.0, peak.as_bps()))
}

pub struct YeomMarker {
    bucket: TokenBucketMarker,
    tsw: TswEstimator,
    state: AdaptiveTargetState,
    alpha: f64,
    peak: Rate,
    packet_size: u32,
}

impl YeomMarker {
    pub fn new(
        r_as: Rate,
        peak: Rate,
        depth_bytes: u32,
        window: Duration,
        epoch: Duration,
        alpha: f64,
        packet_size: u32,
    ) -> YeomMarker {
        YeomMarker {
            bucket: TokenBucketMarker::new(r_as, depth_bytes),
            tsw: TswEstimator::new(window),
            state: AdaptiveTargetState {
                m: r_as,
                r_as,
                measured_rate: Rate::ZERO,
                epsilon: Rate::ZERO,
                epoch,
            },
            alpha,
            peak,
            packet_size,
        }
    }

    pub fn target(&self) -> Rate {
        self.state.m
    }
}

impl Conditioner for YeomMarker {
    fn on_packet(&mut self, pkt: &Packet, now: Instant) -> Marking {
        self.tsw.update(pkt.size, now);
        self.bucket.on_packet(pkt, now)
    }

    fn on_epoch(&mut self, taps: &EpochTaps, _now: Instant) {
        self.state.measured_rate = self.tsw.avg_rate();
        let rtt = match taps.rtt {
            Some(rtt) if rtt.as_secs() > 0.0 => rtt,
            _ => return,
        };
        // The oversubscription cut is gated on actual in-profile loss; red
        // drops alone never justify shrinking the model target below the
        // contract.
        let oversubscribed = taps.in_profile_loss.unwrap_or(0.0) > 0.0;
        match taps.loss_prob {
            Some(p) if p > 0.0 && oversubscribed => {
                let eps = analytic::yeom_epsilon(self.packet_size, rtt, p.min(1.0))
                    .unwrap_or(Rate::ZERO);
                self.state.epsilon = eps;
                self.state.m = adapt_target(&self.state, self.alpha, self.peak);
            }
            _ => {
                // No in-profile loss: resources are available. Track the
                // contract from below, back off once it is met.
                let b = self.state.measured_rate.as_bps();
                let r_as = self.state.r_as.as_bps();
                let next = if b < r_as {
                    self.state.m.as_bps() + self.alpha * (r_as - b)
                } else {
                    (self.state.m.as_bps() - self.alpha * (b - r_as)).max(0.0)
                };
                self.state.m = Rate::bps(next.clamp(0.0, self.peak.as_bps()));
            }
        }
        self.bucket.set_target(self.state.m);
    }

    fn epoch(&self) -> Option<Duration> {
        Some(self.state.epoch)
    }

    fn set_target(&mut self, rate: Rate) {
        self.state.m = rate;
        self.bucket.set_target(rate);
    }

    fn current_target(&self) -> Option<Rate> {
        Some(self.state.m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn state(m: f64, b: f64, eps: f64, r_as: f64) -> AdaptiveTargetState {
        AdaptiveTargetState {
            m: Rate::bps(m),
            r_as: Rate::bps(r_as),
            measured_rate: Rate::bps(b),
            epsilon: Rate::bps(eps),
            epoch: Duration::secs(1.0),
        }
    }

    #[test]
    fn state_one_cuts_target() {
        // b=80 ≤ (3/4)·100+10 = 85 < r_as=100: oversubscribed, m shrinks.
        let s = state(100.0, 80.0, 10.0, 100.0);
        assert_eq!(classify_adapt(s.measured_rate, s.m, s.epsilon, s.r_as), AdaptState::Oversubscribed);
        let m = adapt_target(&s, 0.25, Rate::bps(1000.0));
        assert!(m.as_bps() < 100.0);
        assert!((m.as_bps() - 4.0 / 3.0 * 70.0).abs() < 1e-9);
    }

    #[test]
    fn state_two_raises_target() {
        // 85 < b=90 < 100: under contract with room, m grows.
        let s = state(100.0, 90.0, 10.0, 100.0);
        assert_eq!(classify_adapt(s.measured_rate, s.m, s.epsilon, s.r_as), AdaptState::BelowTarget);
        let m = adapt_target(&s, 0.25, Rate::bps(1000.0));
        assert!(m.as_bps() > 100.0);
        assert!((m.as_bps() - 102.5).abs() < 1e-9);
    }

    #[test]
    fn state_three_backs_off() {
        // b=105 ≥ 100: contract met, m shrinks.
        let s = state(100.0, 105.0, 10.0, 100.0);
        assert_eq!(classify_adapt(s.measured_rate, s.m, s.epsilon, s.r_as), AdaptState::TargetReached);
        let m = adapt_target(&s, 0.25, Rate::bps(1000.0));
        assert!(m.as_bps() < 100.0);
        assert!((m.as_bps() - 98.75).abs() < 1e-9);
    }

    #[test]
    fn states_partition_the_measurement_space() {
        // For ε > 0 and b ≥ 0 exactly one regime applies (the dispatch is
        // total), and the adapted target stays within [0, peak].
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let peak = Rate::bps(5e6);
        for _ in 0..2000 {
            let s = state(
                rng.gen_range(0.0..3e6),
                rng.gen_range(0.0..4e6),
                rng.gen_range(1.0..1e6),
                rng.gen_range(1.0..3e6),
            );
            let m = adapt_target(&s, 0.25, peak);
            assert!(m.as_bps() >= 0.0 && m.as_bps() <= peak.as_bps());
        }
    }

    #[test]
    fn over_contract_prediction_never_triggers_the_cut() {
        // Prediction (3/4)m + ε above the contract with throughput below it:
        // the flow is under target, not oversubscribed; m must rise.
        let s = state(100.0, 80.0, 60.0, 100.0); // T = 135 >= r_as
        assert_eq!(classify_adapt(s.measured_rate, s.m, s.epsilon, s.r_as), AdaptState::BelowTarget);
        let m = adapt_target(&s, 0.25, Rate::bps(1000.0));
        assert!(m.as_bps() > 100.0);
    }

    #[test]
    fn boundary_tie_goes_to_lower_state() {
        // b exactly at the model prediction: oversubscribed wins over
        // below-target.
        let s = state(100.0, 85.0, 10.0, 100.0);
        assert_eq!(classify_adapt(s.measured_rate, s.m, s.epsilon, s.r_as), AdaptState::Oversubscribed);
        // b exactly at the contract: target-reached (its bound is inclusive).
        let s = state(100.0, 100.0, 10.0, 100.0);
        assert_eq!(classify_adapt(s.measured_rate, s.m, s.epsilon, s.r_as), AdaptState::TargetReached);
    }
}
