//! Delay-penalty shaper.
//!
//! Instead of recoloring, this conditioner slows an opportunist flow down:
//! every congestion signal received while the flow's measured rate exceeds
//! its target adds a fixed delay step, and the penalty drains linearly while
//! the network stays quiet. Raising the path delay lowers TCP throughput
//! exactly as raising loss would, without costing retransmissions.

use crate::conditioner::token_bucket::TokenBucketMarker;
use crate::conditioner::tsw::TswEstimator;
use crate::conditioner::{Conditioner, CongestionSignal, Marking};
use crate::flow::Packet;
use crate::units::{Duration, Instant, Rate};

pub const DEFAULT_INCREASE_STEP: f64 = 0.010;
pub const DEFAULT_DECREASE_SLOPE: f64 = 0.002;

/// Additive-increase / linear-decrease penalty level.
#[derive(Debug, Clone)]
pub struct PenaltyState {
    pub penalty: Duration,
    pub increase_step: Duration,
    /// Seconds of penalty drained per second of quiet time.
    pub decrease_slope: f64,
    pub congested: bool,
    last_decay: Instant,
}

impl PenaltyState {
    pub fn new(increase_step: Duration, decrease_slope: f64) -> PenaltyState {
        PenaltyState {
            penalty: Duration::ZERO,
            increase_step,
            decrease_slope,
            congested: false,
            last_decay: Instant::ZERO,
        }
    }

    /// Applies the linear decrease for time elapsed since the last update.
    pub fn decay_to(&mut self, now: Instant) {
        let elapsed = now.since(self.last_decay).as_secs();
        let drained = self.decrease_slope * elapsed;
        self.penalty = Duration::secs((self.penalty.as_secs() - drained).max(0.0));
        self.last_decay = now;
    }

    /// Registers a congestion signal. The penalty only grows when the flow
    /// is actually opportunist (sending above target).
    pub fn on_congestion(&mut self, opportunist: bool, now: Instant) {
        self.decay_to(now);
        self.congested = true;
        if opportunist {
            self.penalty = self.penalty + self.increase_step;
        }
    }
}

pub struct PenaltyShaper {
    marker: TokenBucketMarker,
    tsw: TswEstimator,
    state: PenaltyState,
    target: Rate,
    /// Release time of the previously shaped packet; keeps the flow FIFO.
    last_release: Instant,
}

impl PenaltyShaper {
    pub fn new(
        target: Rate,
        depth_bytes: u32,
        window: Duration,
        increase_step: Duration,
        decrease_slope: f64,
    ) -> PenaltyShaper {
        PenaltyShaper {
            marker: TokenBucketMarker::new(target, depth_bytes),
            tsw: TswEstimator::new(window),
            state: PenaltyState::new(increase_step, decrease_slope),
            target,
            last_release: Instant::ZERO,
        }
    }

    pub fn penalty(&self) -> Duration {
        self.state.penalty
    }

    /// The delay to impose on a packet arriving now: the current penalty,
    /// stretched if needed so releases never reorder.
    pub fn shape_delay(&mut self, now: Instant) -> Duration {
        self.state.decay_to(now);
        let release = Instant::at_secs(
            (now.as_secs() + self.state.penalty.as_secs()).max(self.last_release.as_secs()),
        );
        self.last_release = release;
        release.since(now)
    }
}

impl Conditioner for PenaltyShaper {
    fn on_packet(&mut self, pkt: &Packet, now: Instant) -> Marking {
        self.tsw.update(pkt.size, now);
        let color = self.marker.mark(pkt, now);
        let delay = self.shape_delay(now);
        Marking { color, delay }
    }

    fn on_feedback(&mut self, signal: &CongestionSignal, now: Instant) {
        if signal.ecn_marked_count > 0 {
            let opportunist = self.tsw.avg_rate().as_bps() > self.target.as_bps();
            self.state.on_congestion(opportunist, now);
        } else {
            self.state.congested = false;
        }
    }

    fn set_target(&mut self, rate: Rate) {
        self.target = rate;
        self.marker.set_target(rate);
    }

    fn current_target(&self) -> Option<Rate> {
        Some(self.target)
    }
}
