//! Memory-weighted probabilistic marker.
//!
//! Same structure as the three-color TSW marker, but the out-marking
//! probability is weighted by the ratio of a slow history average to the
//! instantaneous TSW estimate. A sudden rate spike (estimate far above
//! history) gets its demotion probability damped; a flow that has been fast
//! for a long time is punished at full weight or more.

use crate::conditioner::tsw::TswEstimator;
use crate::conditioner::tsw3cm::{draw_color, tsw3cm_probs, MarkingProbs};
use crate::conditioner::{Conditioner, Marking};
use crate::flow::{Packet, PacketColor};
use crate::units::{Duration, Instant, Rate};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_HISTORY_GAIN: f64 = 0.1;
pub const DEFAULT_WEIGHT_FLOOR: f64 = 0.5;
pub const DEFAULT_WEIGHT_CEIL: f64 = 2.0;

#[derive(Debug)]
pub struct MemoryMarker {
    tsw: TswEstimator,
    cir: Rate,
    pir: Rate,
    history: Option<f64>,
    gain: f64,
    weight_floor: f64,
    weight_ceil: f64,
    rng: ChaCha8Rng,
}

impl MemoryMarker {
    pub fn new(
        window: Duration,
        cir: Rate,
        pir: Rate,
        gain: f64,
        weight_floor: f64,
        weight_ceil: f64,
        rng: ChaCha8Rng,
    ) -> MemoryMarker {
        assert!(pir >= cir, "PIR must be at least CIR");
        MemoryMarker { tsw: TswEstimator::new(window), cir, pir, history: None, gain, weight_floor, weight_ceil, rng }
    }

    /// The weighted branch probabilities for a given estimate and history.
    pub fn weighted_probs(&self, avg: Rate, history: f64) -> MarkingProbs {
        let base = tsw3cm_probs(avg, self.cir, self.pir);
        let w = if avg.as_bps() > 0.0 {
            (history / avg.as_bps()).clamp(self.weight_floor, self.weight_ceil)
        } else {
            1.0
        };
        let red = (base.red * w).clamp(0.0, 1.0);
        let yellow = (base.yellow * w).clamp(0.0, 1.0 - red);
        MarkingProbs { red, yellow, green: 1.0 - red - yellow }
    }

    pub fn mark(&mut self, pkt: &Packet, now: Instant) -> PacketColor {
        let avg = self.tsw.update(pkt.size, now);
        // First packet seeds the history at the estimate itself, so steady
        // traffic behaves exactly like the unweighted marker.
        let history = *self.history.get_or_insert(avg.as_bps());
        let probs = self.weighted_probs(avg, history);
        self.history = Some(history + self.gain * (avg.as_bps() - history));
        draw_color(probs, &mut self.rng)
    }
}

impl Conditioner for MemoryMarker {
    fn on_packet(&mut self, pkt: &Packet, now: Instant) -> Marking {
        Marking { color: self.mark(pkt, now), delay: Duration::ZERO }
    }

    fn set_target(&mut self, rate: Rate) {
        self.cir = rate;
    }

    fn current_target(&self) -> Option<Rate> {
        Some(self.cir)
    }
}
