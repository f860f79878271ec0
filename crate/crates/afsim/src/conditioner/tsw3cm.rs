//! Time-sliding-window three-color marker with probabilistic demotion.

use crate::conditioner::tsw::TswEstimator;
use crate::conditioner::{Conditioner, Marking};
use crate::flow::{Packet, PacketColor};
use crate::units::{Duration, Instant, Rate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Branch probabilities for one marking decision given the current average
/// rate. They always lie in [0, 1] and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkingProbs {
    pub red: f64,
    pub yellow: f64,
    pub green: f64,
}

/// Probabilities of the three-color probabilistic rule: above PIR the excess
/// over PIR is marked Red and the band between the rates Yellow; between CIR
/// and PIR only the excess over CIR is Yellow; at or below CIR everything is
/// Green.
pub fn tsw3cm_probs(avg: Rate, cir: Rate, pir: Rate) -> MarkingProbs {
    let avg_bps = avg.as_bps();
    let probs = if avg_bps <= cir.as_bps() {
        MarkingProbs { red: 0.0, yellow: 0.0, green: 1.0 }
    } else if avg_bps <= pir.as_bps() {
        let y = (avg_bps - cir.as_bps()) / avg_bps;
        MarkingProbs { red: 0.0, yellow: y, green: 1.0 - y }
    } else {
        let r = (avg_bps - pir.as_bps()) / avg_bps;
        let y = (pir.as_bps() - cir.as_bps()) / avg_bps;
        MarkingProbs { red: r, yellow: y, green: 1.0 - r - y }
    };
    assert!(
        (0.0..=1.0).contains(&probs.red)
            && (0.0..=1.0).contains(&probs.yellow)
            && (0.0..=1.0).contains(&probs.green),
        "marking probabilities out of range: {probs:?}"
    );
    probs
}

pub(crate) fn draw_color(probs: MarkingProbs, rng: &mut ChaCha8Rng) -> PacketColor {
    let u: f64 = rng.gen();
    if u < probs.red {
        PacketColor::Red
    } else if u < probs.red + probs.yellow {
        PacketColor::Yellow
    } else {
        PacketColor::Green
    }
}

#[derive(Debug)]
pub struct Tsw3cmMarker {
    tsw: TswEstimator,
    cir: Rate,
    pir: Rate,
    rng: ChaCha8Rng,
}

impl Tsw3cmMarker {
    pub fn new(window: Duration, cir: Rate, pir: Rate, rng: ChaCha8Rng) -> Tsw3cmMarker {
        assert!(pir >= cir, "PIR must be at least CIR");
        Tsw3cmMarker { tsw: TswEstimator::new(window), cir, pir, rng }
    }

    pub fn mark(&mut self, pkt: &Packet, now: Instant) -> PacketColor {
        let avg = self.tsw.update(pkt.size, now);
        let probs = tsw3cm_probs(avg, self.cir, self.pir);
        draw_color(probs, &mut self.rng)
    }
}

impl Conditioner for Tsw3cmMarker {
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
