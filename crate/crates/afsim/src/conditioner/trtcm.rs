//! Two-rate three-color marker: CIR and PIR token buckets, color-blind.

use crate::conditioner::token_bucket::TokenBucket;
use crate::conditioner::{Conditioner, Marking};
use crate::flow::{Packet, PacketColor};
use crate::units::{Duration, Instant, Rate};

/// Color-blind two-rate three-color semantics: a packet that exceeds the
/// peak bucket is Red, one that only exceeds the committed bucket is Yellow,
/// and a conforming packet is Green (debiting both buckets).
#[derive(Debug)]
pub struct TrtcmMarker {
    cir_bucket: TokenBucket,
    pir_bucket: TokenBucket,
}

impl TrtcmMarker {
    pub fn new(cir: Rate, cir_depth: u32, pir: Rate, pir_depth: u32) -> TrtcmMarker {
        assert!(pir >= cir, "PIR must be at least CIR");
        TrtcmMarker {
            cir_bucket: TokenBucket::new(cir, cir_depth),
            pir_bucket: TokenBucket::new(pir, pir_depth),
        }
    }

    pub fn mark(&mut self, pkt: &Packet, now: Instant) -> PacketColor {
        if !self.pir_bucket.would_conform(pkt.size, now) {
            return PacketColor::Red;
        }
        if !self.cir_bucket.would_conform(pkt.size, now) {
            self.pir_bucket.debit(pkt.size);
            return PacketColor::Yellow;
        }
        self.pir_bucket.debit(pkt.size);
        self.cir_bucket.debit(pkt.size);
        PacketColor::Green
    }
}

impl Conditioner for TrtcmMarker {
    fn on_packet(&mut self, pkt: &Packet, now: Instant) -> Marking {
        Marking { color: self.mark(pkt, now), delay: Duration::ZERO }
    }

    fn set_target(&mut self, rate: Rate) {
        self.cir_bucket.set_rate(rate);
    }

    fn current_target(&self) -> Option<Rate> {
        Some(self.cir_bucket.rate())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_cbr(marker: &mut TrtcmMarker, rate_bps: f64, size: u32, secs: f64) -> (u64, u64, u64) {
        let (mut g, mut y, mut r) = (0u64, 0u64, 0u64);
        let interval = size as f64 * 8.0 / rate_bps;
        let mut t = 0.0;
        while t < secs {
            t += interval;
            let pkt = Packet::data(1, 0, size, Instant::at_secs(t));
            match marker.mark(&pkt, Instant::at_secs(t)) {
                PacketColor::Green => g += 1,
                PacketColor::Yellow => y += 1,
                PacketColor::Red => r += 1,
            }
        }
        (g, y, r)
    }

    #[test]
    fn below_cir_all_green() {
        let mut m = TrtcmMarker::new(Rate::mbps(2.0), 3000, Rate::mbps(4.0), 3000);
        let (g, y, r) = run_cbr(&mut m, 1.5e6, 1500, 30.0);
        assert!(y == 0 && r == 0 && g > 0);
    }

    #[test]
    fn between_cir_and_pir_splits_green_yellow() {
        // Sustained 3 Mb/s against CIR 2 / PIR 4: green share ≈ 2/3,
        // yellow the rest, no red. Long-run fractions within 5%.
        let mut m = TrtcmMarker::new(Rate::mbps(2.0), 3000, Rate::mbps(4.0), 3000);
        let (g, y, r) = run_cbr(&mut m, 3e6, 1500, 60.0);
        let total = (g + y + r) as f64;
        assert_eq!(r, 0);
        assert!((g as f64 / total - 2.0 / 3.0).abs() < 0.05);
        assert!((y as f64 / total - 1.0 / 3.0).abs() < 0.05);
    }

    #[test]
    fn above_pir_sheds_red() {
        // Sustained 8 Mb/s against PIR 4: red fraction ≈ (8−4)/8 = 1/2.
        let mut m = TrtcmMarker::new(Rate::mbps(2.0), 3000, Rate::mbps(4.0), 3000);
        let (g, y, r) = run_cbr(&mut m, 8e6, 1500, 60.0);
        let total = (g + y + r) as f64;
        assert!((r as f64 / total - 0.5).abs() < 0.05);
        assert!((g as f64 / total - 0.25).abs() < 0.05);
        assert!((y as f64 / total - 0.25).abs() < 0.05);
    }
}
