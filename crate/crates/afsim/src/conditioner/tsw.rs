//! Time Sliding Window average-rate estimator.

use crate::units::{Duration, Instant, Rate};

/// Recursive rate estimator: each arrival folds the new bytes into a
/// window-weighted average of the previous estimate.
#[derive(Debug, Clone)]
pub struct TswEstimator {
    window: Duration,
    avg_rate: Rate,
    last_arrival: Instant,
}

impl TswEstimator {
    pub fn new(window: Duration) -> TswEstimator {
        TswEstimator { window, avg_rate: Rate::ZERO, last_arrival: Instant::ZERO }
    }

    pub fn avg_rate(&self) -> Rate {
        self.avg_rate
    }

    /// avg ← (avg·window + bytes·8) / (window + gap), gap being the time
    /// since the previous arrival.
    pub fn update(&mut self, pkt_bytes: u32, now: Instant) -> Rate {
        let gap = now.since(self.last_arrival).as_secs();
        let win = self.window.as_secs();
        let bits = pkt_bytes as f64 * 8.0;
        self.avg_rate = Rate::bps((self.avg_rate.as_bps() * win + bits) / (win + gap));
        self.last_arrival = now;
        self.avg_rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cbr_converges_to_true_rate() {
        // 1000 pkt/s of 1000 B is 8 Mb/s; within 1% after ten window lengths.
        let mut tsw = TswEstimator::new(Duration::secs(0.1));
        let mut rate = Rate::ZERO;
        let mut t = 0.0;
        while t < 1.0 {
            t += 0.001;
            rate = tsw.update(1000, Instant::at_secs(t));
        }
        assert!((rate.as_bps() - 8e6).abs() / 8e6 < 0.01, "got {rate}");
    }

    #[test]
    fn constant_spacing_fixed_point() {
        // Inter-arrival Δ with size s has fixed point avg = 8s/Δ; seed the
        // estimator at the fixed point and verify it stays there.
        let mut tsw = TswEstimator::new(Duration::secs(0.5));
        let delta = 0.004;
        let size = 1200u32;
        let fixed = 8.0 * size as f64 / delta;
        for i in 1..=2000 {
            tsw.update(size, Instant::at_secs(i as f64 * delta));
        }
        assert!((tsw.avg_rate().as_bps() - fixed).abs() / fixed < 1e-6);
        let next = tsw.update(size, Instant::at_secs(2001.0 * delta));
        assert!((next.as_bps() - fixed).abs() / fixed < 1e-6);
    }

    #[test]
    fn long_idle_decays_estimate() {
        let mut tsw = TswEstimator::new(Duration::secs(1.0));
        for i in 1..=100 {
            tsw.update(1500, Instant::at_secs(i as f64 * 0.01));
        }
        let before = tsw.avg_rate().as_bps();
        // One packet after a 100 s gap: the recurrence value is
        // (avg·win + 8s)/(win + gap), dominated by the fresh-packet term.
        let after = tsw.update(1500, Instant::at_secs(101.0)).as_bps();
        let expected = (before * 1.0 + 12000.0) / (1.0 + 100.0);
        assert!((after - expected).abs() < 1e-9);
        assert!(after < before / 50.0);
    }
}
