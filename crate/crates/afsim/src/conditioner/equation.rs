//! Equation-based marker: inverts the steady-state TCP model to find the
//! out-profile loss exposure that would hold the flow at its target rate,
//! then marks Red with the probability that realizes it.

use crate::analytic::{self, AnalyticError};
use crate::conditioner::token_bucket::TokenBucketMarker;
use crate::conditioner::{Conditioner, EpochTaps, Marking};
use crate::flow::{Packet, PacketColor};
use crate::units::{Duration, Instant, Rate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct EquationMarker {
    target: Rate,
    wmax: f64,
    mss: u32,
    b_ack: u32,
    /// Current probability of marking a packet Red; None until the first
    /// successful epoch.
    out_fraction: Option<f64>,
    fallback: TokenBucketMarker,
    fallback_epochs: u64,
    epoch: Duration,
    rng: ChaCha8Rng,
}

impl EquationMarker {
    pub fn new(
        target: Rate,
        wmax: f64,
        mss: u32,
        b_ack: u32,
        depth_bytes: u32,
        epoch: Duration,
        rng: ChaCha8Rng,
    ) -> EquationMarker {
        EquationMarker {
            target,
            wmax,
            mss,
            b_ack,
            out_fraction: None,
            fallback: TokenBucketMarker::new(target, depth_bytes),
            fallback_epochs: 0,
            epoch,
            rng,
        }
    }

    pub fn out_fraction(&self) -> Option<f64> {
        self.out_fraction
    }

    pub fn fallback_epochs(&self) -> u64 {
        self.fallback_epochs
    }

    /// Recomputes the marking fraction from fresh measurements. Returns the
    /// inversion error when the target is outside the model's reach.
    pub fn retune(
        &mut self,
        rtt: Duration,
        rto: Duration,
        network_loss: Option<f64>,
    ) -> Result<f64, AnalyticError> {
        let inv = analytic::invert_padhye(self.target, self.wmax, rtt, rto, self.mss, self.b_ack)?;
        let fraction = match network_loss {
            // With a network loss estimate, aim the flow's *share* of red
            // exposure so that red-drop probability × red fraction ≈ p*.
            Some(p_net) if p_net > 0.0 => (inv.p / p_net).clamp(0.0, 1.0),
            _ => inv.p,
        };
        self.out_fraction = Some(fraction);
        Ok(fraction)
    }
}

impl Conditioner for EquationMarker {
    fn on_packet(&mut self, pkt: &Packet, now: Instant) -> Marking {
        let color = match self.out_fraction {
            Some(fraction) => {
                if self.rng.gen::<f64>() < fraction {
                    PacketColor::Red
                } else {
                    PacketColor::Green
                }
            }
            None => self.fallback.mark(pkt, now),
        };
        Marking { color, delay: Duration::ZERO }
    }

    fn on_epoch(&mut self, taps: &EpochTaps, _now: Instant) {
        // Degenerate epochs — no RTT sample or no loss-interval history at
        // all — are skipped outright, keeping whatever marking was in force.
        let rtt = match taps.rtt {
            Some(rtt) if rtt.as_secs() > 0.0 => rtt,
            _ => return,
        };
        let Some(loss) = taps.loss_prob else { return };
        let rto = taps.rto.unwrap_or(Duration::secs(4.0 * rtt.as_secs()));
        let network_loss = if loss > 0.0 { Some(loss) } else { None };
        if self.retune(rtt, rto, network_loss).is_err() {
            // Target unreachable for the measured path: fall back to plain
            // token-bucket marking at the contracted rate.
            self.fallback_epochs += 1;
            self.out_fraction = None;
        }
    }

    fn epoch(&self) -> Option<Duration> {
        Some(self.epoch)
    }

    fn set_target(&mut self, rate: Rate) {
        self.target = rate;
        self.fallback.set_target(rate);
    }

    fn current_target(&self) -> Option<Rate> {
        Some(self.target)
    }
}
