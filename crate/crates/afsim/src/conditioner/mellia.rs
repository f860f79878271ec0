//! Qualitative TCP-state marker.
//!
//! Protects the packets that matter most to TCP's control loop: the opening
//! window of a flow and the retransmissions after a timeout or triple
//! duplicate ACK are forced in-profile, so a loss there cannot push the
//! sender into (or keep it in) the small-window regime. Everything else is
//! delegated to a plain token bucket.

use crate::conditioner::token_bucket::TokenBucketMarker;
use crate::conditioner::{Conditioner, Marking, TcpStateEvent};
use crate::flow::{Packet, PacketColor};
use crate::units::{Duration, Instant, Rate};

pub const DEFAULT_PROTECT_COUNT: u32 = 8;

pub struct MelliaMarker {
    bucket: TokenBucketMarker,
    n_protect: u32,
    protect_left: u32,
}

impl MelliaMarker {
    pub fn new(rate: Rate, depth_bytes: u32, n_protect: u32) -> MelliaMarker {
        MelliaMarker { bucket: TokenBucketMarker::new(rate, depth_bytes), n_protect, protect_left: 0 }
    }

    pub fn protected_remaining(&self) -> u32 {
        self.protect_left
    }
}

impl Conditioner for MelliaMarker {
    fn on_packet(&mut self, pkt: &Packet, now: Instant) -> Marking {
        let color = if self.protect_left > 0 {
            self.protect_left -= 1;
            PacketColor::Green
        } else {
            self.bucket.mark(pkt, now)
        };
        Marking { color, delay: Duration::ZERO }
    }

    fn on_tcp_event(&mut self, _event: &TcpStateEvent, _now: Instant) {
        // FlowStart, RtoFired, and TripleDupAck all arm the same budget.
        self.protect_left = self.n_protect;
    }

    fn set_target(&mut self, rate: Rate) {
        self.bucket.set_target(rate);
    }

    fn current_target(&self) -> Option<Rate> {
        self.bucket.current_target()
    }
}
