//! Token-bucket conformance and the two-color marker built on it.

use crate::conditioner::{Conditioner, Marking};
use crate::flow::{Packet, PacketColor};
use crate::units::{Duration, Instant, Rate};

/// A rate-r, depth-b credit bucket. Tokens are bytes; the bucket starts full.
#[derive(Debug, Clone)]
pub struct TokenBucket {
    rate: Rate,
    depth: f64,
    tokens: f64,
    last_update: Instant,
}

impl TokenBucket {
    pub fn new(rate: Rate, depth_bytes: u32) -> TokenBucket {
        TokenBucket {
            rate,
            depth: depth_bytes as f64,
            tokens: depth_bytes as f64,
            last_update: Instant::ZERO,
        }
    }

    pub fn rate(&self) -> Rate {
        self.rate
    }

    /// Changes the token rate in place; accumulated tokens are kept.
    pub fn set_rate(&mut self, rate: Rate) {
        self.rate = rate;
    }

    pub fn tokens(&self) -> f64 {
        self.tokens
    }

    fn refill(&mut self, now: Instant) {
        let elapsed = now.since(self.last_update).as_secs();
        let bytes_per_sec = self.rate.as_bps() / 8.0;
        self.tokens = (self.tokens + bytes_per_sec * elapsed).min(self.depth);
        self.last_update = now;
    }

    /// Replenishes for elapsed time, then tries to debit `size` bytes.
    /// Non-conforming packets leave the bucket untouched.
    pub fn conforms(&mut self, size: u32, now: Instant) -> bool {
        self.refill(now);
        if self.tokens >= size as f64 {
            self.tokens -= size as f64;
            true
        } else {
            false
        }
    }

    /// Peeks conformance without debiting (used by the two-rate marker,
    /// which debits in its own order).
    pub fn would_conform(&mut self, size: u32, now: Instant) -> bool {
        self.refill(now);
        self.tokens >= size as f64
    }

    pub fn debit(&mut self, size: u32) {
        self.tokens -= size as f64;
    }
}

/// Marks conforming packets Green and everything else Red.
#[derive(Debug)]
pub struct TokenBucketMarker {
    bucket: TokenBucket,
}

impl TokenBucketMarker {
    pub fn new(rate: Rate, depth_bytes: u32) -> TokenBucketMarker {
        TokenBucketMarker { bucket: TokenBucket::new(rate, depth_bytes) }
    }

    pub fn mark(&mut self, pkt: &Packet, now: Instant) -> PacketColor {
        if self.bucket.conforms(pkt.size, now) {
            PacketColor::Green
        } else {
            PacketColor::Red
        }
    }
}

impl Conditioner for TokenBucketMarker {
    fn on_packet(&mut self, pkt: &Packet, now: Instant) -> Marking {
        Marking { color: self.mark(pkt, now), delay: Duration::ZERO }
    }

    fn set_target(&mut self, rate: Rate) {
        self.bucket.set_rate(rate);
    }

    fn current_target(&self) -> Option<Rate> {
        Some(self.bucket.rate())
    }
}
