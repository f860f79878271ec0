//! Packet-level TCP Reno endpoint.
//!
//! Plain Reno: slow start, congestion avoidance, fast retransmit on the
//! third duplicate ACK with window inflation during fast recovery, and
//! timeout recovery with exponential backoff. No SACK, no partial-ack
//! handling. Sequence numbers count segments, the window is a float in
//! segments, and the application always has data ready.

use crate::conditioner::TcpEventKind;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

fn default_rwnd() -> u64 {
    64
}

fn default_rto_min() -> f64 {
    0.2
}

fn default_initial_rto() -> f64 {
    1.0
}

/// Transport tunables as they appear in scenario files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TcpConfig {
    /// Acknowledge every second in-order segment instead of every one.
    pub delayed_ack: bool,
    /// Receive window in segments; doubles as the model's window cap.
    pub rwnd: u64,
    pub rto_min: f64,
    pub initial_rto: f64,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig {
            delayed_ack: false,
            rwnd: default_rwnd(),
            rto_min: default_rto_min(),
            initial_rto: default_initial_rto(),
        }
    }
}

impl TcpConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.rwnd < 2 {
            return Err("tcp.rwnd must be >= 2".into());
        }
        if self.rto_min <= 0.0 || self.rto_min.is_nan() {
            return Err("tcp.rto_min must be > 0".into());
        }
        if self.initial_rto < self.rto_min || self.initial_rto.is_nan() {
            return Err("tcp.initial_rto must be >= tcp.rto_min".into());
        }
        Ok(())
    }
}

const RTO_MAX: f64 = 60.0;

/// Standard smoothed RTT estimator: gains 1/8 and 1/4, RTO = srtt + 4·rttvar
/// clamped to [rto_min, 60 s]. Shared by the TCP endpoint and the passive
/// edge estimator.
#[derive(Debug, Clone)]
pub struct RttEstimator {
    pub srtt: Option<f64>,
    pub rttvar: f64,
    pub rto: f64,
    rto_min: f64,
}

impl RttEstimator {
    pub fn new(initial_rto: f64, rto_min: f64) -> RttEstimator {
        RttEstimator { srtt: None, rttvar: 0.0, rto: initial_rto, rto_min }
    }

    pub fn update(&mut self, sample: f64) {
        match self.srtt {
            None => {
                self.srtt = Some(sample);
                self.rttvar = sample / 2.0;
            }
            Some(srtt) => {
                self.rttvar = 0.75 * self.rttvar + 0.25 * (srtt - sample).abs();
                self.srtt = Some(0.875 * srtt + 0.125 * sample);
            }
        }
        self.rto = (self.srtt.unwrap() + 4.0 * self.rttvar).clamp(self.rto_min, RTO_MAX);
    }

    pub fn backoff(&mut self) {
        self.rto = (self.rto * 2.0).min(RTO_MAX);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcpPhase {
    SlowStart,
    CongestionAvoidance,
    FastRecovery,
}

#[derive(Debug, Clone, Copy)]
struct SendInfo {
    at: f64,
    /// Cleared on retransmission; retransmitted segments never produce RTT
    /// samples.
    rtt_eligible: bool,
}

/// What the sender wants done after processing an ACK.
#[derive(Debug, Default)]
pub struct AckOutcome {
    /// (seq, is_retransmission) pairs to put on the wire.
    pub new_sends: Vec<(u64, bool)>,
    pub retransmit: Option<u64>,
    pub events: Vec<TcpEventKind>,
    pub rtt_sample: Option<f64>,
    /// True when the retransmission timer should be restarted; false means
    /// stop it (no data outstanding).
    pub restart_timer: bool,
}

/// Both ends of one simulated connection (the simulator owns sender and
/// receiver state together).
#[derive(Debug)]
pub struct TcpConn {
    rwnd: u64,
    delayed_ack: bool,
    // Sender.
    pub cwnd: f64,
    pub ssthresh: f64,
    pub phase: TcpPhase,
    pub est: RttEstimator,
    dup_acks: u32,
    snd_next: u64,
    snd_una: u64,
    /// Sequence numbers below this have been sent before; re-sends of them
    /// after a timeout are retransmissions and never produce RTT samples.
    rexmit_until: u64,
    send_times: BTreeMap<u64, SendInfo>,
    /// Bumped on every timer restart/stop; stale timer events are ignored.
    pub timer_gen: u64,
    /// Window edge up to which an ECN echo has already been answered;
    /// at most one reduction per round trip of data.
    ecn_reaction_until: u64,
    // Receiver.
    rcv_nxt: u64,
    out_of_order: BTreeSet<u64>,
    unacked_in_order: u32,
    /// Congestion experienced on a delivered segment, not yet echoed.
    pending_ecn_echo: bool,
    /// Segments delivered in order exactly once (goodput).
    pub unique_delivered: u64,
}

impl TcpConn {
    pub fn new(cfg: &TcpConfig) -> TcpConn {
        TcpConn {
            rwnd: cfg.rwnd,
            delayed_ack: cfg.delayed_ack,
            cwnd: 2.0,
            ssthresh: cfg.rwnd as f64,
            phase: TcpPhase::SlowStart,
            est: RttEstimator::new(cfg.initial_rto, cfg.rto_min),
            dup_acks: 0,
            snd_next: 0,
            snd_una: 0,
            rexmit_until: 0,
            send_times: BTreeMap::new(),
            timer_gen: 0,
            ecn_reaction_until: 0,
            rcv_nxt: 0,
            out_of_order: BTreeSet::new(),
            unacked_in_order: 0,
            pending_ecn_echo: false,
            unique_delivered: 0,
        }
    }

    pub fn outstanding(&self) -> bool {
        self.snd_una < self.snd_next
    }

    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }

    fn effective_window(&self) -> u64 {
        (self.cwnd.floor() as u64).max(1).min(self.rwnd)
    }

    /// Emits as many segments as the window allows, recording their send
    /// times. Each item is (seq, is_retransmission): after a timeout rewind,
    /// the sends below the old high-water mark are retransmissions.
    pub fn take_sends(&mut self, now: f64) -> Vec<(u64, bool)> {
        let mut out = Vec::new();
        while self.snd_next - self.snd_una < self.effective_window() {
            let seq = self.snd_next;
            let fresh = seq >= self.rexmit_until;
            self.send_times.insert(seq, SendInfo { at: now, rtt_eligible: fresh });
            out.push((seq, !fresh));
            self.snd_next += 1;
        }
        out
    }

    fn mark_retransmitted(&mut self, seq: u64, now: f64) {
        self.send_times.insert(seq, SendInfo { at: now, rtt_eligible: false });
    }

    /// Receiver side: a data segment reached the sink. Returns the
    /// cumulative ACK to send and whether it carries a congestion echo, if
    /// an ACK should go out now.
    pub fn on_data_at_sink(&mut self, seq: u64, congestion_marked: bool) -> Option<(u64, bool)> {
        if congestion_marked {
            self.pending_ecn_echo = true;
        }
        let mut advanced = false;
        if seq == self.rcv_nxt {
            self.rcv_nxt += 1;
            self.unique_delivered += 1;
            advanced = true;
            while self.out_of_order.remove(&self.rcv_nxt) {
                self.rcv_nxt += 1;
                self.unique_delivered += 1;
            }
        } else if seq > self.rcv_nxt {
            self.out_of_order.insert(seq);
        }
        // Duplicates of already-received segments still trigger an ACK.

        if self.delayed_ack && advanced && self.out_of_order.is_empty() {
            self.unacked_in_order += 1;
            if self.unacked_in_order < 2 {
                return None;
            }
        }
        self.unacked_in_order = 0;
        let echo = self.pending_ecn_echo;
        self.pending_ecn_echo = false;
        Some((self.rcv_nxt, echo))
    }

    /// Sender side: the ACK stream echoed a congestion mark. Standard ECN
    /// response: halve once per window of data, without retransmitting.
    /// Returns true when a reduction was applied.
    pub fn on_ecn_echo(&mut self) -> bool {
        if self.phase == TcpPhase::FastRecovery || self.snd_una < self.ecn_reaction_until {
            return false;
        }
        self.ssthresh = (self.cwnd / 2.0).max(2.0);
        self.cwnd = self.ssthresh;
        self.phase = TcpPhase::CongestionAvoidance;
        self.ecn_reaction_until = self.snd_next;
        true
    }

    /// Sender side: a cumulative ACK arrived.
    pub fn on_ack_at_source(&mut self, ack: u64, now: f64) -> AckOutcome {
        let mut out = AckOutcome::default();
        if ack > self.snd_una {
            // Sample RTT from the newest segment this ACK covers, if it was
            // never retransmitted.
            if let Some(info) = self.send_times.get(&(ack - 1)) {
                if info.rtt_eligible {
                    let sample = now - info.at;
                    self.est.update(sample);
                    out.rtt_sample = Some(sample);
                }
            }
            let range: Vec<u64> = self.send_times.range(..ack).map(|(s, _)| *s).collect();
            for seq in range {
                self.send_times.remove(&seq);
            }
            self.snd_una = ack;
            // A late ACK after a timeout rewind can overtake snd_next
            // (spurious RTO); everything below snd_una needs no re-send.
            self.snd_next = self.snd_next.max(self.snd_una);
            self.dup_acks = 0;
            match self.phase {
                TcpPhase::FastRecovery => {
                    // Plain Reno: the first new ACK ends recovery.
                    self.cwnd = self.ssthresh;
                    self.phase = TcpPhase::CongestionAvoidance;
                }
                TcpPhase::SlowStart => {
                    self.cwnd += 1.0;
                    if self.cwnd >= self.ssthresh {
                        self.phase = TcpPhase::CongestionAvoidance;
                    }
                }
                TcpPhase::CongestionAvoidance => {
                    self.cwnd += 1.0 / self.cwnd;
                }
            }
            out.new_sends = self.take_sends(now);
            out.restart_timer = self.outstanding();
        } else if self.outstanding() {
            // Duplicate ACK.
            self.dup_acks += 1;
            match self.phase {
                TcpPhase::FastRecovery => {
                    self.cwnd += 1.0;
                    out.new_sends = self.take_sends(now);
                }
                _ if self.dup_acks == 3 => {
                    self.ssthresh = (self.cwnd / 2.0).max(2.0);
                    self.cwnd = self.ssthresh + 3.0;
                    self.phase = TcpPhase::FastRecovery;
                    self.mark_retransmitted(self.snd_una, now);
                    out.retransmit = Some(self.snd_una);
                    out.events.push(TcpEventKind::TripleDupAck);
                    out.restart_timer = true;
                }
                _ => {}
            }
        }
        out
    }

    /// The retransmission timer fired (and was not stale).
    pub fn on_rto(&mut self, now: f64) -> Option<u64> {
        if !self.outstanding() {
            return None;
        }
        self.ssthresh = (self.cwnd / 2.0).max(2.0);
        self.cwnd = 1.0;
        self.phase = TcpPhase::SlowStart;
        self.dup_acks = 0;
        self.est.backoff();
        // Go-back-N: everything past the hole is presumed lost and will be
        // re-sent as the window reopens. None of it may produce RTT samples.
        self.rexmit_until = self.rexmit_until.max(self.snd_next);
        self.snd_next = self.snd_una + 1;
        self.send_times.retain(|seq, _| *seq <= self.snd_una);
        for info in self.send_times.values_mut() {
            info.rtt_eligible = false;
        }
        self.mark_retransmitted(self.snd_una, now);
        Some(self.snd_una)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conn() -> TcpConn {
        TcpConn::new(&TcpConfig::default())
    }

    #[test]
    fn slow_start_grows_one_per_ack() {
        let mut c = conn();
        c.cwnd = 1.0;
        let sends = c.take_sends(0.0);
        assert_eq!(sends, vec![(0, false)]);
        // Feed 10 ACKs; each acknowledges one segment and allows more out.
        let mut acked = 0;
        for _ in 0..10 {
            acked += 1;
            let out = c.on_ack_at_source(acked, 0.01 * acked as f64);
            assert!(out.retransmit.is_none());
            let _ = c.take_sends(0.01 * acked as f64);
        }
        assert!((c.cwnd - 11.0).abs() < 1e-9, "cwnd {}", c.cwnd);
    }

    #[test]
    fn triple_dup_ack_halves_ssthresh() {
        let mut c = conn();
        c.cwnd = 20.0;
        c.ssthresh = 64.0;
        c.phase = TcpPhase::CongestionAvoidance;
        let _ = c.take_sends(0.0);
        // First ACK advances to 1; then three duplicates of 1.
        c.on_ack_at_source(1, 0.1);
        c.cwnd = 20.0; // pin the window the loss is measured against
        for _ in 0..2 {
            let out = c.on_ack_at_source(1, 0.11);
            assert!(out.retransmit.is_none());
        }
        let out = c.on_ack_at_source(1, 0.12);
        assert_eq!(out.retransmit, Some(1));
        assert!(out.events.contains(&TcpEventKind::TripleDupAck));
        assert!((c.ssthresh - 10.0).abs() < 1e-9, "ssthresh {}", c.ssthresh);
        assert_eq!(c.phase, TcpPhase::FastRecovery);
        // cwnd inflated to ssthresh + 3.
        assert!((c.cwnd - 13.0).abs() < 1e-9);
    }

    #[test]
    fn new_ack_exits_fast_recovery_at_ssthresh() {
        let mut c = conn();
        c.cwnd = 20.0;
        c.phase = TcpPhase::CongestionAvoidance;
        let _ = c.take_sends(0.0);
        c.on_ack_at_source(1, 0.1);
        for _ in 0..3 {
            c.on_ack_at_source(1, 0.11);
        }
        assert_eq!(c.phase, TcpPhase::FastRecovery);
        c.on_ack_at_source(5, 0.2);
        assert_eq!(c.phase, TcpPhase::CongestionAvoidance);
        assert!((c.cwnd - c.ssthresh).abs() < 1e-9);
    }

    #[test]
    fn rto_collapses_window_and_backs_off() {
        let mut c = conn();
        c.cwnd = 16.0;
        c.phase = TcpPhase::CongestionAvoidance;
        let _ = c.take_sends(0.0);
        let rto_before = c.est.rto;
        let retx = c.on_rto(1.0);
        assert_eq!(retx, Some(0));
        assert_eq!(c.cwnd, 1.0);
        assert!((c.ssthresh - 8.0).abs() < 1e-9);
        assert_eq!(c.phase, TcpPhase::SlowStart);
        assert_eq!(c.est.rto, rto_before * 2.0);
    }

    #[test]
    fn receiver_reassembles_out_of_order() {
        let mut c = conn();
        assert_eq!(c.on_data_at_sink(0, false), Some((1, false)));
        // Gap: 2 arrives before 1; duplicate ACK for 1.
        assert_eq!(c.on_data_at_sink(2, false), Some((1, false)));
        // 1 fills the hole; cumulative ACK jumps to 3.
        assert_eq!(c.on_data_at_sink(1, false), Some((3, false)));
        assert_eq!(c.unique_delivered, 3);
        // A duplicate segment does not double-count goodput.
        assert_eq!(c.on_data_at_sink(1, false), Some((3, false)));
        assert_eq!(c.unique_delivered, 3);
    }

    #[test]
    fn ecn_echo_halves_once_per_window() {
        let mut c = conn();
        c.cwnd = 16.0;
        c.phase = TcpPhase::CongestionAvoidance;
        let _ = c.take_sends(0.0);
        assert!(c.on_ecn_echo());
        assert!((c.cwnd - 8.0).abs() < 1e-9);
        // A second echo within the same window is ignored.
        assert!(!c.on_ecn_echo());
        assert!((c.cwnd - 8.0).abs() < 1e-9);
    }

    #[test]
    fn marked_delivery_sets_echo_on_the_ack() {
        let mut c = conn();
        assert_eq!(c.on_data_at_sink(0, true), Some((1, true)));
        // Echo is not sticky once answered.
        assert_eq!(c.on_data_at_sink(1, false), Some((2, false)));
    }

    #[test]
    fn delayed_ack_coalesces_pairs() {
        let mut c = TcpConn::new(&TcpConfig { delayed_ack: true, ..TcpConfig::default() });
        assert_eq!(c.on_data_at_sink(0, false), None);
        assert_eq!(c.on_data_at_sink(1, false), Some((2, false)));
        assert_eq!(c.on_data_at_sink(2, false), None);
        // Out-of-order data forces an immediate ACK.
        assert_eq!(c.on_data_at_sink(4, false), Some((3, false)));
    }

    #[test]
    fn retransmitted_segments_never_sample_rtt() {
        let mut c = conn();
        let _ = c.take_sends(0.0);
        c.on_ack_at_source(1, 0.1);
        for _ in 0..3 {
            c.on_ack_at_source(1, 0.12);
        }
        // Segment 1 was retransmitted; its ACK must not move the estimator.
        let srtt_before = c.est.srtt;
        let out = c.on_ack_at_source(2, 0.5);
        assert!(out.rtt_sample.is_none());
        assert_eq!(c.est.srtt, srtt_before);
    }

    #[test]
    fn rtt_estimator_standard_gains() {
        let mut est = RttEstimator::new(1.0, 0.2);
        est.update(0.1);
        assert_eq!(est.srtt, Some(0.1));
        assert!((est.rttvar - 0.05).abs() < 1e-12);
        assert!((est.rto - 0.3).abs() < 1e-12);
        est.update(0.2);
        // rttvar = 0.75·0.05 + 0.25·0.1 = 0.0625; srtt = 0.875·0.1 + 0.125·0.2 = 0.1125.
        assert!((est.rttvar - 0.0625).abs() < 1e-12);
        assert!((est.srtt.unwrap() - 0.1125).abs() < 1e-12);
    }

    #[test]
    fn window_respects_rwnd_cap() {
        let mut c = conn();
        c.cwnd = 1000.0;
        let sends = c.take_sends(0.0);
        assert_eq!(sends.len(), 64);
    }
}

