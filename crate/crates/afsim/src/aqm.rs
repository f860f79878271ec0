//! Core-router queueing: RED and the two-level RIO discipline.
//!
//! RIO keeps two averages: the in-profile occupancy, tested against the
//! in-profile thresholds for Green arrivals, and the total occupancy, tested
//! against the (lower) out-profile thresholds for everything else. That
//! ordering is what gives in-profile packets their drop-precedence
//! protection.

use crate::flow::{Packet, PacketColor};
use crate::units::{Instant, Rate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Thresholds for one RED instance. Occupancies are in packets.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedParams {
    pub min_th: f64,
    pub max_th: f64,
    pub max_p: f64,
    /// EWMA weight applied per arrival.
    pub wq: f64,
}

impl RedParams {
    pub fn validate(&self, label: &str) -> Result<(), String> {
        if !(self.min_th >= 0.0 && self.min_th < self.max_th) {
            return Err(format!("{label}: need 0 <= min_th < max_th"));
        }
        if !(self.max_p > 0.0 && self.max_p <= 1.0) {
            return Err(format!("{label}: max_p must be in (0, 1]"));
        }
        if !(self.wq > 0.0 && self.wq < 1.0) {
            return Err(format!("{label}: wq must be in (0, 1)"));
        }
        Ok(())
    }
}

/// Classic non-gentle RED drop law: zero below min_th, linear ramp to max_p
/// just under max_th, certain drop at and above max_th.
pub fn red_drop_prob(avg: f64, params: &RedParams) -> f64 {
    if avg < params.min_th {
        0.0
    } else if avg < params.max_th {
        params.max_p * (avg - params.min_th) / (params.max_th - params.min_th)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Enqueued,
    /// Accepted, but congestion-marked instead of dropped.
    EnqueuedEcnMarked,
    Dropped,
}

/// Exact per-color tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ColorCounts {
    pub green: u64,
    pub yellow: u64,
    pub red: u64,
}

impl ColorCounts {
    fn bump(&mut self, color: PacketColor) {
        match color {
            PacketColor::Green => self.green += 1,
            PacketColor::Yellow => self.yellow += 1,
            PacketColor::Red => self.red += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.green + self.yellow + self.red
    }

    /// Count of out-profile entries (Yellow enforces Red precedence).
    pub fn out_profile(&self) -> u64 {
        self.yellow + self.red
    }
}

/// Dual-RED queue with drop precedence, standard ECN semantics, and the
/// optional out-drop → in-profile ECN coupling.
pub struct RioQueue {
    in_params: RedParams,
    out_params: RedParams,
    avg_in: f64,
    avg_total: f64,
    queue: VecDeque<Packet>,
    capacity: usize,
    green_occupancy: usize,
    /// Set while the output link sits idle; arrivals decay the averages by
    /// the packets that could have been sent in that time.
    idle_since: Option<Instant>,
    line_rate: Rate,
    ecn: bool,
    penalty_coupling: bool,
    rng: ChaCha8Rng,
    pub drop_count: ColorCounts,
    pub accept_count: ColorCounts,
    pub ecn_mark_count: u64,
    /// In-profile packets marked by the out-drop coupling.
    pub coupling_mark_count: u64,
}

impl RioQueue {
    pub fn new(
        in_params: RedParams,
        out_params: RedParams,
        capacity: usize,
        line_rate: Rate,
        ecn: bool,
        penalty_coupling: bool,
        rng: ChaCha8Rng,
    ) -> RioQueue {
        RioQueue {
            in_params,
            out_params,
            avg_in: 0.0,
            avg_total: 0.0,
            queue: VecDeque::new(),
            capacity,
            green_occupancy: 0,
            idle_since: Some(Instant::ZERO),
            line_rate,
            ecn,
            penalty_coupling,
            rng,
            drop_count: ColorCounts::default(),
            accept_count: ColorCounts::default(),
            ecn_mark_count: 0,
            coupling_mark_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn avg_in(&self) -> f64 {
        self.avg_in
    }

    pub fn avg_total(&self) -> f64 {
        self.avg_total
    }

    /// The output link went idle (nothing left to send).
    pub fn mark_idle(&mut self, now: Instant) {
        self.idle_since = Some(now);
    }

    fn decay_for_idle(&mut self, now: Instant, pkt_size: u32) {
        if let Some(idle_start) = self.idle_since.take() {
            let idle = now.since(idle_start).as_secs();
            let pkt_time = pkt_size as f64 * 8.0 / self.line_rate.as_bps();
            if pkt_time > 0.0 && idle > 0.0 {
                // Virtual departures at line rate during the idle period.
                let m = idle / pkt_time;
                let decay = (1.0 - self.in_params.wq).powf(m);
                self.avg_in *= decay;
                let decay_total = (1.0 - self.out_params.wq).powf(m);
                self.avg_total *= decay_total;
            }
        }
    }

    /// RIO decision for one colored packet: updates the averages, applies
    /// the RED law for the packet's precedence level, and either queues,
    /// queues-with-ECN-mark, or drops.
    pub fn enqueue(&mut self, mut pkt: Packet, now: Instant) -> EnqueueOutcome {
        self.decay_for_idle(now, pkt.size);

        // Occupancy is sampled before the arriving packet joins.
        let total_occ = self.queue.len() as f64;
        self.avg_total = (1.0 - self.out_params.wq) * self.avg_total + self.out_params.wq * total_occ;
        let in_profile = pkt.color.drop_precedence() == PacketColor::Green;
        if in_profile {
            let green_occ = self.green_occupancy as f64;
            self.avg_in = (1.0 - self.in_params.wq) * self.avg_in + self.in_params.wq * green_occ;
        }

        if self.queue.len() >= self.capacity {
            return self.drop(pkt);
        }

        let (avg, params) = if in_profile {
            (self.avg_in, &self.in_params)
        } else {
            (self.avg_total, &self.out_params)
        };
        let p = red_drop_prob(avg, params);
        if p > 0.0 && self.rng.gen::<f64>() < p {
            // Standard ECN: below the hard-drop region, capable packets are
            // marked instead of dropped; at or above max_th they drop anyway.
            if self.ecn && pkt.ecn_capable && avg < params.max_th {
                pkt.mark_ecn();
                self.ecn_mark_count += 1;
                self.accept(pkt);
                return EnqueueOutcome::EnqueuedEcnMarked;
            }
            return self.drop(pkt);
        }
        self.accept(pkt);
        EnqueueOutcome::Enqueued
    }

    fn accept(&mut self, pkt: Packet) {
        self.accept_count.bump(pkt.color);
        if pkt.color.drop_precedence() == PacketColor::Green {
            self.green_occupancy += 1;
        }
        self.queue.push_back(pkt);
    }

    fn drop(&mut self, pkt: Packet) -> EnqueueOutcome {
        self.drop_count.bump(pkt.color);
        if self.penalty_coupling && pkt.color.drop_precedence() == PacketColor::Red {
            self.couple_out_drop();
        }
        EnqueueOutcome::Dropped
    }

    /// An out-profile drop just happened: congestion-mark every in-profile
    /// ECN-capable packet currently enqueued, so the edges learn that the
    /// network is shedding out-profile traffic.
    fn couple_out_drop(&mut self) {
        for pkt in self.queue.iter_mut() {
            if pkt.color.drop_precedence() == PacketColor::Green && pkt.ecn_capable && !pkt.ecn_marked {
                pkt.mark_ecn();
                self.coupling_mark_count += 1;
            }
        }
    }

    pub fn dequeue(&mut self) -> Option<Packet> {
        let pkt = self.queue.pop_front()?;
        if pkt.color.drop_precedence() == PacketColor::Green {
            self.green_occupancy -= 1;
        }
        Some(pkt)
    }

    /// Residual content, for end-of-run conservation accounting.
    pub fn drain(&mut self) -> Vec<Packet> {
        self.green_occupancy = 0;
        self.queue.drain(..).collect()
    }
}

/// Plain FIFO that drops arrivals with a fixed probability — the loss model
/// used to cross-check the analytic throughput models in a closed loop.
pub struct BernoulliQueue {
    queue: VecDeque<Packet>,
    capacity: usize,
    drop_p: f64,
    rng: ChaCha8Rng,
    pub drop_count: ColorCounts,
    pub accept_count: ColorCounts,
}

impl BernoulliQueue {
    pub fn new(capacity: usize, drop_p: f64, rng: ChaCha8Rng) -> BernoulliQueue {
        BernoulliQueue {
            queue: VecDeque::new(),
            capacity,
            drop_p,
            rng,
            drop_count: ColorCounts::default(),
            accept_count: ColorCounts::default(),
        }
    }
}

/// The bottleneck buffer in either discipline.
pub enum BottleneckQueue {
    Rio(RioQueue),
    Bernoulli(BernoulliQueue),
}

impl BottleneckQueue {
    pub fn enqueue(&mut self, pkt: Packet, now: Instant) -> EnqueueOutcome {
        match self {
            BottleneckQueue::Rio(q) => q.enqueue(pkt, now),
            BottleneckQueue::Bernoulli(q) => {
                if q.queue.len() >= q.capacity || q.rng.gen::<f64>() < q.drop_p {
                    q.drop_count.bump(pkt.color);
                    EnqueueOutcome::Dropped
                } else {
                    q.accept_count.bump(pkt.color);
                    q.queue.push_back(pkt);
                    EnqueueOutcome::Enqueued
                }
            }
        }
    }

    pub fn dequeue(&mut self) -> Option<Packet> {
        match self {
            BottleneckQueue::Rio(q) => q.dequeue(),
            BottleneckQueue::Bernoulli(q) => q.queue.pop_front(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BottleneckQueue::Rio(q) => q.len(),
            BottleneckQueue::Bernoulli(q) => q.queue.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mark_idle(&mut self, now: Instant) {
        if let BottleneckQueue::Rio(q) = self {
            q.mark_idle(now);
        }
    }

    pub fn drop_count(&self) -> ColorCounts {
        match self {
            BottleneckQueue::Rio(q) => q.drop_count,
            BottleneckQueue::Bernoulli(q) => q.drop_count,
        }
    }

    pub fn ecn_mark_count(&self) -> u64 {
        match self {
            BottleneckQueue::Rio(q) => q.ecn_mark_count + q.coupling_mark_count,
            BottleneckQueue::Bernoulli(_) => 0,
        }
    }

    pub fn drain(&mut self) -> Vec<Packet> {
        match self {
            BottleneckQueue::Rio(q) => q.drain(),
            BottleneckQueue::Bernoulli(q) => q.queue.drain(..).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AqmMode {
    #[default]
    Rio,
    /// Fixed random loss, for model cross-checks.
    Bernoulli,
}

fn default_capacity() -> usize {
    100
}

fn default_in_params() -> RedParams {
    RedParams { min_th: 40.0, max_th: 70.0, max_p: 0.02, wq: 0.002 }
}

fn default_out_params() -> RedParams {
    RedParams { min_th: 10.0, max_th: 30.0, max_p: 0.20, wq: 0.002 }
}

/// Bottleneck queue configuration as it appears in scenario files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AqmConfig {
    pub mode: AqmMode,
    #[serde(rename = "in")]
    pub in_profile: RedParams,
    pub out: RedParams,
    pub capacity: usize,
    /// Standard ECN: mark capable packets instead of dropping below max_th.
    pub ecn: bool,
    /// Out-drop → in-profile ECN coupling for the penalty shaper.
    pub penalty_coupling: bool,
    /// Drop probability for bernoulli mode.
    pub drop_p: Option<f64>,
}

impl Default for AqmConfig {
    fn default() -> Self {
        AqmConfig {
            mode: AqmMode::Rio,
            in_profile: default_in_params(),
            out: default_out_params(),
            capacity: default_capacity(),
            ecn: false,
            penalty_coupling: false,
            drop_p: None,
        }
    }
}

impl AqmConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.in_profile.validate("aqm.in")?;
        self.out.validate("aqm.out")?;
        if self.capacity == 0 {
            return Err("aqm.capacity must be > 0".into());
        }
        // Drop precedence needs the out-profile thresholds at or below the
        // in-profile ones and at least as aggressive a ramp.
        if self.out.min_th > self.in_profile.min_th || self.out.max_th > self.in_profile.max_th {
            return Err("aqm.out thresholds must not exceed aqm.in thresholds".into());
        }
        if self.out.max_p < self.in_profile.max_p {
            return Err("aqm.out.max_p must be >= aqm.in.max_p".into());
        }
        match self.mode {
            AqmMode::Bernoulli => match self.drop_p {
                Some(p) if (0.0..=1.0).contains(&p) => Ok(()),
                Some(_) => Err("aqm.drop_p must be in [0, 1]".into()),
                None => Err("aqm.drop_p is required in bernoulli mode".into()),
            },
            AqmMode::Rio => Ok(()),
        }
    }

    pub fn build(&self, line_rate: Rate, rng: ChaCha8Rng) -> BottleneckQueue {
        match self.mode {
            AqmMode::Rio => BottleneckQueue::Rio(RioQueue::new(
                self.in_profile,
                self.out,
                self.capacity,
                line_rate,
                self.ecn,
                self.penalty_coupling,
                rng,
            )),
            AqmMode::Bernoulli => BottleneckQueue::Bernoulli(BernoulliQueue::new(
                self.capacity,
                self.drop_p.unwrap_or(0.0),
                rng,
            )),
        }
    }
}
