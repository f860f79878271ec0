//! Deterministic discrete-event simulation of a dumbbell topology.
//!
//! Each flow has its own access link (pure serialization plus propagation)
//! into a single bottleneck guarded by the configured queue discipline.
//! Conditioners sit at each source's edge; ACKs return on an uncongested
//! reverse path. Events are processed in time order with ties broken by
//! insertion sequence, and all randomness comes from per-component streams
//! derived from the run seed, so a (config, seed) pair fully determines
//! every counter.

pub mod metrics;
pub mod tcp;

use crate::aqm::BottleneckQueue;
use crate::conditioner::{
    build_conditioner, Conditioner, CongestionSignal, ConditionerKind, EpochTaps, RttMode,
    TcpEventKind, TcpStateEvent,
};
use crate::conditioner::park_choi::ParkChoiController;
use crate::flow::{FlowSpec, Packet, PacketColor, PacketKind, TransportKind};
use crate::rng::SeedTree;
use crate::scenario::ScenarioConfig;
use crate::units::{Duration, Instant, Rate};
use metrics::{Conservation, FlowSummary, MetricsRecord, RunSummary, WindowAccum};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use tcp::{RttEstimator, TcpConn};

#[derive(Debug)]
enum Event {
    SourceStart(usize),
    CbrSend(usize),
    RtoTimer { flow: usize, gen: u64 },
    QueueArrival(Packet),
    TxComplete,
    SinkArrival(Packet),
    AckArrival(Packet),
    FeedbackTick,
    EpochTick(usize),
    MetricsTick,
}

struct Scheduled {
    at: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.at.total_cmp(&other.at).is_eq() && self.seq == other.seq
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.at.total_cmp(&other.at).then(self.seq.cmp(&other.seq))
    }
}

/// Passive per-segment RTT estimator, as an edge middlebox would run it:
/// remember first-transmission times by sequence number, sample on the
/// cumulative ACK, and never sample a retransmitted segment.
#[derive(Debug)]
struct PassiveRtt {
    sent: BTreeMap<u64, f64>,
    est: RttEstimator,
}

impl PassiveRtt {
    fn new(initial_rto: f64, rto_min: f64) -> PassiveRtt {
        PassiveRtt { sent: BTreeMap::new(), est: RttEstimator::new(initial_rto, rto_min) }
    }

    fn on_send(&mut self, seq: u64, now: f64, retransmit: bool) {
        if retransmit {
            self.sent.remove(&seq);
        } else {
            self.sent.insert(seq, now);
        }
    }

    fn on_ack(&mut self, ack: u64, now: f64) {
        if ack == 0 {
            return;
        }
        if let Some(at) = self.sent.get(&(ack - 1)).copied() {
            self.est.update(now - at);
        }
        let covered: Vec<u64> = self.sent.range(..ack).map(|(s, _)| *s).collect();
        for seq in covered {
            self.sent.remove(&seq);
        }
    }
}

enum Transport {
    Tcp(TcpConn),
    Cbr { interval: f64, next_seq: u64 },
}

struct FlowRuntime {
    spec: FlowSpec,
    unit: usize,
    transport: Transport,
    ecn_capable: bool,
    edge_busy_until: f64,
    // Whole-run tallies over data packets.
    emitted: u64,
    green_sent: u64,
    yellow_sent: u64,
    red_sent: u64,
    green_dropped: u64,
    red_dropped: u64,
    delivered_packets: u64,
    ecn_feedback_total: u64,
    // Post-warm-up measurement accumulators.
    measured_bits: f64,
    rtt_sum: f64,
    rtt_count: u64,
    rto_sum: f64,
    rto_count: u64,
    // Current metrics window.
    win: WindowAccum,
    // Per-epoch observations for adaptive conditioners.
    epoch_emitted_bits: f64,
    epoch_queue_arrivals: u64,
    epoch_queue_drops: u64,
    epoch_green_arrivals: u64,
    epoch_green_drops: u64,
    // ECN feedback accumulation between feedback ticks.
    fb_echoes: u64,
    fb_total: u64,
    passive: PassiveRtt,
}

/// One conditioner instance and the flows it serves (one per flow normally,
/// one for everyone in aggregate mode).
struct CondUnit {
    cond: Box<dyn Conditioner>,
    members: Vec<usize>,
    epoch: Option<f64>,
    rtt_mode: RttMode,
}

pub struct SimResult {
    pub records: Vec<MetricsRecord>,
    pub summary: RunSummary,
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    seed: u64,
    now: f64,
    heap: BinaryHeap<Reverse<Scheduled>>,
    next_seq: u64,
    flows: Vec<FlowRuntime>,
    flow_index: HashMap<u32, usize>,
    units: Vec<CondUnit>,
    park_choi: Option<ParkChoiController>,
    queue: BottleneckQueue,
    in_service: Option<Packet>,
    tx_busy: bool,
    // Conservation tallies over data packets.
    injected: u64,
    delivered: u64,
    dropped: u64,
    window_start: f64,
    records: Vec<MetricsRecord>,
}

/// Runs one scenario to completion. Deterministic for a fixed
/// (config, seed) pair.
pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> SimResult {
    Runner::new(cfg, seed).run()
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ScenarioConfig, seed: u64) -> Runner<'a> {
        let tree = SeedTree::new(seed);
        let ecn_capable = cfg.aqm.ecn || cfg.aqm.penalty_coupling;
        let wmax = cfg.tcp.rwnd as f64;

        let mut flows = Vec::with_capacity(cfg.flows.len());
        let mut units: Vec<CondUnit> = Vec::new();
        let mut flow_index = HashMap::new();

        let aggregate = cfg.conditioner.aggregate;
        if aggregate {
            // One conditioner serving the whole aggregate, marking against
            // the summed contract.
            let total_target = Rate::bps(cfg.flows.iter().map(|f| f.target_rate).sum());
            let total_peak = Rate::bps(
                cfg.flows
                    .iter()
                    .map(|f| f.peak_rate.unwrap_or(2.0 * f.target_rate))
                    .sum(),
            );
            let spec0 = cfg.flows[0].spec();
            let cond = build_conditioner(
                &cfg.conditioner,
                &spec0,
                total_target,
                total_peak,
                wmax,
                tree.stream_indexed("conditioner", 0),
            );
            units.push(CondUnit {
                epoch: cond.epoch().map(|d| d.as_secs()),
                cond,
                members: (0..cfg.flows.len()).collect(),
                rtt_mode: cfg.conditioner.rtt_mode,
            });
        }

        for (i, entry) in cfg.flows.iter().enumerate() {
            let spec = entry.spec();
            flow_index.insert(spec.flow_id, i);
            let unit = if aggregate {
                0
            } else {
                let ccfg = cfg.conditioner_for(i);
                let cond = build_conditioner(
                    ccfg,
                    &spec,
                    spec.target_rate,
                    spec.peak_rate,
                    wmax,
                    tree.stream_indexed("conditioner", i as u64),
                );
                units.push(CondUnit {
                    epoch: cond.epoch().map(|d| d.as_secs()),
                    cond,
                    members: vec![i],
                    rtt_mode: ccfg.rtt_mode,
                });
                units.len() - 1
            };

            let transport = match spec.transport {
                TransportKind::TcpReno => Transport::Tcp(TcpConn::new(&cfg.tcp)),
                TransportKind::UdpCbr => {
                    let rate = spec.cbr_rate.expect("validated").as_bps();
                    Transport::Cbr {
                        interval: spec.packet_size as f64 * 8.0 / rate,
                        next_seq: 0,
                    }
                }
            };
            flows.push(FlowRuntime {
                transport,
                unit,
                ecn_capable,
                edge_busy_until: 0.0,
                emitted: 0,
                green_sent: 0,
                yellow_sent: 0,
                red_sent: 0,
                green_dropped: 0,
                red_dropped: 0,
                delivered_packets: 0,
                ecn_feedback_total: 0,
                measured_bits: 0.0,
                rtt_sum: 0.0,
                rtt_count: 0,
                rto_sum: 0.0,
                rto_count: 0,
                win: WindowAccum::default(),
                epoch_emitted_bits: 0.0,
                epoch_queue_arrivals: 0,
                epoch_queue_drops: 0,
                epoch_green_arrivals: 0,
                epoch_green_drops: 0,
                fb_echoes: 0,
                fb_total: 0,
                passive: PassiveRtt::new(cfg.tcp.initial_rto, cfg.tcp.rto_min),
                spec,
            });
        }

        let park_choi = if cfg.uses_conditioner(ConditionerKind::ParkChoi) {
            let base: Vec<Rate> = cfg
                .flows
                .iter()
                .enumerate()
                .map(|(i, f)| Rate::bps(f.target_rate) * cfg.conditioner_for(i).rate_scale)
                .collect();
            Some(ParkChoiController::new(
                base,
                Rate::bps(cfg.bottleneck.rate),
                cfg.conditioner.beta,
                cfg.conditioner.f_lo,
                cfg.conditioner.f_hi,
            ))
        } else {
            None
        };

        let queue = cfg.aqm.build(Rate::bps(cfg.bottleneck.rate), tree.stream("aqm"));

        Runner {
            cfg,
            seed,
            now: 0.0,
            heap: BinaryHeap::new(),
            next_seq: 0,
            flows,
            flow_index,
            units,
            park_choi,
            queue,
            in_service: None,
            tx_busy: false,
            injected: 0,
            delivered: 0,
            dropped: 0,
            window_start: 0.0,
            records: Vec::new(),
        }
    }

    fn schedule(&mut self, at: f64, event: Event) {
        debug_assert!(at >= self.now, "event scheduled in the past: {at} < {}", self.now);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Scheduled { at, seq, event }));
    }

    fn run(mut self) -> SimResult {
        for i in 0..self.flows.len() {
            let start = self.flows[i].spec.start_time.as_secs();
            self.schedule(start, Event::SourceStart(i));
        }
        self.schedule(self.cfg.metrics_tick, Event::MetricsTick);
        self.schedule(self.cfg.feedback_tick, Event::FeedbackTick);
        for ui in 0..self.units.len() {
            if let Some(epoch) = self.units[ui].epoch {
                self.schedule(epoch, Event::EpochTick(ui));
            }
        }

        let horizon = self.cfg.duration;
        while let Some(Reverse(head)) = self.heap.peek() {
            if head.at > horizon {
                break;
            }
            let Reverse(scheduled) = self.heap.pop().unwrap();
            self.now = scheduled.at;
            self.dispatch(scheduled.event);
        }
        self.now = horizon;
        self.finish()
    }

    fn dispatch(&mut self, event: Event) {
        match event {
            Event::SourceStart(fi) => self.on_source_start(fi),
            Event::CbrSend(fi) => self.on_cbr_send(fi),
            Event::RtoTimer { flow, gen } => self.on_rto_timer(flow, gen),
            Event::QueueArrival(pkt) => self.on_queue_arrival(pkt),
            Event::TxComplete => self.on_tx_complete(),
            Event::SinkArrival(pkt) => self.on_sink_arrival(pkt),
            Event::AckArrival(pkt) => self.on_ack_arrival(pkt),
            Event::FeedbackTick => self.on_feedback_tick(),
            Event::EpochTick(ui) => self.on_epoch_tick(ui),
            Event::MetricsTick => self.on_metrics_tick(),
        }
    }

    fn on_source_start(&mut self, fi: usize) {
        match &mut self.flows[fi].transport {
            Transport::Tcp(_) => {
                self.emit_tcp_event(fi, TcpEventKind::FlowStart);
                let now = self.now;
                let sends = match &mut self.flows[fi].transport {
                    Transport::Tcp(conn) => conn.take_sends(now),
                    _ => unreachable!(),
                };
                for (seq, retransmit) in sends {
                    self.emit_data(fi, seq, retransmit);
                }
                self.restart_timer(fi);
            }
            Transport::Cbr { .. } => {
                let now = self.now;
                self.schedule(now, Event::CbrSend(fi));
            }
        }
    }

    fn on_cbr_send(&mut self, fi: usize) {
        let (seq, interval) = match &mut self.flows[fi].transport {
            Transport::Cbr { interval, next_seq } => {
                let s = *next_seq;
                *next_seq += 1;
                (s, *interval)
            }
            _ => return,
        };
        self.emit_data(fi, seq, false);
        let next = self.now + interval;
        self.schedule(next, Event::CbrSend(fi));
    }

    /// Conditions and launches one data packet onto the flow's access link.
    fn emit_data(&mut self, fi: usize, seq: u64, retransmit: bool) {
        let now = Instant::at_secs(self.now);
        let (flow_id, size, access_delay, unit_idx, ecn) = {
            let f = &self.flows[fi];
            (
                f.spec.flow_id,
                f.spec.packet_size,
                f.spec.access_delay.as_secs(),
                f.unit,
                f.ecn_capable,
            )
        };
        let mut pkt = Packet::data(flow_id, seq, size, now);
        pkt.retransmit = retransmit;
        pkt.ecn_capable = ecn;
        let marking = self.units[unit_idx].cond.on_packet(&pkt, now);
        pkt.color = marking.color;

        let f = &mut self.flows[fi];
        match pkt.color {
            PacketColor::Green => f.green_sent += 1,
            PacketColor::Yellow => f.yellow_sent += 1,
            PacketColor::Red => f.red_sent += 1,
        }
        if pkt.color.is_in_profile() {
            f.win.green_sent += 1;
        } else {
            f.win.red_sent += 1;
        }
        f.emitted += 1;
        f.epoch_emitted_bits += size as f64 * 8.0;
        f.passive.on_send(seq, self.now, retransmit);
        self.injected += 1;

        // Hold-back (penalty) delay, then FIFO serialization on the access
        // link, then propagation.
        let release = (self.now + marking.delay.as_secs()).max(f.edge_busy_until);
        let serialization = size as f64 * 8.0 / self.cfg.access_rate;
        f.edge_busy_until = release + serialization;
        let arrival = f.edge_busy_until + access_delay;
        self.schedule(arrival, Event::QueueArrival(pkt));
    }

    fn on_queue_arrival(&mut self, pkt: Packet) {
        let fi = self.flow_index[&pkt.flow_id];
        let precedence = pkt.color.drop_precedence();
        self.flows[fi].epoch_queue_arrivals += 1;
        if precedence == PacketColor::Green {
            self.flows[fi].epoch_green_arrivals += 1;
        }
        match self.queue.enqueue(pkt, Instant::at_secs(self.now)) {
            crate::aqm::EnqueueOutcome::Dropped => {
                let f = &mut self.flows[fi];
                f.epoch_queue_drops += 1;
                if precedence == PacketColor::Green {
                    f.green_dropped += 1;
                    f.win.green_dropped += 1;
                    f.epoch_green_drops += 1;
                } else {
                    f.red_dropped += 1;
                    f.win.red_dropped += 1;
                }
                self.dropped += 1;
            }
            _ => {
                if !self.tx_busy {
                    self.start_tx();
                }
            }
        }
    }

    fn start_tx(&mut self) {
        if let Some(pkt) = self.queue.dequeue() {
            let tx_time = pkt.size as f64 * 8.0 / self.cfg.bottleneck.rate;
            self.in_service = Some(pkt);
            self.tx_busy = true;
            let done = self.now + tx_time;
            self.schedule(done, Event::TxComplete);
        }
    }

    fn on_tx_complete(&mut self) {
        let pkt = self.in_service.take().expect("transmission without packet");
        self.tx_busy = false;
        let arrival = self.now + self.cfg.bottleneck.delay;
        self.schedule(arrival, Event::SinkArrival(pkt));
        if self.queue.is_empty() {
            self.queue.mark_idle(Instant::at_secs(self.now));
        } else {
            self.start_tx();
        }
    }

    fn on_sink_arrival(&mut self, pkt: Packet) {
        debug_assert_eq!(pkt.kind, PacketKind::Data);
        let fi = self.flow_index[&pkt.flow_id];
        self.delivered += 1;
        let warmup = self.cfg.warmup();
        let size_bits = pkt.size as f64 * 8.0;
        let reverse_delay =
            self.cfg.bottleneck.delay + self.flows[fi].spec.access_delay.as_secs();

        let f = &mut self.flows[fi];
        f.fb_total += 1;
        if pkt.ecn_marked {
            f.fb_echoes += 1;
            f.win.ecn_feedback += 1;
            f.ecn_feedback_total += 1;
        }
        match &mut f.transport {
            Transport::Tcp(conn) => {
                let before = conn.unique_delivered;
                let ack = conn.on_data_at_sink(pkt.seq, pkt.ecn_marked);
                let advanced = conn.unique_delivered - before;
                if advanced > 0 {
                    let bits = advanced as f64 * size_bits;
                    f.win.delivered_bits += bits;
                    f.delivered_packets += advanced;
                    if self.now >= warmup {
                        f.measured_bits += bits;
                    }
                }
                if let Some((ack_no, echo)) = ack {
                    let mut ack_pkt = Packet::ack(pkt.flow_id, ack_no, Instant::at_secs(self.now));
                    if echo {
                        ack_pkt.ecn_capable = true;
                        ack_pkt.ecn_marked = true;
                    }
                    let at = self.now + reverse_delay;
                    self.schedule(at, Event::AckArrival(ack_pkt));
                }
            }
            Transport::Cbr { .. } => {
                f.win.delivered_bits += size_bits;
                f.delivered_packets += 1;
                if self.now >= warmup {
                    f.measured_bits += size_bits;
                }
            }
        }
    }

    fn on_ack_arrival(&mut self, pkt: Packet) {
        let fi = self.flow_index[&pkt.flow_id];
        let now = self.now;
        let warmup = self.cfg.warmup();
        self.flows[fi].passive.on_ack(pkt.seq, now);
        // Standard ECN mode: the source answers a congestion echo with one
        // window reduction. With only the out-drop coupling enabled, the
        // echoes are an edge signal and the transport leaves them to the
        // conditioner.
        let react_to_ecn = self.cfg.aqm.ecn;
        let outcome = match &mut self.flows[fi].transport {
            Transport::Tcp(conn) => {
                if pkt.ecn_marked && react_to_ecn {
                    conn.on_ecn_echo();
                }
                conn.on_ack_at_source(pkt.seq, now)
            }
            Transport::Cbr { .. } => return,
        };
        if let Some(sample) = outcome.rtt_sample {
            let rto_now = match &self.flows[fi].transport {
                Transport::Tcp(conn) => conn.est.rto,
                _ => 0.0,
            };
            let f = &mut self.flows[fi];
            f.win.rtt_sum += sample;
            f.win.rtt_count += 1;
            if now >= warmup {
                f.rtt_sum += sample;
                f.rtt_count += 1;
                f.rto_sum += rto_now;
                f.rto_count += 1;
            }
        }
        for kind in &outcome.events {
            self.emit_tcp_event(fi, *kind);
        }
        if let Some(seq) = outcome.retransmit {
            self.emit_data(fi, seq, true);
        }
        for (seq, retransmit) in outcome.new_sends {
            self.emit_data(fi, seq, retransmit);
        }
        if outcome.restart_timer {
            self.restart_timer(fi);
        }
    }

    fn on_rto_timer(&mut self, fi: usize, gen: u64) {
        let retransmit = match &mut self.flows[fi].transport {
            Transport::Tcp(conn) => {
                if conn.timer_gen != gen {
                    return;
                }
                conn.on_rto(self.now)
            }
            Transport::Cbr { .. } => return,
        };
        if let Some(seq) = retransmit {
            self.emit_tcp_event(fi, TcpEventKind::RtoFired);
            self.emit_data(fi, seq, true);
            self.restart_timer(fi);
        }
    }

    fn restart_timer(&mut self, fi: usize) {
        let (gen, rto) = match &mut self.flows[fi].transport {
            Transport::Tcp(conn) => {
                conn.timer_gen += 1;
                (conn.timer_gen, conn.est.rto)
            }
            Transport::Cbr { .. } => return,
        };
        let at = self.now + rto;
        self.schedule(at, Event::RtoTimer { flow: fi, gen });
    }

    fn emit_tcp_event(&mut self, fi: usize, kind: TcpEventKind) {
        let flow_id = self.flows[fi].spec.flow_id;
        let unit = self.flows[fi].unit;
        let event = TcpStateEvent { flow_id, kind };
        self.units[unit].cond.on_tcp_event(&event, Instant::at_secs(self.now));
    }

    fn on_feedback_tick(&mut self, ) {
        let now = Instant::at_secs(self.now);
        // Per-unit signals from the member flows' accumulated echoes.
        for ui in 0..self.units.len() {
            let (mut echoes, mut total) = (0u64, 0u64);
            for &fi in &self.units[ui].members {
                echoes += self.flows[fi].fb_echoes;
                total += self.flows[fi].fb_total;
            }
            let signal = CongestionSignal { ecn_marked_count: echoes, total_feedback: total, at: now };
            self.units[ui].cond.on_feedback(&signal, now);
        }
        // The proportional controller watches the whole network and retunes
        // every marker's target.
        if let Some(controller) = &mut self.park_choi {
            let mut echoes = 0u64;
            let mut total = 0u64;
            for f in &self.flows {
                echoes += f.fb_echoes;
                total += f.fb_total;
            }
            let signal = CongestionSignal { ecn_marked_count: echoes, total_feedback: total, at: now };
            let targets = controller.adjust(&signal);
            for (fi, target) in targets.iter().enumerate() {
                let unit = self.flows[fi].unit;
                self.units[unit].cond.set_target(*target);
            }
        }
        for f in &mut self.flows {
            f.fb_echoes = 0;
            f.fb_total = 0;
        }
        let next = self.now + self.cfg.feedback_tick;
        self.schedule(next, Event::FeedbackTick);
    }

    fn on_epoch_tick(&mut self, ui: usize) {
        let epoch = match self.units[ui].epoch {
            Some(e) => e,
            None => return,
        };
        let mut emitted_bits = 0.0;
        let mut arrivals = 0u64;
        let mut drops = 0u64;
        let mut green_arrivals = 0u64;
        let mut green_drops = 0u64;
        let mut rtt_sum = 0.0;
        let mut rto_sum = 0.0;
        let mut est_count = 0u64;
        let passive = self.units[ui].rtt_mode == RttMode::Passive;
        for &fi in &self.units[ui].members {
            let f = &self.flows[fi];
            emitted_bits += f.epoch_emitted_bits;
            arrivals += f.epoch_queue_arrivals;
            drops += f.epoch_queue_drops;
            green_arrivals += f.epoch_green_arrivals;
            green_drops += f.epoch_green_drops;
            let est = if passive {
                Some(&f.passive.est)
            } else {
                match &f.transport {
                    Transport::Tcp(conn) => Some(&conn.est),
                    Transport::Cbr { .. } => None,
                }
            };
            if let Some(est) = est {
                if let Some(srtt) = est.srtt {
                    rtt_sum += srtt;
                    rto_sum += est.rto;
                    est_count += 1;
                }
            }
        }
        let taps = EpochTaps {
            measured_rate: Rate::bps(emitted_bits / epoch),
            loss_prob: if arrivals > 0 { Some(drops as f64 / arrivals as f64) } else { None },
            in_profile_loss: if green_arrivals > 0 {
                Some(green_drops as f64 / green_arrivals as f64)
            } else {
                None
            },
            rtt: if est_count > 0 { Some(Duration::secs(rtt_sum / est_count as f64)) } else { None },
            rto: if est_count > 0 { Some(Duration::secs(rto_sum / est_count as f64)) } else { None },
        };
        self.units[ui].cond.on_epoch(&taps, Instant::at_secs(self.now));
        for &fi in &self.units[ui].members.clone() {
            let f = &mut self.flows[fi];
            f.epoch_emitted_bits = 0.0;
            f.epoch_queue_arrivals = 0;
            f.epoch_queue_drops = 0;
            f.epoch_green_arrivals = 0;
            f.epoch_green_drops = 0;
        }
        let next = self.now + epoch;
        self.schedule(next, Event::EpochTick(ui));
    }

    fn on_metrics_tick(&mut self) {
        let start = Instant::at_secs(self.window_start);
        let end = Instant::at_secs(self.now);
        for f in &mut self.flows {
            self.records.push(f.win.flush(f.spec.flow_id, start, end));
        }
        self.window_start = self.now;
        let next = self.now + self.cfg.metrics_tick;
        self.schedule(next, Event::MetricsTick);
    }

    fn finish(mut self) -> SimResult {
        // Flush a trailing partial window, if the horizon split one.
        if self.now - self.window_start > 1e-12 {
            let start = Instant::at_secs(self.window_start);
            let end = Instant::at_secs(self.now);
            for f in &mut self.flows {
                self.records.push(f.win.flush(f.spec.flow_id, start, end));
            }
        }

        // Residual data packets: still queued, in transmission, or inside a
        // not-yet-processed arrival event.
        let mut residual = self.queue.drain().len() as u64;
        if self.in_service.is_some() {
            residual += 1;
        }
        for Reverse(s) in self.heap.iter() {
            match &s.event {
                Event::QueueArrival(p) | Event::SinkArrival(p) if p.kind == PacketKind::Data => {
                    residual += 1;
                }
                _ => {}
            }
        }
        let conservation = Conservation {
            injected: self.injected,
            delivered: self.delivered,
            dropped: self.dropped,
            residual,
        };

        let warmup = self.cfg.warmup();
        let span = (self.cfg.duration - warmup).max(f64::MIN_POSITIVE);
        let summaries: Vec<FlowSummary> = self
            .flows
            .iter()
            .map(|f| {
                let achieved = f.measured_bits / span;
                let target = f.spec.target_rate.as_bps();
                let attainment = if target > 0.0 { achieved / target } else { 1.0 };
                FlowSummary {
                    flow_id: f.spec.flow_id,
                    target_bps: target,
                    achieved_bps: achieved,
                    attainment,
                    excess_bps: (achieved - target).max(0.0),
                    deficit_bps: (target - achieved).max(0.0),
                    green_sent: f.green_sent,
                    yellow_sent: f.yellow_sent,
                    red_sent: f.red_sent,
                    green_dropped: f.green_dropped,
                    red_dropped: f.red_dropped,
                    delivered_packets: f.delivered_packets,
                    ecn_feedback: f.ecn_feedback_total,
                    rtt_mean_s: if f.rtt_count > 0 { Some(f.rtt_sum / f.rtt_count as f64) } else { None },
                    rto_mean_s: if f.rto_count > 0 { Some(f.rto_sum / f.rto_count as f64) } else { None },
                }
            })
            .collect();

        let targets: Vec<Rate> = self.flows.iter().map(|f| f.spec.target_rate).collect();
        let summary = RunSummary::build(
            self.seed,
            &targets,
            Rate::bps(self.cfg.as_capacity),
            summaries,
            conservation,
            self.queue.ecn_mark_count(),
            warmup,
            self.cfg.duration,
        );
        SimResult { records: self.records, summary }
    }
}
