//! Edge traffic conditioners: the marker/shaper catalog.
//!
//! Every scheme implements one contract: it sees each packet at the edge and
//! decides a color and an optional hold-back delay, and it may consume
//! ECN-driven congestion signals, TCP state hooks, and periodic measurement
//! epochs. Conditioners are stateful but deterministic — identical event
//! sequences (and seeds) produce identical decisions.

pub mod equation;
pub mod mellia;
pub mod memory;
pub mod park_choi;
pub mod penalty;
pub mod token_bucket;
pub mod trtcm;
pub mod tsw;
pub mod tsw3cm;
pub mod yeom;

use crate::flow::{FlowId, FlowSpec, Packet, PacketColor};
use crate::units::{Duration, Instant, Rate};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use token_bucket::{TokenBucket, TokenBucketMarker};
pub use tsw::TswEstimator;

/// The outcome of conditioning one packet: the color to stamp and how long
/// to hold the packet back before forwarding (zero for pure markers).
#[derive(Debug, Clone, Copy)]
pub struct Marking {
    pub color: PacketColor,
    pub delay: Duration,
}

/// Windowed ECN feedback delivered to a conditioner.
#[derive(Debug, Clone, Copy)]
pub struct CongestionSignal {
    pub ecn_marked_count: u64,
    pub total_feedback: u64,
    pub at: Instant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcpEventKind {
    FlowStart,
    RtoFired,
    TripleDupAck,
}

/// TCP state hook emitted by the simulator's endpoint, standing in for the
/// sender-side knowledge a deployed qualitative marker would need.
#[derive(Debug, Clone, Copy)]
pub struct TcpStateEvent {
    pub flow_id: FlowId,
    pub kind: TcpEventKind,
}

/// Per-epoch measurements handed to adaptive conditioners. `loss_prob` and
/// the RTT/RTO estimates are None until samples exist.
#[derive(Debug, Clone, Copy)]
pub struct EpochTaps {
    pub measured_rate: Rate,
    /// Fraction of the unit's packets dropped at the queue this epoch.
    pub loss_prob: Option<f64>,
    /// Fraction of the unit's in-profile packets dropped this epoch; the
    /// oversubscription signal.
    pub in_profile_loss: Option<f64>,
    pub rtt: Option<Duration>,
    pub rto: Option<Duration>,
}

pub trait Conditioner {
    fn on_packet(&mut self, pkt: &Packet, now: Instant) -> Marking;

    fn on_feedback(&mut self, _signal: &CongestionSignal, _now: Instant) {}

    fn on_tcp_event(&mut self, _event: &TcpStateEvent, _now: Instant) {}

    fn on_epoch(&mut self, _taps: &EpochTaps, _now: Instant) {}

    /// Adaptive conditioners return their epoch length to request periodic
    /// `on_epoch` calls.
    fn epoch(&self) -> Option<Duration> {
        None
    }

    /// External target adjustment (used by the proportional controller).
    fn set_target(&mut self, _rate: Rate) {}

    fn current_target(&self) -> Option<Rate> {
        None
    }
}

/// No conditioning: traffic carries no assurance, so everything is
/// out-profile best-effort.
#[derive(Debug, Default)]
pub struct NullConditioner;

impl Conditioner for NullConditioner {
    fn on_packet(&mut self, _pkt: &Packet, _now: Instant) -> Marking {
        Marking { color: PacketColor::Red, delay: Duration::ZERO }
    }
}

/// How adaptive conditioners obtain RTT/RTO estimates: straight from the
/// transport state, or from a passive per-segment timing estimator at the
/// edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RttMode {
    #[default]
    Oracle,
    Passive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConditionerKind {
    TokenBucket,
    Trtcm,
    Tsw3cm,
    Yeom,
    Memory,
    Equation,
    ParkChoi,
    Penalty,
    Mellia,
    #[default]
    None,
}

/// Conditioner selection plus every tunable, with the defaults documented in
/// the scenario schema. Parameters not used by the selected kind are ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionerConfig {
    pub kind: ConditionerKind,
    /// One shared instance conditioning the whole aggregate instead of one
    /// per flow.
    pub aggregate: bool,
    /// Marker committed rate as a multiple of the flow's target rate.
    pub rate_scale: f64,
    /// Committed bucket depth in bytes; defaults to ten packets.
    pub depth: Option<u32>,
    /// Peak bucket depth in bytes (two-rate marker); defaults to `depth`.
    pub peak_depth: Option<u32>,
    /// TSW window in seconds.
    pub window: f64,
    /// History gain of the memory marker.
    pub ewma_gain: f64,
    pub weight_floor: f64,
    pub weight_ceil: f64,
    /// Adaptation epoch in seconds (adaptive and equation-based marking).
    pub epoch: f64,
    /// Adaptation gain of the dynamic-target marker.
    pub alpha: f64,
    /// Packets forced in-profile after a TCP state event.
    pub n_protect: u32,
    /// Penalty shaper delay step in seconds.
    pub increase_step: f64,
    /// Penalty drain in seconds per second.
    pub decrease_slope: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub beta: f64,
    /// Packets acknowledged per ACK assumed by the equation-based marker.
    pub b_ack: u32,
    pub rtt_mode: RttMode,
}

impl Default for ConditionerConfig {
    fn default() -> Self {
        ConditionerConfig {
            kind: ConditionerKind::None,
            aggregate: false,
            rate_scale: 1.0,
            depth: None,
            peak_depth: None,
            window: 1.0,
            ewma_gain: memory::DEFAULT_HISTORY_GAIN,
            weight_floor: memory::DEFAULT_WEIGHT_FLOOR,
            weight_ceil: memory::DEFAULT_WEIGHT_CEIL,
            epoch: yeom::DEFAULT_EPOCH,
            alpha: yeom::DEFAULT_GAIN,
            n_protect: mellia::DEFAULT_PROTECT_COUNT,
            increase_step: penalty::DEFAULT_INCREASE_STEP,
            decrease_slope: penalty::DEFAULT_DECREASE_SLOPE,
            f_lo: park_choi::DEFAULT_F_LO,
            f_hi: park_choi::DEFAULT_F_HI,
            beta: park_choi::DEFAULT_BETA,
            b_ack: 1,
            rtt_mode: RttMode::Oracle,
        }
    }
}

impl ConditionerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rate_scale.is_finite() && self.rate_scale >= 0.0) {
            return Err("conditioner.rate_scale must be finite and >= 0".into());
        }
        if self.window <= 0.0 || self.window.is_nan() {
            return Err("conditioner.window must be > 0".into());
        }
        if self.epoch <= 0.0 || self.epoch.is_nan() {
            return Err("conditioner.epoch must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.ewma_gain) {
            return Err("conditioner.ewma_gain must be in [0, 1]".into());
        }
        if !(self.weight_floor > 0.0 && self.weight_ceil >= self.weight_floor) {
            return Err("conditioner weight clamp must satisfy 0 < floor <= ceil".into());
        }
        if self.alpha <= 0.0 || self.alpha.is_nan() {
            return Err("conditioner.alpha must be > 0".into());
        }
        if !(self.increase_step >= 0.0 && self.decrease_slope >= 0.0) {
            return Err("conditioner penalty constants must be >= 0".into());
        }
        if !(0.0 <= self.f_lo && self.f_lo <= self.f_hi && self.f_hi <= 1.0) {
            return Err("conditioner thresholds must satisfy 0 <= f_lo <= f_hi <= 1".into());
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err("conditioner.beta must be in [0, 1]".into());
        }
        if self.b_ack < 1 {
            return Err("conditioner.b_ack must be >= 1".into());
        }
        Ok(())
    }

    fn depth_bytes(&self, packet_size: u32) -> u32 {
        self.depth.unwrap_or(10 * packet_size)
    }
}

/// Builds one conditioner instance for a flow (or for the aggregate, with
/// the summed contract passed through `target`/`peak`).
pub fn build_conditioner(
    cfg: &ConditionerConfig,
    flow: &FlowSpec,
    target: Rate,
    peak: Rate,
    wmax: f64,
    rng: ChaCha8Rng,
) -> Box<dyn Conditioner> {
    let cir = target * cfg.rate_scale;
    let depth = cfg.depth_bytes(flow.packet_size);
    let window = Duration::secs(cfg.window);
    match cfg.kind {
        ConditionerKind::None => Box::new(NullConditioner),
        ConditionerKind::TokenBucket => Box::new(TokenBucketMarker::new(cir, depth)),
        ConditionerKind::Trtcm => Box::new(trtcm::TrtcmMarker::new(
            cir,
            depth,
            peak.max(cir),
            cfg.peak_depth.unwrap_or(depth),
        )),
        ConditionerKind::Tsw3cm => {
            Box::new(tsw3cm::Tsw3cmMarker::new(window, cir, peak.max(cir), rng))
        }
        ConditionerKind::Memory => Box::new(memory::MemoryMarker::new(
            window,
            cir,
            peak.max(cir),
            cfg.ewma_gain,
            cfg.weight_floor,
            cfg.weight_ceil,
            rng,
        )),
        ConditionerKind::Yeom => Box::new(yeom::YeomMarker::new(
            cir,
            peak.max(cir),
            depth,
            window,
            Duration::secs(cfg.epoch),
            cfg.alpha,
            flow.packet_size,
        )),
        ConditionerKind::Equation => Box::new(equation::EquationMarker::new(
            cir,
            wmax,
            flow.packet_size,
            cfg.b_ack,
            depth,
            Duration::secs(cfg.epoch),
            rng,
        )),
        // Per-flow part of the proportional scheme is a plain token bucket;
        // the shared controller lives in the simulation runner and retunes
        // it through set_target.
        ConditionerKind::ParkChoi => Box::new(TokenBucketMarker::new(cir, depth)),
        ConditionerKind::Penalty => Box::new(penalty::PenaltyShaper::new(
            cir,
            depth,
            window,
            Duration::secs(cfg.increase_step),
            cfg.decrease_slope,
        )),
        ConditionerKind::Mellia => Box::new(mellia::MelliaMarker::new(cir, depth, cfg.n_protect)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::TransportKind;
    use crate::rng::SeedTree;
    use rand::Rng;

    fn test_flow() -> FlowSpec {
        FlowSpec {
            flow_id: 1,
            transport: TransportKind::TcpReno,
            target_rate: Rate::mbps(1.0),
            peak_rate: Rate::mbps(2.0),
            access_delay: Duration::millis(10.0),
            packet_size: 1500,
            start_time: Instant::ZERO,
            cbr_rate: None,
        }
    }

    /// Replays a recorded random event trace against a fresh instance and
    /// expects byte-identical decisions.
    #[test]
    fn every_kind_is_deterministic_under_replay() {
        let kinds = [
            ConditionerKind::TokenBucket,
            ConditionerKind::Trtcm,
            ConditionerKind::Tsw3cm,
            ConditionerKind::Yeom,
            ConditionerKind::Memory,
            ConditionerKind::Equation,
            ConditionerKind::ParkChoi,
            ConditionerKind::Penalty,
            ConditionerKind::Mellia,
            ConditionerKind::None,
        ];
        let flow = test_flow();
        for kind in kinds {
            let cfg = ConditionerConfig { kind, ..ConditionerConfig::default() };
            let run = |seed: u64| -> Vec<(PacketColor, f64)> {
                let tree = SeedTree::new(seed);
                let mut c = build_conditioner(
                    &cfg,
                    &flow,
                    flow.target_rate,
                    flow.peak_rate,
                    64.0,
                    tree.stream_indexed("conditioner", flow.flow_id as u64),
                );
                let mut trace_rng = tree.stream("trace");
                let mut now = 0.0f64;
                let mut out = Vec::new();
                for i in 0..800u64 {
                    now += trace_rng.gen_range(0.0..0.01);
                    let at = Instant::at_secs(now);
                    if trace_rng.gen_bool(0.05) {
                        c.on_feedback(
                            &CongestionSignal { ecn_marked_count: trace_rng.gen_range(0..5), total_feedback: 10, at },
                            at,
                        );
                    }
                    if trace_rng.gen_bool(0.02) {
                        c.on_tcp_event(&TcpStateEvent { flow_id: 1, kind: TcpEventKind::RtoFired }, at);
                    }
                    if trace_rng.gen_bool(0.01) {
                        c.on_epoch(
                            &EpochTaps {
                                measured_rate: Rate::bps(trace_rng.gen_range(0.0..3e6)),
                                loss_prob: Some(trace_rng.gen_range(1e-4..0.2)),
                                in_profile_loss: Some(if trace_rng.gen_bool(0.3) { 0.01 } else { 0.0 }),
                                rtt: Some(Duration::secs(0.06)),
                                rto: Some(Duration::secs(0.3)),
                            },
                            at,
                        );
                    }
                    let pkt = Packet::data(1, i, 1500, at);
                    let m = c.on_packet(&pkt, at);
                    out.push((m.color, m.delay.as_secs()));
                }
                out
            };
            assert_eq!(run(99), run(99), "kind {kind:?} not deterministic");
        }
    }

    #[test]
    fn config_validation_catches_bad_ranges() {
        let bad_scale = ConditionerConfig { rate_scale: -1.0, ..ConditionerConfig::default() };
        assert!(bad_scale.validate().is_err());
        let inverted = ConditionerConfig { f_lo: 0.5, f_hi: 0.1, ..ConditionerConfig::default() };
        assert!(inverted.validate().is_err());
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = serde_json::from_str::<ConditionerConfig>(r#"{"kind":"token_bucket","burst":99}"#)
            .unwrap_err();
        assert!(err.to_string().contains("burst"));
    }
}
