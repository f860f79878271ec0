//! Packets, flow contracts, and provisioning classification.

use crate::units::{Duration, Instant, Rate};
use serde::{Deserialize, Serialize};

pub type FlowId = u32;

/// Drop-precedence color carried by every packet.
///
/// The core queue is two-level: Green is in-profile, Red is out-profile.
/// Three-color markers may emit Yellow; it is collapsed to Red at the queue
/// and kept only for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketColor {
    Green,
    Yellow,
    Red,
}

impl PacketColor {
    /// The two-level precedence actually enforced by the queue.
    pub fn drop_precedence(self) -> PacketColor {
        match self {
            PacketColor::Green => PacketColor::Green,
            PacketColor::Yellow | PacketColor::Red => PacketColor::Red,
        }
    }

    pub fn is_in_profile(self) -> bool {
        matches!(self, PacketColor::Green)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    Data,
    Ack,
}

/// The unit flowing through conditioners, queues, and links.
#[derive(Debug, Clone)]
pub struct Packet {
    pub flow_id: FlowId,
    /// Data packets: segment sequence number. Acks: cumulative ack number.
    pub seq: u64,
    pub size: u32,
    pub color: PacketColor,
    pub ecn_capable: bool,
    pub ecn_marked: bool,
    pub sent_at: Instant,
    pub kind: PacketKind,
    /// Set on retransmissions so the passive RTT estimator can skip them.
    pub retransmit: bool,
}

impl Packet {
    pub fn data(flow_id: FlowId, seq: u64, size: u32, sent_at: Instant) -> Packet {
        assert!(size > 0, "packet size must be positive");
        Packet {
            flow_id,
            seq,
            size,
            color: PacketColor::Green,
            ecn_capable: false,
            ecn_marked: false,
            sent_at,
            kind: PacketKind::Data,
            retransmit: false,
        }
    }

    pub fn ack(flow_id: FlowId, ack: u64, sent_at: Instant) -> Packet {
        Packet {
            flow_id,
            seq: ack,
            size: 40,
            color: PacketColor::Green,
            ecn_capable: false,
            ecn_marked: false,
            sent_at,
            kind: PacketKind::Ack,
            retransmit: false,
        }
    }

    /// Congestion-marks the packet. No-op unless the packet is ECN-capable.
    pub fn mark_ecn(&mut self) {
        if self.ecn_capable {
            self.ecn_marked = true;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    TcpReno,
    UdpCbr,
}

/// A flow's service contract and path parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSpec {
    pub flow_id: FlowId,
    pub transport: TransportKind,
    /// Committed information rate: the assured target.
    pub target_rate: Rate,
    /// Peak information rate, at least the target.
    pub peak_rate: Rate,
    /// One-way access propagation delay; sets the base RTT together with the
    /// bottleneck delay.
    pub access_delay: Duration,
    pub packet_size: u32,
    pub start_time: Instant,
    /// Constant send rate for UDP flows; ignored for TCP.
    pub cbr_rate: Option<Rate>,
}

impl FlowSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.packet_size == 0 {
            return Err(format!("flow {}: packet_size must be > 0", self.flow_id));
        }
        if self.peak_rate < self.target_rate {
            return Err(format!(
                "flow {}: peak_rate {} < target_rate {}",
                self.flow_id, self.peak_rate, self.target_rate
            ));
        }
        if self.transport == TransportKind::UdpCbr && self.cbr_rate.is_none() {
            return Err(format!("flow {}: udp_cbr requires cbr_rate", self.flow_id));
        }
        Ok(())
    }
}

/// Whether the assured-service capacity covers the contracted targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProvisioningRegime {
    Over,
    Exact,
    Under,
}

/// Relative tolerance for calling the sum of targets equal to the capacity.
const EXACT_REL_TOL: f64 = 1e-9;

/// Classifies the provisioning regime from the contracted targets and the
/// capacity reserved for the assured service.
///
/// The sum strictly below capacity is over-provisioned, strictly above is
/// under-provisioned, and equality (within a relative band, since the inputs
/// are floats) is exactly provisioned. An empty target list sums to zero and
/// is over-provisioned.
pub fn classify_provisioning(targets: &[Rate], as_capacity: Rate) -> ProvisioningRegime {
    assert!(as_capacity.as_bps() > 0.0, "as_capacity must be positive");
    let sum: f64 = targets.iter().map(|r| r.as_bps()).sum();
    let cap = as_capacity.as_bps();
    if (sum - cap).abs() <= EXACT_REL_TOL * cap.max(sum) {
        ProvisioningRegime::Exact
    } else if sum < cap {
        ProvisioningRegime::Over
    } else {
        ProvisioningRegime::Under
    }
}

/// Jain fairness index over a set of shares: (Σx)² / (n·Σx²).
/// 1.0 means perfectly equal shares. Empty or all-zero input yields 1.0.
pub fn jain_fairness(shares: &[f64]) -> f64 {
    if shares.is_empty() {
        return 1.0;
    }
    let sum: f64 = shares.iter().sum();
    let sum_sq: f64 = shares.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return 1.0;
    }
    sum * sum / (shares.len() as f64 * sum_sq)
}
