//! Per-flow windowed accounting and end-of-run summaries.

use crate::flow::{classify_provisioning, jain_fairness, FlowId, ProvisioningRegime};
use crate::units::{Duration, Instant, Rate};
use serde::Serialize;

/// One metrics window for one flow.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRecord {
    pub flow_id: FlowId,
    pub window_start: Instant,
    pub window_end: Instant,
    /// Goodput: unique delivered payload over the window.
    pub achieved_rate: Rate,
    pub green_sent: u64,
    pub red_sent: u64,
    pub green_dropped: u64,
    pub red_dropped: u64,
    /// ECN congestion echoes attributed to this flow in the window.
    pub ecn_feedback: u64,
    /// Mean of the RTT samples taken in the window; zero when none.
    pub rtt_mean: Duration,
}

/// Reusable per-window accumulator.
#[derive(Debug, Default, Clone)]
pub struct WindowAccum {
    pub delivered_bits: f64,
    pub green_sent: u64,
    pub red_sent: u64,
    pub green_dropped: u64,
    pub red_dropped: u64,
    pub ecn_feedback: u64,
    pub rtt_sum: f64,
    pub rtt_count: u64,
}

impl WindowAccum {
    pub fn flush(&mut self, flow_id: FlowId, start: Instant, end: Instant) -> MetricsRecord {
        let span = end.since(start).as_secs().max(f64::MIN_POSITIVE);
        let record = MetricsRecord {
            flow_id,
            window_start: start,
            window_end: end,
            achieved_rate: Rate::bps(self.delivered_bits / span),
            green_sent: self.green_sent,
            red_sent: self.red_sent,
            green_dropped: self.green_dropped,
            red_dropped: self.red_dropped,
            ecn_feedback: self.ecn_feedback,
            rtt_mean: if self.rtt_count > 0 {
                Duration::secs(self.rtt_sum / self.rtt_count as f64)
            } else {
                Duration::ZERO
            },
        };
        *self = WindowAccum::default();
        record
    }
}

/// Whole-run, per-flow accounting (post-warm-up rates plus exact tallies).
#[derive(Debug, Clone, Serialize)]
pub struct FlowSummary {
    pub flow_id: FlowId,
    pub target_bps: f64,
    /// Mean goodput over the measured (post-warm-up) part of the run.
    pub achieved_bps: f64,
    /// achieved / target; 1.0 when the target is zero.
    pub attainment: f64,
    pub excess_bps: f64,
    pub deficit_bps: f64,
    pub green_sent: u64,
    pub yellow_sent: u64,
    pub red_sent: u64,
    pub green_dropped: u64,
    pub red_dropped: u64,
    pub delivered_packets: u64,
    pub ecn_feedback: u64,
    /// Post-warm-up mean RTT sample, when the transport produced any.
    pub rtt_mean_s: Option<f64>,
    pub rto_mean_s: Option<f64>,
}

/// Exact end-of-run packet conservation: data packets injected at the edges
/// must all be delivered, dropped, or still somewhere in the network.
#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
pub struct Conservation {
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub residual: u64,
}

impl Conservation {
    pub fn holds(&self) -> bool {
        self.injected == self.delivered + self.dropped + self.residual
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub regime: ProvisioningRegime,
    /// Jain index over per-flow attainment ratios.
    pub fairness: f64,
    pub flows: Vec<FlowSummary>,
    pub conservation: Conservation,
    pub queue_ecn_marks: u64,
    /// Wall-clock span of the measured (post-warm-up) interval.
    pub measured_from: f64,
    pub measured_to: f64,
}

impl RunSummary {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        seed: u64,
        targets: &[Rate],
        as_capacity: Rate,
        flows: Vec<FlowSummary>,
        conservation: Conservation,
        queue_ecn_marks: u64,
        measured_from: f64,
        measured_to: f64,
    ) -> RunSummary {
        let attainments: Vec<f64> = flows.iter().map(|f| f.attainment).collect();
        RunSummary {
            seed,
            regime: classify_provisioning(targets, as_capacity),
            fairness: jain_fairness(&attainments),
            flows,
            conservation,
            queue_ecn_marks,
            measured_from,
            measured_to,
        }
    }
}
