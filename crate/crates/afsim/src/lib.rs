//! Deterministic packet-level simulator and analytic toolkit for the
//! DiffServ Assured Forwarding service.
//!
//! The crate has three layers:
//!
//! - [`analytic`]: closed-form TCP throughput models and provisioning math,
//!   usable standalone as a calculator and as test oracles.
//! - [`conditioner`] and [`aqm`]: the edge marker/shaper catalog and the
//!   RIO core queue they feed.
//! - [`sim`]: a seeded discrete-event engine that wires flows, conditioners,
//!   and the queue into a dumbbell topology and collects per-flow metrics.
//!
//! Scenario files (JSON) are parsed by [`scenario`], swept by [`sweep`], and
//! reported as CSV/JSON by [`report`].

pub mod analytic;
pub mod aqm;
pub mod conditioner;
pub mod flow;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod units;

pub use flow::{classify_provisioning, jain_fairness, FlowId, FlowSpec, Packet, PacketColor, ProvisioningRegime};
pub use units::{Duration, Instant, Rate};
