//! Scenario files: schema, defaults, and validation.
//!
//! Scenarios are JSON documents with a required schema version `"v": 1`.
//! All rates are in bits per second and all durations in seconds, matching
//! the simulator's internal units — no silent conversions. Unknown keys are
//! rejected, never ignored, and every defaulted field is reported so a run
//! can be audited from its own config echo.

use crate::aqm::AqmConfig;
use crate::conditioner::{ConditionerConfig, ConditionerKind};
use crate::flow::{FlowSpec, TransportKind};
use crate::sim::tcp::TcpConfig;
use crate::units::{Duration, Instant, Rate};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("unsupported schema version {found} (expected v = 1)")]
    Version { found: i64 },
    #[error("invalid scenario: {key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), reason: reason.into() }
}

pub const SCHEMA_VERSION: u32 = 1;

/// Fraction of the run treated as warm-up and excluded from summaries.
pub const WARMUP_FRACTION: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BottleneckConfig {
    /// Link rate in bits per second.
    pub rate: f64,
    /// One-way propagation delay in seconds.
    pub delay: f64,
}

/// One flow entry as written in a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEntry {
    pub id: u32,
    pub transport: TransportKind,
    /// Contracted target rate (CIR), bits per second.
    pub target_rate: f64,
    /// Peak rate (PIR); defaults to twice the target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_rate: Option<f64>,
    /// One-way access delay in seconds; defaults to 10 ms.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub access_delay: Option<f64>,
    /// Packet (segment) size in bytes; defaults to 1500.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packet_size: Option<u32>,
    /// Start of transmission in seconds; defaults to 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_time: Option<f64>,
    /// Constant bit rate for UDP flows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cbr_rate: Option<f64>,
    /// Per-flow conditioner override.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditioner: Option<ConditionerConfig>,
}

impl FlowEntry {
    /// The typed flow contract, assuming defaults were already applied.
    pub fn spec(&self) -> FlowSpec {
        FlowSpec {
            flow_id: self.id,
            transport: self.transport,
            target_rate: Rate::bps(self.target_rate),
            peak_rate: Rate::bps(self.peak_rate.unwrap_or(2.0 * self.target_rate)),
            access_delay: Duration::secs(self.access_delay.unwrap_or(0.01)),
            packet_size: self.packet_size.unwrap_or(1500),
            start_time: Instant::at_secs(self.start_time.unwrap_or(0.0)),
            cbr_rate: self.cbr_rate.map(Rate::bps),
        }
    }
}

/// A fully resolved scenario: every field concrete, re-serializable as the
/// config echo, and re-parsable as its own input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub v: u32,
    /// Simulated run length in seconds.
    pub duration: f64,
    pub seed: u64,
    pub bottleneck: BottleneckConfig,
    /// Capacity reserved for the assured service; defaults to the
    /// bottleneck rate.
    pub as_capacity: f64,
    /// Access link rate in bits per second (never the bottleneck).
    pub access_rate: f64,
    /// Metrics window length in seconds.
    pub metrics_tick: f64,
    /// ECN feedback aggregation interval in seconds.
    pub feedback_tick: f64,
    pub flows: Vec<FlowEntry>,
    pub conditioner: ConditionerConfig,
    pub aqm: AqmConfig,
    pub tcp: TcpConfig,
}

/// Raw shape of a scenario file: only `v`, `duration`, `bottleneck`, and
/// `flows` are mandatory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    v: i64,
    duration: f64,
    #[serde(default)]
    seed: Option<u64>,
    bottleneck: BottleneckConfig,
    #[serde(default)]
    as_capacity: Option<f64>,
    #[serde(default)]
    access_rate: Option<f64>,
    #[serde(default)]
    metrics_tick: Option<f64>,
    #[serde(default)]
    feedback_tick: Option<f64>,
    flows: Vec<FlowEntry>,
    #[serde(default)]
    conditioner: Option<ConditionerConfig>,
    #[serde(default)]
    aqm: Option<AqmConfig>,
    #[serde(default)]
    tcp: Option<TcpConfig>,
}

/// A loaded scenario together with the audit trail of applied defaults.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub config: ScenarioConfig,
    /// Human-readable list of every field that was defaulted.
    pub defaulted: Vec<String>,
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<LoadedScenario, ConfigError> {
    let raw: RawScenario =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    resolve(raw)
}

/// Resolves a scenario from an in-memory JSON value (used by the sweep
/// driver after applying overrides).
pub fn parse_scenario_value(value: serde_json::Value) -> Result<LoadedScenario, ConfigError> {
    let raw: RawScenario =
        serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
    resolve(raw)
}

fn resolve(raw: RawScenario) -> Result<LoadedScenario, ConfigError> {
    if raw.v != SCHEMA_VERSION as i64 {
        return Err(ConfigError::Version { found: raw.v });
    }
    let mut defaulted = Vec::new();
    let mut note = |field: &str, value: String| defaulted.push(format!("{field} = {value}"));

    let seed = raw.seed.unwrap_or_else(|| {
        note("seed", "0".into());
        0
    });
    let as_capacity = raw.as_capacity.unwrap_or_else(|| {
        note("as_capacity", format!("{} (bottleneck.rate)", raw.bottleneck.rate));
        raw.bottleneck.rate
    });
    let access_rate = raw.access_rate.unwrap_or_else(|| {
        note("access_rate", "1e9".into());
        1e9
    });
    let metrics_tick = raw.metrics_tick.unwrap_or_else(|| {
        note("metrics_tick", "1".into());
        1.0
    });
    let feedback_tick = raw.feedback_tick.unwrap_or_else(|| {
        note("feedback_tick", "0.1".into());
        0.1
    });
    let conditioner = raw.conditioner.unwrap_or_else(|| {
        note("conditioner.kind", "none".into());
        ConditionerConfig::default()
    });
    let aqm = raw.aqm.unwrap_or_else(|| {
        note("aqm", "rio defaults".into());
        AqmConfig::default()
    });
    let tcp = raw.tcp.unwrap_or_else(|| {
        note("tcp", "defaults".into());
        TcpConfig::default()
    });

    let mut flows = raw.flows;
    for (i, flow) in flows.iter_mut().enumerate() {
        if flow.peak_rate.is_none() {
            let v = 2.0 * flow.target_rate;
            note(&format!("flows[{i}].peak_rate"), format!("{v} (2 x target_rate)"));
            flow.peak_rate = Some(v);
        }
        if flow.access_delay.is_none() {
            note(&format!("flows[{i}].access_delay"), "0.01".into());
            flow.access_delay = Some(0.01);
        }
        if flow.packet_size.is_none() {
            note(&format!("flows[{i}].packet_size"), "1500".into());
            flow.packet_size = Some(1500);
        }
        if flow.start_time.is_none() {
            note(&format!("flows[{i}].start_time"), "0".into());
            flow.start_time = Some(0.0);
        }
    }

    let config = ScenarioConfig {
        v: SCHEMA_VERSION,
        duration: raw.duration,
        seed,
        bottleneck: raw.bottleneck,
        as_capacity,
        access_rate,
        metrics_tick,
        feedback_tick,
        flows,
        conditioner,
        aqm,
        tcp,
    };
    validate(&config)?;
    Ok(LoadedScenario { config, defaulted })
}

fn check_finite_positive(value: f64, key: &str) -> Result<(), ConfigError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(invalid(key, format!("must be finite and > 0, got {value}")));
    }
    Ok(())
}

pub fn validate(config: &ScenarioConfig) -> Result<(), ConfigError> {
    check_finite_positive(config.duration, "duration")?;
    check_finite_positive(config.bottleneck.rate, "bottleneck.rate")?;
    if !(config.bottleneck.delay.is_finite() && config.bottleneck.delay >= 0.0) {
        return Err(invalid("bottleneck.delay", "must be finite and >= 0"));
    }
    check_finite_positive(config.as_capacity, "as_capacity")?;
    check_finite_positive(config.access_rate, "access_rate")?;
    check_finite_positive(config.metrics_tick, "metrics_tick")?;
    check_finite_positive(config.feedback_tick, "feedback_tick")?;
    if config.flows.is_empty() {
        return Err(invalid("flows", "at least one flow is required"));
    }
    let mut seen = std::collections::HashSet::new();
    for (i, flow) in config.flows.iter().enumerate() {
        let key = format!("flows[{i}] (id {})", flow.id);
        if !seen.insert(flow.id) {
            return Err(invalid(&key, "duplicate flow id"));
        }
        if !(flow.target_rate.is_finite() && flow.target_rate >= 0.0) {
            return Err(invalid(&key, "target_rate must be finite and >= 0"));
        }
        let peak = flow.peak_rate.unwrap_or(2.0 * flow.target_rate);
        if !(peak.is_finite() && peak >= 0.0) {
            return Err(invalid(&key, "peak_rate must be finite and >= 0"));
        }
        if peak < flow.target_rate {
            return Err(invalid(&key, format!("peak_rate {peak} < target_rate {}", flow.target_rate)));
        }
        let access = flow.access_delay.unwrap_or(0.01);
        if !(access.is_finite() && access >= 0.0) {
            return Err(invalid(&key, "access_delay must be finite and >= 0"));
        }
        if flow.packet_size.unwrap_or(1500) == 0 {
            return Err(invalid(&key, "packet_size must be > 0"));
        }
        let start = flow.start_time.unwrap_or(0.0);
        if !(start.is_finite() && start >= 0.0) {
            return Err(invalid(&key, "start_time must be finite and >= 0"));
        }
        match flow.transport {
            TransportKind::UdpCbr => match flow.cbr_rate {
                Some(r) if r.is_finite() && r > 0.0 => {}
                Some(_) => return Err(invalid(&key, "cbr_rate must be finite and > 0")),
                None => return Err(invalid(&key, "udp_cbr flows require cbr_rate")),
            },
            TransportKind::TcpReno => {}
        }
        if let Some(cond) = &flow.conditioner {
            cond.validate().map_err(|reason| invalid(&format!("{key}.conditioner"), reason))?;
            if config.conditioner.aggregate {
                return Err(invalid(
                    &format!("{key}.conditioner"),
                    "per-flow conditioner overrides cannot be combined with aggregate mode",
                ));
            }
        }
    }
    config
        .conditioner
        .validate()
        .map_err(|reason| invalid("conditioner", reason))?;
    config.aqm.validate().map_err(|reason| invalid("aqm", reason))?;
    config.tcp.validate().map_err(|reason| invalid("tcp", reason))?;
    Ok(())
}

impl ScenarioConfig {
    /// Contracted target rates, in flow order.
    pub fn targets(&self) -> Vec<Rate> {
        self.flows.iter().map(|f| Rate::bps(f.target_rate)).collect()
    }

    /// The per-flow conditioner configuration after applying overrides.
    pub fn conditioner_for(&self, flow_index: usize) -> &ConditionerConfig {
        self.flows[flow_index].conditioner.as_ref().unwrap_or(&self.conditioner)
    }

    /// Length of the warm-up prefix excluded from summary statistics.
    pub fn warmup(&self) -> f64 {
        self.duration * WARMUP_FRACTION
    }

    /// True when any conditioner in the scenario is of the given kind.
    pub fn uses_conditioner(&self, kind: ConditionerKind) -> bool {
        self.conditioner.kind == kind
            || self.flows.iter().any(|f| f.conditioner.as_ref().is_some_and(|c| c.kind == kind))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "v": 1,
        "duration": 10.0,
        "bottleneck": { "rate": 1e7, "delay": 0.001 },
        "flows": [ { "id": 1, "transport": "tcp_reno", "target_rate": 1e6 } ]
    }"#;

    #[test]
    fn minimal_scenario_applies_documented_defaults() {
        let loaded = parse_scenario_str(MINIMAL).unwrap();
        let cfg = &loaded.config;
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.as_capacity, 1e7);
        assert_eq!(cfg.metrics_tick, 1.0);
        assert_eq!(cfg.flows[0].peak_rate, Some(2e6));
        assert_eq!(cfg.flows[0].packet_size, Some(1500));
        assert!(loaded.defaulted.iter().any(|d| d.starts_with("seed")));
        assert!(loaded.defaulted.iter().any(|d| d.starts_with("as_capacity")));
        assert!(loaded.defaulted.iter().any(|d| d.contains("flows[0].peak_rate")));
    }

    #[test]
    fn peak_below_target_names_the_flow() {
        let text = MINIMAL.replace(
            r#"{ "id": 1, "transport": "tcp_reno", "target_rate": 1e6 }"#,
            r#"{ "id": 7, "transport": "tcp_reno", "target_rate": 1e6, "peak_rate": 5e5 }"#,
        );
        let err = parse_scenario_str(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("id 7") && msg.contains("peak_rate"), "{msg}");
    }

    #[test]
    fn missing_as_capacity_defaults_to_bottleneck() {
        let loaded = parse_scenario_str(MINIMAL).unwrap();
        assert_eq!(loaded.config.as_capacity, loaded.config.bottleneck.rate);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace(r#""duration": 10.0,"#, r#""duration": 10.0, "durration": 5,"#);
        let err = parse_scenario_str(&text).unwrap_err();
        assert!(err.to_string().contains("durration"), "{err}");
    }

    #[test]
    fn schema_version_is_mandatory() {
        let text = MINIMAL.replace(r#""v": 1,"#, r#""v": 2,"#);
        assert!(matches!(parse_scenario_str(&text).unwrap_err(), ConfigError::Version { found: 2 }));
    }

    #[test]
    fn zero_rate_bottleneck_is_a_config_error() {
        let text = MINIMAL.replace(r#""rate": 1e7"#, r#""rate": 0.0"#);
        let err = parse_scenario_str(&text).unwrap_err();
        assert!(err.to_string().contains("bottleneck.rate"), "{err}");
    }

    #[test]
    fn udp_flow_requires_cbr_rate() {
        let text = MINIMAL.replace("tcp_reno", "udp_cbr");
        let err = parse_scenario_str(&text).unwrap_err();
        assert!(err.to_string().contains("cbr_rate"), "{err}");
    }

    #[test]
    fn duplicate_flow_ids_rejected() {
        let text = MINIMAL.replace(
            r#"[ { "id": 1, "transport": "tcp_reno", "target_rate": 1e6 } ]"#,
            r#"[ { "id": 1, "transport": "tcp_reno", "target_rate": 1e6 },
                { "id": 1, "transport": "tcp_reno", "target_rate": 2e6 } ]"#,
        );
        let err = parse_scenario_str(&text).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn config_echo_round_trips() {
        let loaded = parse_scenario_str(MINIMAL).unwrap();
        let echo = serde_json::to_string_pretty(&loaded.config).unwrap();
        let reparsed = parse_scenario_str(&echo).unwrap();
        // A fully resolved config has nothing left to default.
        assert!(reparsed.defaulted.is_empty(), "{:?}", reparsed.defaulted);
        assert_eq!(serde_json::to_string(&reparsed.config).unwrap(), serde_json::to_string(&loaded.config).unwrap());
    }

    #[test]
    fn garbage_input_errors_cleanly() {
        assert!(parse_scenario_str("{not json").is_err());
        assert!(parse_scenario_str("[]").is_err());
        assert!(parse_scenario_str("null").is_err());
        assert!(parse_scenario_str("").is_err());
    }
}
