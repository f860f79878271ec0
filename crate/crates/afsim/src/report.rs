//! Schema-stable CSV and JSON reporters.
//!
//! Column order is fixed, a header row is always present, and numbers are
//! rendered with Rust's locale-independent float formatting, so reruns of
//! the same (config, seed) produce byte-identical files.

use crate::scenario::ScenarioConfig;
use crate::sim::metrics::{MetricsRecord, RunSummary};
use serde_json::json;

pub const METRICS_HEADER: &str = "flow_id,window_start,window_end,achieved_bps,green_sent,red_sent,green_dropped,red_dropped,ecn_feedback,rtt_mean_s";

pub const SUMMARY_HEADER: &str = "flow_id,target_bps,achieved_bps,attainment,excess_bps,deficit_bps";

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.flow_id,
            r.window_start.as_secs(),
            r.window_end.as_secs(),
            r.achieved_rate.as_bps(),
            r.green_sent,
            r.red_sent,
            r.green_dropped,
            r.red_dropped,
            r.ecn_feedback,
            r.rtt_mean.as_secs(),
        ));
    }
    out
}

pub fn summary_csv(summary: &RunSummary) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for f in &summary.flows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f.flow_id, f.target_bps, f.achieved_bps, f.attainment, f.excess_bps, f.deficit_bps,
        ));
    }
    out
}

/// The run manifest: everything needed to reproduce and audit the run,
/// including the fully resolved config echo.
pub fn run_json(config: &ScenarioConfig, summary: &RunSummary) -> String {
    let value = json!({
        "seed": summary.seed,
        "regime": summary.regime,
        "fairness": summary.fairness,
        "flows": summary.flows,
        "conservation": summary.conservation,
        "queue_ecn_marks": summary.queue_ecn_marks,
        "measured_from": summary.measured_from,
        "measured_to": summary.measured_to,
        "config": config,
    });
    let mut text = serde_json::to_string_pretty(&value).expect("summary serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario_str;
    use crate::sim::run_scenario;

    fn demo() -> (ScenarioConfig, crate::sim::SimResult) {
        let cfg = parse_scenario_str(
            r#"{
                "v": 1, "duration": 6.0,
                "bottleneck": { "rate": 1e7, "delay": 0.001 },
                "flows": [ { "id": 1, "transport": "udp_cbr", "target_rate": 1e6, "cbr_rate": 1e6 } ]
            }"#,
        )
        .unwrap()
        .config;
        let result = run_scenario(&cfg, 4);
        (cfg, result)
    }

    #[test]
    fn csv_headers_are_pinned() {
        let (_, result) = demo();
        let metrics = metrics_csv(&result.records);
        assert!(metrics.starts_with(
            "flow_id,window_start,window_end,achieved_bps,green_sent,red_sent,green_dropped,red_dropped,ecn_feedback,rtt_mean_s\n"
        ));
        let summary = summary_csv(&result.summary);
        assert!(summary.starts_with("flow_id,target_bps,achieved_bps,attainment,excess_bps,deficit_bps\n"));
        // Header plus one line per window and flow.
        assert_eq!(metrics.lines().count(), 1 + result.records.len());
        assert_eq!(summary.lines().count(), 1 + result.summary.flows.len());
    }

    #[test]
    fn reports_are_reproducible() {
        let (cfg, a) = demo();
        let b = run_scenario(&cfg, 4);
        assert_eq!(metrics_csv(&a.records), metrics_csv(&b.records));
        assert_eq!(summary_csv(&a.summary), summary_csv(&b.summary));
        assert_eq!(run_json(&cfg, &a.summary), run_json(&cfg, &b.summary));
    }

    #[test]
    fn run_json_embeds_reparsable_config() {
        let (cfg, result) = demo();
        let manifest: serde_json::Value = serde_json::from_str(&run_json(&cfg, &result.summary)).unwrap();
        let echoed = manifest["config"].clone();
        let reparsed = crate::scenario::parse_scenario_value(echoed).unwrap();
        assert_eq!(reparsed.config.seed, cfg.seed);
        assert!(reparsed.defaulted.is_empty());
        assert_eq!(manifest["seed"], 4);
        assert!(manifest["regime"].is_string());
    }
}
