//! Parameter sweeps: a cross-product of config overrides and seeds, each
//! point an independent run, aggregated into one flat CSV.
//!
//! Override keys are dotted paths into the resolved scenario JSON
//! (`flows.0.access_delay`, `conditioner.rate_scale`); a key that does not
//! resolve against the config is rejected before any run starts. Points may
//! execute on multiple threads — runs share nothing — and rows are emitted
//! in deterministic point order regardless of scheduling.

use crate::scenario::{parse_scenario_value, ConfigError, ScenarioConfig};
use crate::sim::run_scenario;
use serde_json::Value;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("bad vary spec {spec:?}: {reason}")]
    BadSpec { spec: String, reason: String },
    #[error("unknown vary key {key:?}: {reason}")]
    UnknownKey { key: String, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// One `--vary key=v1,v2,…` argument, parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct VarySpec {
    pub key: String,
    pub values: Vec<Value>,
}

/// Parses `key=v1,v2,…`. Values are JSON scalars when they parse as such
/// (numbers, booleans, null) and bare strings otherwise.
pub fn parse_vary_spec(spec: &str) -> Result<VarySpec, SweepError> {
    let bad = |reason: &str| SweepError::BadSpec { spec: spec.to_string(), reason: reason.to_string() };
    let (key, values) = spec.split_once('=').ok_or_else(|| bad("expected key=v1,v2,…"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(bad("empty key"));
    }
    if values.trim().is_empty() {
        return Err(bad("no values"));
    }
    let values = values
        .split(',')
        .map(|raw| {
            let raw = raw.trim();
            match serde_json::from_str::<Value>(raw) {
                Ok(v @ (Value::Number(_) | Value::Bool(_) | Value::Null)) => v,
                Ok(Value::String(s)) => Value::String(s),
                _ => Value::String(raw.to_string()),
            }
        })
        .collect();
    Ok(VarySpec { key: key.to_string(), values })
}

/// Sets `path` (dotted keys, numeric segments index arrays) to `new` inside
/// `root`. The full path must already exist.
pub fn apply_override(root: &mut Value, path: &str, new: &Value) -> Result<(), SweepError> {
    let missing = |reason: String| SweepError::UnknownKey { key: path.to_string(), reason };
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        match cursor {
            Value::Object(map) => {
                let entry = map
                    .get_mut(*segment)
                    .ok_or_else(|| missing(format!("no field {segment:?}")))?;
                if last {
                    *entry = new.clone();
                    return Ok(());
                }
                cursor = entry;
            }
            Value::Array(items) => {
                let index: usize = segment
                    .parse()
                    .map_err(|_| missing(format!("{segment:?} is not an array index")))?;
                let entry = items
                    .get_mut(index)
                    .ok_or_else(|| missing(format!("index {index} out of range")))?;
                if last {
                    *entry = new.clone();
                    return Ok(());
                }
                cursor = entry;
            }
            _ => return Err(missing(format!("{segment:?} reaches into a scalar"))),
        }
    }
    unreachable!("empty paths are rejected by parse_vary_spec")
}

/// One fully resolved sweep point, ready to run.
#[derive(Debug)]
pub struct SweepPoint {
    pub overrides: Vec<(String, Value)>,
    pub seed: u64,
    pub config: ScenarioConfig,
}

/// Expands the cross product of vary values and seeds, validating every
/// point before anything runs.
pub fn plan_sweep(
    base: &ScenarioConfig,
    specs: &[VarySpec],
    seeds: &[u64],
) -> Result<Vec<SweepPoint>, SweepError> {
    let echo = serde_json::to_value(base).expect("config serializes");
    let mut combos: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    for spec in specs {
        let mut next = Vec::with_capacity(combos.len() * spec.values.len());
        for combo in &combos {
            for value in &spec.values {
                let mut extended = combo.clone();
                extended.push((spec.key.clone(), value.clone()));
                next.push(extended);
            }
        }
        combos = next;
    }

    let mut points = Vec::with_capacity(combos.len() * seeds.len());
    for combo in &combos {
        let mut doc = echo.clone();
        for (key, value) in combo {
            apply_override(&mut doc, key, value)?;
        }
        for &seed in seeds {
            let mut seeded = doc.clone();
            apply_override(&mut seeded, "seed", &Value::from(seed))?;
            let config = parse_scenario_value(seeded)?.config;
            points.push(SweepPoint { overrides: combo.clone(), seed, config });
        }
    }
    Ok(points)
}

/// One output row: one flow of one run.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub overrides: Vec<(String, Value)>,
    pub seed: u64,
    pub flow_id: u32,
    pub target_bps: f64,
    pub achieved_bps: f64,
    pub attainment: f64,
    pub excess_bps: f64,
    pub deficit_bps: f64,
}

/// Runs every point (on up to `jobs` threads) and returns rows in point
/// order. Raw per-run rows only; aggregation is left to downstream tools.
pub fn run_sweep(points: &[SweepPoint], jobs: usize) -> Vec<SweepRow> {
    let results: Mutex<Vec<Option<Vec<SweepRow>>>> = Mutex::new(vec![None; points.len()]);
    let cursor = AtomicUsize::new(0);
    let workers = jobs.max(1).min(points.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= points.len() {
                    break;
                }
                let point = &points[i];
                let summary = run_scenario(&point.config, point.seed).summary;
                let rows: Vec<SweepRow> = summary
                    .flows
                    .iter()
                    .map(|f| SweepRow {
                        overrides: point.overrides.clone(),
                        seed: point.seed,
                        flow_id: f.flow_id,
                        target_bps: f.target_bps,
                        achieved_bps: f.achieved_bps,
                        attainment: f.attainment,
                        excess_bps: f.excess_bps,
                        deficit_bps: f.deficit_bps,
                    })
                    .collect();
                results.lock().unwrap()[i] = Some(rows);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .flat_map(|rows| rows.expect("every point ran"))
        .collect()
}

fn render_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Flat CSV with the vary keys as leading columns.
pub fn sweep_csv(specs: &[VarySpec], rows: &[SweepRow]) -> String {
    let mut out = String::new();
    for spec in specs {
        out.push_str(&spec.key);
        out.push(',');
    }
    out.push_str("seed,flow_id,target_bps,achieved_bps,attainment,excess_bps,deficit_bps\n");
    for row in rows {
        for (_, value) in &row.overrides {
            out.push_str(&render_value(value));
            out.push(',');
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.seed, row.flow_id, row.target_bps, row.achieved_bps, row.attainment, row.excess_bps, row.deficit_bps,
        ));
    }
    out
}
