//! Fuzzes the sweep override parser and path application: arbitrary
//! `key=v1,v2,…` strings against an arbitrary-but-valid base config must
//! never panic; failures are typed errors.

#![no_main]
use libfuzzer_sys::fuzz_target;

const BASE: &str = r#"{
    "v": 1,
    "duration": 2.0,
    "bottleneck": { "rate": 1e7, "delay": 0.001 },
    "flows": [ { "id": 1, "transport": "udp_cbr", "target_rate": 1e6, "cbr_rate": 1e6 } ]
}"#;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = afsim::sweep::parse_vary_spec(text) else { return };
    let base = afsim::scenario::parse_scenario_str(BASE).unwrap().config;
    // Planning may reject the key or the resulting config; it must not panic.
    let _ = afsim::sweep::plan_sweep(&base, &[spec], &[0]);
});
