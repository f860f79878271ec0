//! Fuzzes the scenario-file parser: arbitrary bytes must either parse into
//! a validated config or return an error, never panic.

#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(loaded) = afsim::scenario::parse_scenario_str(text) {
        // A config that parsed must survive the echo round trip: serialize,
        // reparse, and validate again with nothing left to default.
        let echo = serde_json::to_value(&loaded.config).unwrap();
        let reparsed = afsim::scenario::parse_scenario_value(echo)
            .expect("resolved config echo must reparse");
        assert!(reparsed.defaulted.is_empty());
    }
});
