#![no_main]

use libfuzzer_sys::fuzz_target;
use tfeq_core::report::parse_baseline_trips;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trips) = parse_baseline_trips(text) {
        assert!(trips.values().all(|v| v.is_finite()));
    }
});
