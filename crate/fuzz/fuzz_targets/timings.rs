#![no_main]

use libfuzzer_sys::fuzz_target;
use tfeq_core::persist::parse_timings;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_timings(text);
});
