#![no_main]

use libfuzzer_sys::fuzz_target;
use tfeq_core::persist::{parse_jsonl, RecordLine};
use tfeq_core::search::ProbeLogEntry;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_jsonl::<RecordLine>(text);
    let _ = parse_jsonl::<ProbeLogEntry>(text);
    for line in text.lines() {
        let _ = RecordLine::parse(line);
    }
});
