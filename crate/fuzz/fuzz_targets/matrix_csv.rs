#![no_main]

use libfuzzer_sys::fuzz_target;
use tfeq_core::ZoneMatrix;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = ZoneMatrix::from_csv(text) {
        let again = ZoneMatrix::from_csv(&m.to_csv()).expect("written matrix parses");
        assert_eq!(again, m);
    }
});
