#![no_main]

use libfuzzer_sys::fuzz_target;
use tfeq_core::SearchConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = SearchConfig::parse(text) {
        assert_eq!(SearchConfig::parse(&c.to_toml()).unwrap(), c);
    }
});
