#![no_main]

use libfuzzer_sys::fuzz_target;
use tfeq_core::demand::DemandConfigFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = DemandConfigFile::parse(text) {
        assert_eq!(DemandConfigFile::parse(&d.to_toml()).unwrap(), d);
    }
});
