#![no_main]

use libfuzzer_sys::fuzz_target;
use tfeq_core::assign::NetworkFile;
use tfeq_core::Network;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = NetworkFile::parse(text) {
        assert_eq!(NetworkFile::parse(&file.to_toml()).unwrap(), file);
    }
    // validation must reject, never panic
    let _ = Network::parse(text);
});
