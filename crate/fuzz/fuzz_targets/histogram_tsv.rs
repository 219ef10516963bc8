#![no_main]

use libfuzzer_sys::fuzz_target;
use tfeq_core::HistogramPair;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(h) = HistogramPair::from_tsv(text) {
        let d = h.distance();
        assert!((0.0..=1.0).contains(&d), "{d}");
        assert_eq!(HistogramPair::from_tsv(&h.to_tsv()).unwrap(), h);
    }
});
