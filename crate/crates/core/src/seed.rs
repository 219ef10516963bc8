//! Stable seed derivation. Everything here must give the same answer on every
//! platform and toolchain, so no std hashers.

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// FNV-1a over the label bytes.
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed for one OD cell, independent of the order cells are visited in.
pub fn cell_seed(seed: u64, origin: usize, destination: usize) -> u64 {
    mix64(mix64(seed ^ mix64(origin as u64)) ^ mix64((destination as u64).wrapping_add(0x5851_F42D)))
}

/// Seed for iteration `index` of a scenario within a campaign.
pub fn iteration_seed(base: u64, scenario: &str, index: usize) -> u64 {
    mix64(base ^ mix64(label_hash(scenario) ^ mix64(index as u64)))
}
