//! Seed splitting. Every component derives its stream from one root seed.

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Child seed for a named component (and an optional index within it).
pub fn derive(root: u64, label: &str, index: u64) -> u64 {
    let mut h = splitmix64(root);
    for b in label.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Per-question key, independent of the order questions are visited in.
pub fn episode_key(root: u64, question_id: &str) -> u64 {
    derive(root, question_id, 0)
}
