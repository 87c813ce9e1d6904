//! Stable seed derivation and counter-based random draws.
//!
//! Every random quantity in this crate is a pure function of a handful of
//! `u64` key words (master seed, domain tag, identities, counters). Two runs
//! that agree on the key words agree on the draw bitwise, no matter how work
//! is scheduled across threads. This is what makes noise coupling across
//! graph truncations exact: the increment for (vertex, step) is the same in
//! every simulation that contains that vertex.

/// Weyl-sequence increment from SplitMix64.
const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer. Full avalanche on 64 bits.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a list of key words.
///
/// The words are absorbed sequentially; order matters. Use a domain tag
/// (see [`tag`]) as the first word to separate independent draw families.
pub fn derive(master: u64, words: &[u64]) -> u64 {
    let mut state = mix64(master ^ GAMMA);
    for &w in words {
        state = mix64(state ^ w.wrapping_mul(GAMMA).wrapping_add(0x1234_5678_9abc_def1));
    }
    state
}

/// Stable 64-bit FNV-1a over a byte string, for domain-separation tags.
pub fn tag(name: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in name.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Uniform draw in `[0, 1)` from a key.
#[inline]
pub fn unit(key: u64) -> f64 {
    // 53 high bits -> [0, 1)
    (key >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `(0, 1]` from a key (safe to pass to `ln`).
#[inline]
pub fn unit_open(key: u64) -> f64 {
    ((key >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Pair of independent standard normal draws from one key (Box-Muller).
#[inline]
pub fn normal_pair(key: u64) -> (f64, f64) {
    let u1 = unit_open(mix64(key ^ 0x517c_c1b7_2722_0a95));
    let u2 = unit(mix64(key ^ 0x6c62_272e_07bb_0142));
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    let (sin, cos) = angle.sin_cos();
    (radius * cos, radius * sin)
}

/// Single standard normal draw from a key.
#[inline]
pub fn normal(key: u64) -> f64 {
    normal_pair(key).0
}

/// Uniform draw in `[-1, 1]` from a key.
#[inline]
pub fn unit_symmetric(key: u64) -> f64 {
    2.0 * unit(key) - 1.0
}

/// A cheap counter-based `u64` stream for feeding `rand` adapters when a
/// whole-stream generator is more convenient than per-key draws.
#[derive(Clone, Debug)]
pub struct KeyStream {
    key: u64,
    counter: u64,
}

impl KeyStream {
    pub fn new(key: u64) -> Self {
        KeyStream { key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = mix64(self.key.wrapping_add(GAMMA.wrapping_mul(self.counter ^ 0x2545_f491_4f6c_dd1d)));
        self.counter += 1;
        out
    }
}
