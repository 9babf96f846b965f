//! Deterministic sub-seed derivation.
//!
//! Each stochastic stage (measurement noise, FDI draws, DoS masks, filter
//! initialization) gets its own seed derived from the master seed and a
//! domain label, so toggling one stage never perturbs the realization of
//! another.

/// Derive a stage seed from the master seed and a domain label.
pub fn derive_seed(master: u64, domain: &str) -> u64 {
    splitmix64(master ^ fnv1a(domain.as_bytes()))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
