//! Seed derivation, stable hashing, and small numeric helpers shared across
//! the crate.

use std::f64::consts::{PI, TAU};

/// One round of the splitmix64 generator. Used for seed derivation only;
/// simulation and training use ChaCha streams seeded through [`derive_seed`].
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over a byte string. Stable across platforms and releases; used for
/// config hashes embedded in artifacts and for seed-domain separation.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Documented seed split rule: a child stream is identified by a domain
/// string and an index, mixed into the root seed with splitmix64. Identical
/// (root, domain, index) triples always produce the same child seed.
pub fn derive_seed(root: u64, domain: &str, index: u64) -> u64 {
    let mut state = root ^ fnv1a64(domain.as_bytes());
    let _ = splitmix64(&mut state);
    state ^= index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    splitmix64(&mut state)
}

/// Map an angle difference to the principal branch [-pi, pi).
pub fn wrap_to_pi(x: f64) -> f64 {
    (x + PI).rem_euclid(TAU) - PI
}

/// Population mean; 0.0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation; 0.0 for an empty slice.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Median of a slice (average of the middle pair for even lengths);
/// 0.0 for an empty slice.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
