//! Deterministic sub-seed derivation.
//!
//! A run is driven by one master seed; every stochastic sub-task (a fold, a
//! view, an algorithm, a restart) derives its own seed by folding a tag
//! sequence into the master value with the splitmix64 finalizer. The scheme
//! is order-sensitive and collision-resistant enough that adding an
//! algorithm or view never perturbs the seeds of existing ones: tags are
//! stable identifiers (string hashes and indices), not list positions.

/// splitmix64 mixing step.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed by absorbing each tag in order.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    let mut state = mix(master);
    for &t in tags {
        state = mix(state ^ mix(t));
    }
    state
}

/// Stable 64-bit tag for a string identifier (FNV-1a).
pub fn tag(name: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
