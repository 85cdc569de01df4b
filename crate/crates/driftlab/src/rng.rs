//! Deterministic seeding.
//!
//! Every random stream in the toolkit is a ChaCha generator keyed by a seed
//! derived from the master seed and a stream label (replica index, step-size
//! index, ...). Replicas therefore produce identical output regardless of
//! how many worker threads execute them or in which order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed stream labels used by the harness alongside replica indices.
pub mod stream {
    pub const GRAPH: u64 = 0x6772617068; // "graph"
    pub const TARGETS: u64 = 0x74617267; // "targ"
    pub const REPLICA: u64 = 0x7265706c; // "repl"
    pub const SWEEP: u64 = 0x7377656570; // "sweep"
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed with a stream label and an index into a child seed.
pub fn derive_seed(master: u64, label: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(label)).wrapping_add(index))
}

/// Seeded generator for a given (master, label, index) stream.
pub fn stream_rng(master: u64, label: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, label, index))
}

/// FNV-1a over bytes; used to fingerprint resolved configurations.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
