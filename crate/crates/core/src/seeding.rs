//! Deterministic random streams derived from one root seed.
//!
//! Every `(node, period)` pair gets its own generator, seeded with
//!
//! ```text
//! mix64(mix64(mix64(root ^ TAG) ^ node) ^ period)
//! ```
//!
//! where `mix64` is the SplitMix64 finalizer and `TAG` separates the stream
//! families. Within a node's period stream the draws are taken in a fixed
//! order: event offset, spontaneous-activation draw (inactive nodes only),
//! then one loss draw per in-range live receiver in ascending id order.
//! Nothing outside that list reads from the stream, so extra instrumentation
//! cannot shift later draws.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

/// Generator used for every stream.
pub type StreamRng = Pcg64Mcg;

const NODE_PERIOD_TAG: u64 = 0x6e6f_6465_7065_7264; // "nodeperd"
const TOPOLOGY_TAG: u64 = 0x746f_706f_6c6f_6779; // "topology"

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn node_period_seed(root: u64, node: usize, period: u64) -> u64 {
    mix64(mix64(mix64(root ^ NODE_PERIOD_TAG) ^ node as u64) ^ period)
}

pub fn node_period_rng(root: u64, node: usize, period: u64) -> StreamRng {
    StreamRng::seed_from_u64(node_period_seed(root, node, period))
}

pub fn topology_rng(root: u64) -> StreamRng {
    StreamRng::seed_from_u64(mix64(root ^ TOPOLOGY_TAG))
}
