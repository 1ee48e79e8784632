//! Named random substreams.

/// Stage tags used by the pipeline.
pub mod stage {
    pub const PAYLOAD: &str = "payload";
    pub const CHANNEL: &str = "channel";
    pub const NOISE: &str = "noise";
    pub const DIFFUSION_STEP: &str = "diffusion-step";
    pub const DIFFUSION_NOISE: &str = "diffusion-noise";
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed for `(master, stage, index)`. Distinct stages and indices give
/// unrelated streams; the mapping is fixed across platforms and releases.
pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ fnv1a(stage)) ^ index)
}
