use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const NOISE_STREAM: u64 = 0;
pub(crate) const JUMP_STREAM: u64 = 1;
pub(crate) const SAMPLING_STREAM: u64 = 2;

/// Independent generator for `(seed, stream)`; ChaCha's stream counter makes
/// the split counter-based, so streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of ensemble member `index` under `master`.
pub fn member_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
