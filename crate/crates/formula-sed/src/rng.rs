//! Splittable seed derivation for order-independent parallel generation.
//!
//! Every random decision in the generator is drawn from a stream owned by
//! exactly one logical task (a clip, a source event, or one stage inside an
//! event). Streams are derived, never drawn sequentially, so the dataset is a
//! pure function of the master seed no matter how work is scheduled across
//! workers.
//!
//! Derivation is the splitmix64 finalizer applied to `parent ^ tag * PHI`;
//! the constants below are fixed and part of the dataset format. Changing
//! any of them changes every generated dataset.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

/// Weyl increment used to spread tags before mixing (golden-ratio constant).
pub const PHI: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stage tags. Each stage of event synthesis owns an independent stream so
/// that adding draws to one stage never shifts another.
pub mod tag {
    pub const CLIP: u64 = 0x01;
    pub const CLIP_MAIN: u64 = 0x02;
    pub const CLIP_MIX: u64 = 0x03;
    pub const SOURCE: u64 = 0x10;
    pub const PARAMS: u64 = 0x11;
    pub const SEGMENTS: u64 = 0x12;
    pub const F0: u64 = 0x13;
    pub const ENVELOPE: u64 = 0x15;
    pub const VOLUME: u64 = 0x16;
    pub const NOISE_FIELD: u64 = 0x17;
    pub const NOISE_SAMPLES: u64 = 0x18;
    pub const PHASES: u64 = 0x19;
    pub const REVERB: u64 = 0x1A;
    pub const STREAM_LO: u64 = 0xA0;
    pub const STREAM_HI: u64 = 0xA1;
}

/// splitmix64 finalizer: a bijective avalanche mix of a 64-bit value.
#[inline]
pub fn mix(z: u64) -> u64 {
    let mut z = z.wrapping_add(PHI);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a tag.
#[inline]
pub fn derive(parent: u64, tag: u64) -> u64 {
    mix(parent ^ tag.wrapping_mul(PHI))
}

/// Deterministic RNG stream for one logical task.
///
/// PCG-64 (MCG variant) seeded with 128 bits expanded from the task seed.
pub fn stream(seed: u64) -> Pcg64Mcg {
    let lo = derive(seed, tag::STREAM_LO);
    let hi = derive(seed, tag::STREAM_HI);
    let mut bytes = [0u8; 16];
    bytes[..8].copy_from_slice(&lo.to_le_bytes());
    bytes[8..].copy_from_slice(&hi.to_le_bytes());
    Pcg64Mcg::from_seed(bytes)
}

/// Seed for one clip: `(master, clip_id, salt)`. The salt is bumped when a
/// clip has to be regenerated after an unrecoverable event failure.
pub fn clip_seed(master: u64, clip_id: u64, salt: u64) -> u64 {
    derive(derive(master, tag::CLIP ^ mix(clip_id)), salt)
}

/// Seed for one source event inside a clip.
pub fn source_seed(clip: u64, source_idx: u64) -> u64 {
    derive(clip, tag::SOURCE ^ mix(source_idx))
}
