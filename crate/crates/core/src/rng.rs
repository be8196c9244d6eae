//! Deterministic random-number streams.
//!
//! Every stochastic routine in the crate draws from a ChaCha12 generator
//! keyed by a single user-facing `u64` seed and positioned on a substream
//! derived from what the numbers are for.  Two consequences matter:
//!
//! * reruns with the same seed reproduce results bit-for-bit, regardless of
//!   thread count or the order in which work items are scheduled, because
//!   each work item owns its own substream;
//! * distinct purposes (sampling shots, bootstrap resampling) can never
//!   collide, because the substream id encodes a domain tag.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Substream domain for sampling shot counts in a tomography experiment.
pub const DOMAIN_EXPERIMENT: u64 = 1;
/// Substream domain for sampling shots of a state measurement.
pub const DOMAIN_STATE_MEASUREMENT: u64 = 2;
/// Substream domain for bootstrap resampling.
pub const DOMAIN_BOOTSTRAP: u64 = 3;

/// Expands a `u64` seed into a 32-byte ChaCha key via splitmix64, so that
/// nearby seeds (0, 1, 2, ...) still produce unrelated keys.
fn expand_seed(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut x = seed;
    for chunk in key.chunks_exact_mut(8) {
        x = x.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    key
}

/// Generator for the substream `(domain, a, b)` of the given seed.
///
/// `a` and `b` index the work item within the domain (run and circuit for
/// experiments, resample index for bootstrap) and must stay below 2^24.
pub fn substream(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha12Rng {
    debug_assert!(a < (1 << 24) && b < (1 << 24), "substream index too large");
    let mut rng = ChaCha12Rng::from_seed(expand_seed(seed));
    rng.set_stream((domain << 48) | (a << 24) | b);
    rng
}
