//! Counter-based random streams.
//!
//! All randomness is drawn from ChaCha8 keyed by the user seed, with the
//! 64-bit stream id selecting an independent sequence and the word position
//! selecting a point inside it. A draw is therefore a pure function of
//! `(seed, stream, position)`, independent of thread scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream-id namespaces.
pub mod domain {
    pub const SCM_NOISE: u64 = 1;
    pub const GUMBEL: u64 = 2;
}

/// Independent stream `(domain, index)` under `seed`.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 48) ^ index);
    rng
}

/// Uniform on the open interval (0, 1).
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Standard Gumbel draw `−ln(−ln U)`.
#[inline]
pub fn gumbel_from_bits(bits: u64) -> f64 {
    -libm::log(-libm::log(open_unit(bits)))
}

/// Gumbel pairs addressed by `(iteration, coordinate)`.
pub struct GumbelSource {
    rng: ChaCha8Rng,
    width: u64,
}

impl GumbelSource {
    pub fn new(seed: u64, width: usize) -> Self {
        Self {
            rng: stream(seed, domain::GUMBEL, 0),
            width: width as u64,
        }
    }

    /// The pair `(U_{j,1}, U_{j,2})` for `iteration` and coordinate `j`.
    pub fn pair(&mut self, iteration: u64, j: usize) -> (f64, f64) {
        // Two u64 draws = four 32-bit words per coordinate.
        let pos = (iteration * self.width + j as u64) as u128 * 4;
        self.rng.set_word_pos(pos);
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        (gumbel_from_bits(a), gumbel_from_bits(b))
    }
}
