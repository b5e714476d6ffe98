//! Deterministic, portable pseudo-random numbers.
//!
//! Datasets and generated instances must reproduce bit-for-bit from an integer
//! seed on any platform (and be easy to reimplement in another language), so
//! this module uses SplitMix64 — the counter-based generator of Steele, Lea &
//! Flood, "Fast splittable pseudorandom number generators" (OOPSLA 2014).
//! Output `k` (zero-based) is a finalizing hash of `seed + (k+1)·GOLDEN`:
//!
//! ```text
//! z  = seed + (k+1) * 0x9E3779B97F4A7C15      (wrapping arithmetic)
//! z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
//! z ^= z >> 27;  z *= 0x94D049BB133111EB
//! z ^= z >> 31
//! ```
//!
//! Floating-point conversion takes the high 53 bits: `u64 >> 11` scaled by
//! 2^-53, giving a uniform double in [0, 1). Categorical sampling inverts the
//! CDF with a left-to-right scan in index order. Both conventions are part of
//! the reproducibility contract.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Mixes a 64-bit value with the SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 stream.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    /// Stream whose k-th output hashes `seed + (k+1)·GOLDEN`.
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Independent stream derived from `(seed, label)`; used to give each
    /// purpose (transitions, rewards, ...) its own stream under one seed.
    pub fn substream(seed: u64, label: u64) -> Self {
        SplitMix64::new(seed ^ mix(label.wrapping_mul(GOLDEN) ^ 0xA24B_AED4_963E_E407))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform double in [0, 1), high 53 bits of the next output.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform double in [lo, hi).
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n` (n ≥ 1), by scaling a [0,1) draw. Fine for
    /// the small `n` used here; exact rejection sampling is not needed.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    /// Categorical draw by CDF inversion in index order. `probs` must be
    /// non-negative and sum to ~1; if the accumulated sum falls short of the
    /// drawn uniform (float dust), the last index with positive mass wins.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        debug_assert!(!probs.is_empty());
        let u = self.next_f64();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = i;
            }
            acc += p;
            if u < acc {
                return i;
            }
        }
        last_positive
    }
}
