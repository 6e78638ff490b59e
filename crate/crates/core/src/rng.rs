//! Counter-based random streams.
//!
//! Every Monte Carlo trial owns a [`TrialStream`] keyed by `(master_seed,
//! trial_index)`. The key selects a ChaCha8 stream, so the randomness a trial
//! sees never depends on which worker ran it or in what order.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_1_SQRT_2;

/// Deterministic random stream for one trial.
#[derive(Debug, Clone)]
pub struct TrialStream {
    rng: ChaCha8Rng,
}

impl TrialStream {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        let mut rng = ChaCha8Rng::from_seed(expand_seed(master_seed));
        rng.set_stream(trial_index);
        Self { rng }
    }

    /// Stream in a separate domain of the same master seed, used when one
    /// experiment needs several unrelated families of trials.
    pub fn with_lane(master_seed: u64, lane: u64, trial_index: u64) -> Self {
        let mixed = master_seed ^ splitmix64(&mut lane.wrapping_add(0x5CFD_E000));
        Self::new(mixed, trial_index)
    }

    /// One draw from CN(0, 1): real and imaginary parts are independent N(0, 1/2).
    #[inline]
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
    }

    /// One draw from CN(0, variance).
    #[inline]
    pub fn complex_gaussian_scaled(&mut self, variance: f64) -> Complex64 {
        self.complex_gaussian() * variance.sqrt()
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

impl RngCore for TrialStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn expand_seed(master_seed: u64) -> [u8; 32] {
    let mut state = master_seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}
