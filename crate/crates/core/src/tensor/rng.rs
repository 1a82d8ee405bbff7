//! Seeded, splittable random source.
//!
//! Backed by ChaCha8, a counter-mode stream cipher, so the value stream for a
//! seed is fixed across platforms and releases of this crate. Parallel
//! consumers never share a generator; they either [`Rng::split`] a child off
//! a parent or [`Rng::derive`] one from a master seed and an index path.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::{Tensor, TensorError};

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Child generator keyed by `(seed, path)`. A pure function of its
    /// arguments, so `(master, model, fold)` always yields the same stream.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let mut h = mix64(seed);
        for &p in path {
            h = mix64(h ^ mix64(p.wrapping_add(0x5851_F42D_4C95_7F2D)));
        }
        Self::new(h)
    }

    /// Splits off an independent child, advancing this generator by one draw.
    pub fn split(&mut self) -> Self {
        let s = self.inner.next_u64();
        Self::new(mix64(s))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    /// Gamma(shape, scale) draw; both parameters must be positive.
    pub fn gamma(&mut self, shape: f64, scale: f64) -> f64 {
        Gamma::new(shape, scale)
            .expect("gamma parameters must be positive")
            .sample(&mut self.inner)
    }

    /// Index drawn with probability proportional to `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = self.uniform() * total;
        for (i, &w) in weights.iter().enumerate() {
            if u < w {
                return i;
            }
            u -= w;
        }
        weights.len() - 1
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Tensor of independent `Normal(mean, std)` samples.
pub fn rng_normal(rng: &mut Rng, shape: &[usize], mean: f64, std: f64) -> Result<Tensor, TensorError> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(TensorError::InvalidParameter(format!(
            "normal std must be finite and non-negative, got {std}"
        )));
    }
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.normal(mean, std)).collect();
    Tensor::new(shape, data)
}

/// Tensor of independent `Uniform(lo, hi)` samples.
pub fn rng_uniform(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Result<Tensor, TensorError> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform_range(lo, hi)).collect();
    Tensor::new(shape, data)
}
