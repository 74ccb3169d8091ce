//! Random streams and the Gaussian sampler used by the built-in objectives.
//!
//! Every replication owns a `ChaCha8Rng` seeded from a single `u64`. Normal
//! variates come from the basic Box–Muller transform on that stream: two
//! uniforms `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)` (each the top 53 bits of one `u64`)
//! produce `√(−2 ln u1) · (cos 2πu2, sin 2πu2)`. A request for an odd number of
//! variates discards the last sine value, so the stream position depends only
//! on how many variates were requested.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The random stream type owned by a single run.
pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on `[0, 1)`.
pub fn uniform(rng: &mut dyn RngCore) -> f64 {
    rng.random::<f64>()
}

pub fn standard_normal_pair(rng: &mut dyn RngCore) -> (f64, f64) {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Fills `out` with independent standard normal variates.
pub fn fill_standard_normal(rng: &mut dyn RngCore, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = standard_normal_pair(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = standard_normal_pair(rng).0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_variates() {
        let mut a = stream(7);
        let mut b = stream(7);
        let mut xa = [0.0; 5];
        let mut xb = [0.0; 5];
        fill_standard_normal(&mut a, &mut xa);
        fill_standard_normal(&mut b, &mut xb);
        assert_eq!(xa, xb);
    }

    #[test]
    fn moments_are_standard() {
        let mut rng = stream(11);
        let n = 200_000;
        let mut buf = [0.0; 3];
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            fill_standard_normal(&mut rng, &mut buf);
            for x in buf {
                s1 += x;
                s2 += x * x;
            }
        }
        let m = s1 / (3 * n) as f64;
        let var = s2 / (3 * n) as f64 - m * m;
        // 5 standard errors
        assert!(m.abs() < 5.0 / ((3 * n) as f64).sqrt());
        assert!((var - 1.0).abs() < 5.0 * (2.0 / (3 * n) as f64).sqrt());
    }
}
