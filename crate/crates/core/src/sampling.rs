//! Seeded low-discrepancy sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131,
];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    r
}

/// Halton points in `[lo, hi]^dim`, randomly shifted modulo 1 by a
/// seed-determined offset (Cranley–Patterson rotation).
pub fn halton(dim: usize, count: usize, seed: u64, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "halton sampling supports at most {} dimensions", PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let u = (radical_inverse(i, PRIMES[d]) + shift[d]).fract();
                    lo + (hi - lo) * u
                })
                .collect()
        })
        .collect()
}

/// First `count` Halton points accepted by `keep`, drawing at most
/// `50·count` candidates.
pub fn halton_filtered(
    dim: usize,
    count: usize,
    seed: u64,
    lo: f64,
    hi: f64,
    keep: impl Fn(&[f64]) -> bool,
) -> Vec<Vec<f64>> {
    halton(dim, 50 * count.max(1), seed, lo, hi).into_iter().filter(|p| keep(p)).take(count).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = halton(5, 64, 11, -1.0, 2.0);
        assert_eq!(a, halton(5, 64, 11, -1.0, 2.0));
        assert_ne!(a, halton(5, 64, 12, -1.0, 2.0));
        assert!(a.iter().flatten().all(|v| (-1.0..2.0).contains(v)));
    }

    #[test]
    fn filter_respects_predicate() {
        let p = halton_filtered(2, 30, 1, -1.0, 1.0, |x| x[0] * x[0] + x[1] * x[1] < 0.25);
        assert_eq!(p.len(), 30);
        assert!(p.iter().all(|x| x[0] * x[0] + x[1] * x[1] < 0.25));
    }
}
