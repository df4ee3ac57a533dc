//! Deterministic point sets on spheres.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const PRIMES: [u32; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    out
}

pub fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// `count` quasi-random unit vectors in `R^n`: a Halton sequence with a
/// seeded random shift (mod 1), pushed through Box-Muller and normalized.
pub fn quasi_sphere(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let dims = 2 * n.div_ceil(2);
    assert!(dims <= PRIMES.len(), "too many dimensions for the Halton table");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
    (0..count)
        .map(|k| {
            let mut g = Vec::with_capacity(dims);
            for pair in 0..dims / 2 {
                let u = |d: usize| {
                    let v = radical_inverse(k as u64 + 1, PRIMES[d]) + shift[d];
                    v - v.floor()
                };
                let u1 = u(2 * pair).max(f64::MIN_POSITIVE);
                let u2 = u(2 * pair + 1);
                let r = (-2.0 * u1.ln()).sqrt();
                let th = 2.0 * std::f64::consts::PI * u2;
                g.push(r * th.cos());
                g.push(r * th.sin());
            }
            g.truncate(n);
            if g.iter().all(|x| *x == 0.0) {
                g[0] = 1.0;
            }
            normalize(&mut g);
            g
        })
        .collect()
}

/// `count` pseudo-random unit vectors from normalized Gaussians.
pub fn gaussian_sphere(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                v.iter_mut().for_each(|x| *x /= norm);
                break v;
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn points_are_unit_and_reproducible() {
        for n in [2, 3, 5] {
            let a = quasi_sphere(n, 200, 11);
            assert_eq!(a, quasi_sphere(n, 200, 11));
            assert_ne!(a, quasi_sphere(n, 200, 12));
            for p in &a {
                let norm: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
            let g = gaussian_sphere(n, 50, 3);
            assert_eq!(g, gaussian_sphere(n, 50, 3));
        }
    }
}
