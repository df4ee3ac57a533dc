use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::polytope::{grundmann_moller, simplex_volume, triangulate};
use super::TargetNorm;
use crate::error::{Error, Result};
use crate::forms::{Form, MultiIndex};

/// Monte Carlo sample count for bodies without exact quadrature.
pub const MC_SAMPLES: usize = 1_000_000;
const MC_CHUNKS: usize = 64;

/// Degree-`d` moments of the uniform probability measure on the polar body.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    pub n: usize,
    pub d: u32,
    pub moments: BTreeMap<MultiIndex, f64>,
    /// Standard error per moment for Monte Carlo tables, `None` when exact.
    pub std_error: Option<BTreeMap<MultiIndex, f64>>,
    /// Volume of the polar body (estimated for Monte Carlo tables).
    pub volume: f64,
}

impl MomentTable {
    /// `Σ_α (d choose α) m(α) x^α`.
    pub fn form(&self) -> Form {
        Form::from_terms(
            self.n,
            self.d,
            self.moments
                .iter()
                .map(|(a, m)| (a.exponents().to_vec(), a.multinomial() * m)),
        )
        .expect("moments share one degree")
    }

    /// Largest standard error of a coefficient of `form()`.
    pub fn coefficient_error(&self) -> f64 {
        self.std_error.as_ref().map_or(0.0, |se| {
            se.iter()
                .map(|(a, e)| a.multinomial() * e)
                .fold(0.0, f64::max)
        })
    }
}

fn monomial_powers(y: &[f64], alphas: &[MultiIndex]) -> Vec<f64> {
    alphas.iter().map(|a| a.eval(y)).collect()
}

fn exact_polytope(polar: &[Vec<f64>], facets: &[Vec<f64>], d: u32) -> MomentTable {
    let n = polar[0].len();
    let alphas = MultiIndex::all_of_degree(n, d);
    let rule = grundmann_moller(n, d as usize / 2);
    let simplices = triangulate(polar, facets);
    let parts: Vec<(f64, Vec<f64>)> = simplices
        .par_iter()
        .map(|s| {
            let vol = simplex_volume(s);
            let mut acc = vec![0.0; alphas.len()];
            for (bary, w) in &rule {
                let y: Vec<f64> = (0..n)
                    .map(|j| bary.iter().zip(s).map(|(b, v)| b * v[j]).sum())
                    .collect();
                for (k, p) in monomial_powers(&y, &alphas).into_iter().enumerate() {
                    acc[k] += vol * w * p;
                }
            }
            (vol, acc)
        })
        .collect();
    let volume: f64 = parts.iter().map(|p| p.0).sum();
    let mut sums = vec![0.0; alphas.len()];
    for (_, acc) in &parts {
        for (s, a) in sums.iter_mut().zip(acc) {
            *s += a;
        }
    }
    MomentTable {
        n,
        d,
        moments: alphas
            .into_iter()
            .zip(sums)
            .map(|(a, s)| (a, s / volume))
            .collect(),
        std_error: None,
        volume,
    }
}

/// Uniform samples from `{y : inside(y)}` by rejection from the box
/// `∏[−h_i, h_i]`, accumulating monomial means and second moments.
fn monte_carlo(
    n: usize,
    d: u32,
    half_widths: &[f64],
    inside: &(dyn Fn(&[f64]) -> bool + Sync),
    samples: usize,
    seed: u64,
) -> Result<MomentTable> {
    let alphas = MultiIndex::all_of_degree(n, d);
    let per_chunk = samples.div_ceil(MC_CHUNKS);
    let chunks: Vec<(usize, usize, Vec<f64>, Vec<f64>)> = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut sum = vec![0.0; alphas.len()];
            let mut sq = vec![0.0; alphas.len()];
            let mut hits = 0;
            let mut tries = 0;
            let mut y = vec![0.0; n];
            while hits < per_chunk && tries < 1000 * per_chunk {
                tries += 1;
                for (yi, h) in y.iter_mut().zip(half_widths) {
                    *yi = rng.random_range(-h..=*h);
                }
                if !inside(&y) {
                    continue;
                }
                hits += 1;
                for (k, p) in monomial_powers(&y, &alphas).into_iter().enumerate() {
                    sum[k] += p;
                    sq[k] += p * p;
                }
            }
            (hits, tries, sum, sq)
        })
        .collect();
    let hits: usize = chunks.iter().map(|c| c.0).sum();
    let tries: usize = chunks.iter().map(|c| c.1).sum();
    if hits < 2 {
        return Err(Error::Quadrature(
            "rejection sampling found no points in the polar body".into(),
        ));
    }
    let mut moments = BTreeMap::new();
    let mut errors = BTreeMap::new();
    for (k, a) in alphas.into_iter().enumerate() {
        let s: f64 = chunks.iter().map(|c| c.2[k]).sum();
        let q: f64 = chunks.iter().map(|c| c.3[k]).sum();
        let mean = s / hits as f64;
        let var = (q / hits as f64 - mean * mean).max(0.0) * hits as f64 / (hits - 1) as f64;
        moments.insert(a.clone(), mean);
        errors.insert(a, (var / hits as f64).sqrt());
    }
    let box_volume: f64 = half_widths.iter().map(|h| 2.0 * h).product();
    Ok(MomentTable {
        n,
        d,
        moments,
        std_error: Some(errors),
        volume: box_volume * hits as f64 / tries as f64,
    })
}

fn check_degree(d: u32) -> Result<()> {
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::InvalidDegree {
            degree: d,
            reason: "moment forms need an even degree of at least 2",
        });
    }
    Ok(())
}

/// Moments of the polar body of `target`'s unit ball: exact for polytopes,
/// Monte Carlo with `MC_SAMPLES` points and the given seed otherwise.
pub fn moment_table(target: &TargetNorm, n: usize, d: u32, seed: u64) -> Result<MomentTable> {
    check_degree(d)?;
    match target {
        TargetNorm::Polytope { vertices, polar } => {
            if vertices[0].len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: vertices[0].len(),
                });
            }
            Ok(exact_polytope(polar, vertices, d))
        }
        TargetNorm::PNorm(p) => {
            let q = super::dual_exponent(*p);
            let inside = move |y: &[f64]| super::p_norm(y, q) <= 1.0;
            monte_carlo(n, d, &vec![1.0; n], &inside, MC_SAMPLES, seed)
        }
        TargetNorm::Custom(c) => {
            let dirs = crate::sampling::gaussian_sphere(n, 256, seed.wrapping_add(17));
            let scaled: Vec<Vec<f64>> = dirs
                .into_iter()
                .map(|u| {
                    let s = c.eval(&u);
                    u.into_iter().map(|x| x / s).collect()
                })
                .collect();
            let half: Vec<f64> = (0..n)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    c.eval(&e)
                })
                .collect();
            // y is in the polar iff ⟨u, y⟩ ≤ 1 on the sampled boundary points u.
            let inside = move |y: &[f64]| {
                scaled
                    .iter()
                    .all(|u| u.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() <= 1.0)
            };
            monte_carlo(n, d, &half, &inside, MC_SAMPLES, seed)
        }
    }
}

/// `f_d(x) = (1/vol B°) ∫_{B°} ⟨x, y⟩^d dy` for the unit ball `B` of `target`.
pub fn moment_form(target: &TargetNorm, n: usize, d: u32) -> Result<Form> {
    Ok(moment_table(target, n, d, 0)?.form())
}
