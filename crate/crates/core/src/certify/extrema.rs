//! Sampling estimates of extrema on the sphere and bisphere, and the
//! refutation oracle used before any SDP is solved.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::forms::{Biform, Form};
use crate::sampling::{normalize, quasi_sphere};

/// Extrema of a form on `S^{n-1}` (or of a biform on `S^{n-1} × S^{m-1}`,
/// in which case the arguments are the stacked `(x, y)` pairs).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphereExtrema {
    pub min_val: f64,
    pub max_val: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    /// `min_val / max_val`.
    pub ratio: f64,
}

const EXTREMA_SAMPLES: usize = 4096;
const REFINE_STEPS: usize = 50;
const REFINED: usize = 32;

/// A smooth function on a product of spheres given by a form in the
/// stacked variables.
pub(crate) struct SphereProduct {
    f: Form,
    grad: Vec<Form>,
    blocks: Vec<usize>,
}

impl SphereProduct {
    pub(crate) fn new(f: &Form, blocks: Vec<usize>) -> Result<Self> {
        let grad = if f.degree() == 0 {
            vec![Form::zero(f.n_vars(), 0); f.n_vars()]
        } else {
            f.gradient()?
        };
        Ok(SphereProduct {
            f: f.clone(),
            grad,
            blocks,
        })
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        self.f.eval(x)
    }

    fn project(&self, x: &[f64], g: &mut [f64]) {
        let mut off = 0;
        for &len in &self.blocks {
            let r = off..off + len;
            let dot: f64 = x[r.clone()].iter().zip(&g[r.clone()]).map(|(a, b)| a * b).sum();
            for k in r {
                g[k] -= dot * x[k];
            }
            off += len;
        }
    }

    fn normalize_blocks(&self, x: &mut [f64]) {
        let mut off = 0;
        for &len in &self.blocks {
            normalize(&mut x[off..off + len]);
            off += len;
        }
    }

    /// Projected gradient steps with an adaptive angular step; `sign = 1`
    /// descends, `sign = -1` ascends.
    pub(crate) fn refine(&self, start: &[f64], steps: usize, sign: f64) -> (Vec<f64>, f64) {
        let mut x = start.to_vec();
        let mut v = self.value(&x);
        let mut theta = 0.1;
        for _ in 0..steps {
            let mut g: Vec<f64> = self.grad.iter().map(|p| p.eval(&x)).collect();
            self.project(&x, &mut g);
            let gn = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            if gn < 1e-15 {
                break;
            }
            let mut accepted = false;
            for _ in 0..8 {
                let mut y: Vec<f64> = x
                    .iter()
                    .zip(&g)
                    .map(|(a, b)| a - sign * theta * b / gn)
                    .collect();
                self.normalize_blocks(&mut y);
                let w = self.value(&y);
                if sign * w < sign * v {
                    x = y;
                    v = w;
                    theta = (theta * 1.5).min(1.0);
                    accepted = true;
                    break;
                }
                theta *= 0.5;
            }
            if !accepted && theta < 1e-14 {
                break;
            }
        }
        (x, v)
    }

    /// Best value among `starts` after refining the `keep` best starting points.
    pub(crate) fn optimize(&self, starts: &[Vec<f64>], keep: usize, sign: f64) -> (Vec<f64>, f64) {
        let mut scored: Vec<(usize, f64)> = starts
            .par_iter()
            .map(|s| sign * self.value(s))
            .enumerate()
            .collect();
        // Stable order: the earliest start wins ties.
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let best_raw = scored[0];
        let refined: Vec<(Vec<f64>, f64)> = scored
            .iter()
            .take(keep)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|(k, _)| self.refine(&starts[*k], REFINE_STEPS, sign))
            .collect();
        let mut best = (starts[best_raw.0].clone(), sign * best_raw.1);
        for (x, v) in refined {
            if sign * v < sign * best.1 {
                best = (x, v);
            }
        }
        best
    }
}

fn axes(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect()
}

fn extrema(obj: &SphereProduct, starts: &[Vec<f64>]) -> SphereExtrema {
    let (argmin, min_val) = obj.optimize(starts, REFINED, 1.0);
    let (argmax, max_val) = obj.optimize(starts, REFINED, -1.0);
    SphereExtrema {
        min_val,
        max_val,
        argmin,
        argmax,
        ratio: if max_val != 0.0 { min_val / max_val } else { f64::NAN },
    }
}

/// Axis points first, then quasi-random points with seed 0.
pub(crate) fn sphere_starts(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut starts = axes(n);
    starts.extend(quasi_sphere(n, count, seed));
    starts
}

/// Axis pairs `(e_i, e_j)` first, then quasi-random pairs.
pub(crate) fn bisphere_starts(n_x: usize, n_y: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut starts = Vec::new();
    for ex in axes(n_x) {
        for ey in axes(n_y) {
            let mut p = ex.clone();
            p.extend(ey);
            starts.push(p);
        }
    }
    let xs = quasi_sphere(n_x, count, seed);
    let ys = quasi_sphere(n_y, count, seed.wrapping_add(0x9e37_79b9));
    for (x, y) in xs.into_iter().zip(ys) {
        let mut p = x;
        p.extend(y);
        starts.push(p);
    }
    starts
}

/// Heuristic extrema of `f` on the unit sphere: the best of 4096
/// quasi-random points plus the axes, the most promising refined by
/// projected gradient. Values are attained, so `min_val` bounds the true
/// minimum from above and `max_val` the maximum from below.
pub fn sphere_extrema(f: &Form) -> Result<SphereExtrema> {
    let obj = SphereProduct::new(f, vec![f.n_vars()])?;
    Ok(extrema(&obj, &sphere_starts(f.n_vars(), EXTREMA_SAMPLES, 0)))
}

/// Extrema of a biform on the product of unit spheres.
pub fn bisphere_extrema(b: &Biform) -> Result<SphereExtrema> {
    let obj = SphereProduct::new(&b.stack(), vec![b.n_x(), b.n_y()])?;
    Ok(extrema(&obj, &bisphere_starts(b.n_x(), b.n_y(), EXTREMA_SAMPLES, 0)))
}

/// Smallest value of `b` over `count` raw quasi-random bisphere samples
/// (no axis pairs, no refinement).
pub fn bisphere_sample_min(b: &Biform, count: usize, seed: u64) -> (f64, Vec<f64>) {
    let stacked = b.stack();
    let skip = b.n_x() * b.n_y();
    bisphere_starts(b.n_x(), b.n_y(), count, seed)
        .into_par_iter()
        .skip(skip)
        .map(|p| (stacked.eval(&p), p))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("nonempty sample")
}
