//! Approximation of norms by polynomial norms: moment forms over polar
//! bodies and least-squares fits under sos-convexity.

mod fit;
mod levelset;
mod moments;
mod polytope;

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use fit::{fit_polynomial_norm, holdout_error, holdout_rms_error, FitOptions, FitReport};
pub use levelset::emit_level_set;
pub use moments::{moment_form, moment_table, MomentTable, MC_SAMPLES};
pub use polytope::{grundmann_moller, is_symmetric, polar_polytope};

/// A black-box norm.
#[derive(Clone)]
pub struct CustomNorm(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl CustomNorm {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        CustomNorm(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for CustomNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomNorm(..)")
    }
}

/// A norm to approximate.
#[derive(Clone, Debug)]
pub enum TargetNorm {
    /// `‖x‖_p`, `p ≥ 1` (infinite `p` allowed).
    PNorm(f64),
    /// Gauge of an origin-symmetric polytope, with its polar vertices.
    Polytope {
        vertices: Vec<Vec<f64>>,
        polar: Vec<Vec<f64>>,
    },
    Custom(CustomNorm),
}

pub(crate) fn p_norm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m == 0.0 {
            return 0.0;
        }
        m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Hölder conjugate of `p`.
pub(crate) fn dual_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

impl TargetNorm {
    pub fn p_norm(p: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidInput(format!("p-norms need p >= 1, got {p}")));
        }
        Ok(TargetNorm::PNorm(p))
    }

    /// Gauge norm of the polytope with the given vertices, which must be
    /// closed under negation and span the space.
    pub fn polytope(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let polar = polar_polytope(&vertices)?;
        if !is_symmetric(&vertices) {
            return Err(Error::DegeneratePolytope(
                "vertex set is not symmetric under negation".into(),
            ));
        }
        Ok(TargetNorm::Polytope { vertices, polar })
    }

    pub fn custom(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        TargetNorm::Custom(CustomNorm::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TargetNorm::PNorm(p) => p_norm(x, *p),
            TargetNorm::Polytope { polar, .. } => polar
                .iter()
                .map(|a| a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>())
                .fold(0.0, f64::max),
            TargetNorm::Custom(c) => c.eval(x),
        }
    }
}

/// Worst-case ratio guarantee `d/(n+d) · (n/(n+d))^{n/d}` for moment forms.
pub fn approx_factor(n: usize, d: u32) -> f64 {
    let (n, d) = (n as f64, d as f64);
    d / (n + d) * (n / (n + d)).powf(n / d)
}

/// `count` unit vectors from normalized Gaussians.
pub fn sample_sphere(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    crate::sampling::gaussian_sphere(n, count, seed)
}

/// Shuffles `0..len` with `seed` and splits it 80/20 into training and
/// holdout indices.
pub fn holdout_split(len: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (len * 4).div_ceil(5);
    let holdout = idx.split_off(cut);
    (idx, holdout)
}

#[cfg(test)]
mod tests;
