//! Sampling refutation: searches for points where a form fails to be
//! positive, convex, or to have positive definite Hessian.

use rayon::prelude::*;
use serde::Serialize;

use super::extrema::{bisphere_starts, sphere_starts, SphereProduct};
use crate::error::Result;
use crate::forms::Form;
use crate::sampling::quasi_sphere;

/// Slack used by every witness check.
pub const WITNESS_TOL: f64 = 1e-10;

const REFINED: usize = 16;

/// A point certifying that a form is not a polynomial norm (or that its
/// Hessian is not positive definite). Each variant can be re-checked by
/// direct evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `‖x‖ = 1` and `f(x) ≤ 1e-10`.
    NonPositive { x: Vec<f64>, value: f64 },
    /// `f((a+b)/2) > (f(a)+f(b))/2 + 1e-10`.
    MidpointViolation { a: Vec<f64>, b: Vec<f64>, excess: f64 },
    /// Unit `x`, `y` with `y^T H_f(x) y ≤ 1e-10`.
    NonPositiveCurvature { x: Vec<f64>, y: Vec<f64>, value: f64 },
}

fn unit(v: &[f64]) -> bool {
    (v.iter().map(|a| a * a).sum::<f64>().sqrt() - 1.0).abs() <= 1e-9
}

impl Witness {
    /// Re-evaluates the witness on `f` from scratch.
    pub fn recheck(&self, f: &Form) -> bool {
        match self {
            Witness::NonPositive { x, .. } => {
                x.len() == f.n_vars() && unit(x) && f.eval(x) <= WITNESS_TOL
            }
            Witness::MidpointViolation { a, b, .. } => {
                if a.len() != f.n_vars() || b.len() != f.n_vars() {
                    return false;
                }
                let m: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
                f.eval(&m) > 0.5 * (f.eval(a) + f.eval(b)) + WITNESS_TOL
            }
            Witness::NonPositiveCurvature { x, y, .. } => {
                if x.len() != f.n_vars() || y.len() != f.n_vars() || !unit(x) || !unit(y) {
                    return false;
                }
                match f.hessian_biform() {
                    Ok(h) => h.eval(x, y) <= WITNESS_TOL,
                    Err(_) => false,
                }
            }
        }
    }
}

/// Summary of a sampling pass over the sphere and bisphere.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub samples: usize,
    /// Smallest `f` found on the unit sphere.
    pub sphere_min: f64,
    pub sphere_argmin: Vec<f64>,
    /// Smallest `y^T H_f(x) y` found on the bisphere, at stacked `(x, y)`.
    pub curvature_min: f64,
    pub curvature_argmin: Vec<f64>,
    /// Largest midpoint excess over random segments.
    pub midpoint_excess: f64,
    pub witness: Option<Witness>,
}

fn sphere_min(f: &Form, samples: usize, seed: u64) -> Result<(Vec<f64>, f64)> {
    let obj = SphereProduct::new(f, vec![f.n_vars()])?;
    let starts = sphere_starts(f.n_vars(), samples, seed);
    let (x, v) = obj.optimize(&starts, REFINED, 1.0);
    Ok((x, v))
}

/// Smallest Hessian biform value on the bisphere over `samples` points.
pub(crate) fn curvature_min(f: &Form, samples: usize, seed: u64) -> Result<(Vec<f64>, f64)> {
    let n = f.n_vars();
    let b = f.hessian_biform()?;
    let obj = SphereProduct::new(&b.stack(), vec![n, n])?;
    let starts = bisphere_starts(n, n, samples, seed);
    Ok(obj.optimize(&starts, REFINED, 1.0))
}

/// Midpoint test along `x ± εy` for a direction of negative curvature.
fn midpoint_from_curvature(f: &Form, x: &[f64], y: &[f64]) -> Option<Witness> {
    for eps in [0.5, 0.3, 0.1, 1e-2, 1e-3] {
        let a: Vec<f64> = x.iter().zip(y).map(|(p, q)| p + eps * q).collect();
        let b: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - eps * q).collect();
        let excess = f.eval(x) - 0.5 * (f.eval(&a) + f.eval(&b));
        if excess > WITNESS_TOL {
            return Some(Witness::MidpointViolation { a, b, excess });
        }
    }
    None
}

/// Largest midpoint excess over segments between pairs of sample points.
fn segment_scan(f: &Form, samples: usize, seed: u64) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let n = f.n_vars();
    let a = quasi_sphere(n, samples, seed.wrapping_add(2));
    let b = quasi_sphere(n, samples, seed.wrapping_add(3));
    a.into_par_iter()
        .zip(b)
        .map(|(a, b)| {
            let m: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
            let excess = f.eval(&m) - 0.5 * (f.eval(&a) + f.eval(&b));
            (a, b, excess)
        })
        .max_by(|x, y| x.2.total_cmp(&y.2))
}

/// Searches for a point where `f` is not positive or not convex.
pub fn norm_oracle(f: &Form, samples: usize, seed: u64) -> Result<OracleReport> {
    let (sphere_argmin, smin) = sphere_min(f, samples, seed)?;
    let (curvature_argmin, cmin) = curvature_min(f, samples, seed.wrapping_add(1))?;
    let n = f.n_vars();
    let scan = segment_scan(f, samples, seed);
    let midpoint_excess = scan.as_ref().map(|s| s.2).unwrap_or(f64::NEG_INFINITY);

    let witness = if smin <= WITNESS_TOL {
        Some(Witness::NonPositive {
            x: sphere_argmin.clone(),
            value: smin,
        })
    } else if cmin < 0.0 {
        midpoint_from_curvature(f, &curvature_argmin[..n], &curvature_argmin[n..])
    } else {
        None
    };
    let witness = witness.or(match scan {
        Some((a, b, excess)) if excess > WITNESS_TOL => {
            Some(Witness::MidpointViolation { a, b, excess })
        }
        _ => None,
    });
    Ok(OracleReport {
        samples,
        sphere_min: smin,
        sphere_argmin,
        curvature_min: cmin,
        curvature_argmin,
        midpoint_excess,
        witness,
    })
}

/// Searches the bisphere for `y^T H_f(x) y ≤ 1e-10`.
pub fn hessian_oracle(f: &Form, samples: usize, seed: u64) -> Result<(f64, Option<Witness>)> {
    let n = f.n_vars();
    let (p, v) = curvature_min(f, samples, seed)?;
    let witness = (v <= WITNESS_TOL).then(|| Witness::NonPositiveCurvature {
        x: p[..n].to_vec(),
        y: p[n..].to_vec(),
        value: v,
    });
    Ok((v, witness))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indefinite_form_has_positivity_witness() {
        let f = Form::from_terms(2, 2, [(vec![2, 0], 1.0), (vec![0, 2], -1.0)]).unwrap();
        let rep = norm_oracle(&f, 500, 0).unwrap();
        let w = rep.witness.unwrap();
        assert!(matches!(w, Witness::NonPositive { .. }));
        assert!(w.recheck(&f));
    }

    #[test]
    fn nonconvex_positive_form_has_midpoint_witness() {
        // Positive on the sphere but not convex.
        let f = Form::from_terms(
            2,
            4,
            [(vec![4, 0], 1.0), (vec![2, 2], -1.5), (vec![0, 4], 1.0)],
        )
        .unwrap();
        let rep = norm_oracle(&f, 2000, 0).unwrap();
        assert!(rep.sphere_min > 0.0);
        let w = rep.witness.expect("nonconvex");
        assert!(matches!(w, Witness::MidpointViolation { .. }));
        assert!(w.recheck(&f));
    }

    #[test]
    fn norms_pass() {
        let f = Form::from_terms(2, 4, [(vec![4, 0], 1.0), (vec![0, 4], 1.0)]).unwrap();
        let rep = norm_oracle(&f, 2000, 0).unwrap();
        assert!(rep.witness.is_none());
        assert!(rep.curvature_min.abs() < 1e-12);
        let (v, w) = hessian_oracle(&f, 2000, 0).unwrap();
        assert!(v <= WITNESS_TOL);
        assert!(w.unwrap().recheck(&f));
    }

    #[test]
    fn forged_witnesses_fail_recheck() {
        let f = Form::quadratic_power(2, 1);
        assert!(!Witness::NonPositive { x: vec![1.0, 0.0], value: 0.0 }.recheck(&f));
        assert!(!Witness::NonPositive { x: vec![0.0, 0.0], value: 0.0 }.recheck(&f));
        assert!(!Witness::MidpointViolation { a: vec![1.0, 0.0], b: vec![0.0, 1.0], excess: 1.0 }
            .recheck(&f));
        assert!(!Witness::NonPositiveCurvature { x: vec![1.0, 0.0], y: vec![0.0, 1.0], value: 0.0 }
            .recheck(&f));
    }
}
