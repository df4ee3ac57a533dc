use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::certify::{build_norm_constraints, NormMode};
use crate::conic::{SolverOptions, Status, Var};
use crate::error::{Error, Result};
use crate::forms::{Form, MultiIndex};
use crate::sos::{self, SosProgram, Verdict};

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub solver: SolverOptions,
    /// Replace the conic optimum by the unconstrained least-squares
    /// solution when the latter is itself sos-convex and fits better.
    pub polish: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            solver: SolverOptions::default(),
            polish: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub f: Form,
    /// `Σ (‖x_i‖^d − f(x_i))²` evaluated at the returned form.
    pub objective: f64,
    /// Optimal value reported by the interior-point solver.
    pub solver_objective: f64,
    pub polished: bool,
    /// The returned form passed an independent sos-convexity check.
    pub sos_convex: bool,
    /// Smallest eigenvalue of the Gram matrix of an SOS decomposition of `f`.
    pub gram_min_eig: Option<f64>,
    pub positive_definite: bool,
    /// `Σ (‖x_i‖ − f^{1/d}(x_i))²` over the training samples.
    pub bound_lhs: f64,
    /// `N (ε/N)^{1/d}` with `ε = objective`.
    pub bound_rhs: f64,
    pub iterations: usize,
    pub notes: Vec<String>,
}

impl FitReport {
    pub fn bound_holds(&self) -> bool {
        self.bound_lhs <= self.bound_rhs * (1.0 + 1e-9) + 1e-15
    }
}

fn check_samples(points: &[Vec<f64>], values: &[f64], d: u32) -> Result<usize> {
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::InvalidDegree {
            degree: d,
            reason: "fitted norms need an even degree of at least 2",
        });
    }
    if points.is_empty() {
        return Err(Error::InvalidInput("no samples to fit".into()));
    }
    if points.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "{} points but {} target values",
            points.len(),
            values.len()
        )));
    }
    let n = points[0].len();
    if n == 0 {
        return Err(Error::InvalidInput("samples have no coordinates".into()));
    }
    for p in points {
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample coordinate".into()));
        }
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput(
            "target values must be finite and nonnegative".into(),
        ));
    }
    Ok(n)
}

fn form_from(n: usize, d: u32, alphas: &[MultiIndex], c: &[f64]) -> Form {
    Form::from_terms(
        n,
        d,
        alphas.iter().zip(c).map(|(a, v)| (a.exponents().to_vec(), *v)),
    )
    .expect("monomials of one degree")
}

/// Sums in index order so results do not depend on thread scheduling.
fn ordered_sum(points: &[Vec<f64>], g: impl Fn(usize, &[f64]) -> f64 + Sync) -> f64 {
    let parts: Vec<f64> = points.par_iter().enumerate().map(|(i, x)| g(i, x)).collect();
    parts.iter().sum()
}

fn residual_sum(f: &Form, points: &[Vec<f64>], y: &[f64]) -> f64 {
    ordered_sum(points, |i, x| (y[i] - f.eval(x)).powi(2))
}

/// Least-squares fit of a degree-`d` sos-convex form to `values[i]^d` at
/// `points[i]`.
pub fn fit_polynomial_norm(
    points: &[Vec<f64>],
    values: &[f64],
    d: u32,
    opts: &FitOptions,
) -> Result<FitReport> {
    let n = check_samples(points, values, d)?;
    let y: Vec<f64> = values.iter().map(|v| v.powi(d as i32)).collect();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(*v));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let ys = DVector::from_iterator(y.len(), y.iter().map(|v| v / scale));

    let mut prog = SosProgram::new();
    let sys = build_norm_constraints(&mut prog, n, d, 0, NormMode::Fixed(0.0))?;
    let alphas: Vec<MultiIndex> = sys.coefficients.iter().map(|(a, _)| a.clone()).collect();
    let m = alphas.len();
    let phi = DMatrix::from_fn(points.len(), m, |i, k| alphas[k].eval(&points[i]));

    // ‖y − Φc‖² = ‖Σ Vᵀc − Uᵀy‖² + ‖y‖² − ‖Uᵀy‖², so the epigraph block
    // only needs min(N, M) + 1 rows.
    let svd = phi.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let uty = u.transpose() * &ys;
    let rest = (ys.norm_squared() - uty.norm_squared()).max(0.0);
    let k = svd.singular_values.len();
    let arrow = prog.add_psd_block(k + 1);
    for a in 1..=k {
        prog.add_equality(vec![(Var::psd(arrow, a, a), 1.0)], 1.0);
        for b in a + 1..=k {
            prog.add_equality(vec![(Var::psd(arrow, a, b), 1.0)], 0.0);
        }
        let sigma = svd.singular_values[a - 1];
        let mut terms = vec![(Var::psd(arrow, 0, a), 1.0)];
        for (j, (_, v)) in sys.coefficients.iter().enumerate() {
            let w = sigma * vt[(a - 1, j)];
            if w != 0.0 {
                terms.push((*v, -w));
            }
        }
        prog.add_equality(terms, -uty[a - 1]);
    }
    prog.problem_mut().objective = vec![(Var::psd(arrow, 0, 0), 1.0)];
    let sol = prog.solve_with(&opts.solver)?;
    if !matches!(sol.conic.status, Status::Optimal) {
        return Err(Error::Solver(format!(
            "fit stopped with status {:?}: {}",
            sol.conic.status,
            sol.diagnostics.join("; ")
        )));
    }
    let mut notes = sol.diagnostics.clone();
    let c: Vec<f64> = sys
        .coefficients
        .iter()
        .map(|(_, v)| sol.value(*v) * scale)
        .collect();
    let mut f = form_from(n, d, &alphas, &c);
    let solver_objective = (sol.conic.primal_objective + rest) * scale * scale;
    let mut objective = residual_sum(&f, points, &y);
    let mut convex = sos::is_r_sos_convex_with(&f, 0, &opts.solver)?.verdict == Verdict::Sos;

    let mut polished = false;
    if opts.polish {
        let sol_ls = svd.solve(&ys, 1e-12 * svd.singular_values.max());
        if let Ok(c_ls) = sol_ls {
            let c_ls: Vec<f64> = c_ls.iter().map(|v| v * scale).collect();
            let g = form_from(n, d, &alphas, &c_ls);
            let obj = residual_sum(&g, points, &y);
            if obj < objective && sos::is_r_sos_convex_with(&g, 0, &opts.solver)?.verdict == Verdict::Sos {
                f = g;
                objective = obj;
                convex = true;
                polished = true;
            }
        }
    }
    if !convex {
        notes.push("fitted form did not pass an independent sos-convexity check".into());
    }
    if n >= 3 {
        notes.push(format!(
            "sos-convexity is a strict subset of convexity for n = {n}; the fit searched that subset"
        ));
    }

    let pd = sos::is_r_sos_with(&f, 0, &opts.solver)?;
    let gram_min_eig = pd.certificate.as_ref().map(|c| c.min_eig);
    let positive_definite = pd.verdict == Verdict::Sos && gram_min_eig.is_some_and(|e| e > 0.0);
    let bound_lhs = ordered_sum(points, |i, x| {
        (values[i] - f.eval(x).max(0.0).powf(1.0 / d as f64)).powi(2)
    });
    let nf = points.len() as f64;
    let bound_rhs = nf * (objective / nf).powf(1.0 / d as f64);
    Ok(FitReport {
        f,
        objective,
        solver_objective,
        polished,
        sos_convex: convex,
        gram_min_eig,
        positive_definite,
        bound_lhs,
        bound_rhs,
        iterations: sol.conic.iterations,
        notes,
    })
}

/// Largest relative error `|f^{1/d}(x) − v| / v` over the given points.
pub fn holdout_error(f: &Form, points: &[Vec<f64>], values: &[f64]) -> f64 {
    let d = f.degree() as f64;
    points
        .par_iter()
        .zip(values)
        .map(|(x, v)| (f.eval(x).max(0.0).powf(1.0 / d) - v).abs() / v)
        .reduce(|| 0.0, f64::max)
}

/// Root-mean-square relative error of `f^{1/d}` over the given points.
pub fn holdout_rms_error(f: &Form, points: &[Vec<f64>], values: &[f64]) -> f64 {
    let d = f.degree() as f64;
    let sum = ordered_sum(points, |i, x| {
        ((f.eval(x).max(0.0).powf(1.0 / d) - values[i]) / values[i]).powi(2)
    });
    (sum / points.len().max(1) as f64).sqrt()
}
