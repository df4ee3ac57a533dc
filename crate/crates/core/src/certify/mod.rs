//! Certification that the d-th root of a form is a norm, the hierarchy for
//! forms with positive definite Hessian, degree bounds and hard instances.
//!
//! Every search runs the sampling oracle first; a point that violates
//! positivity or convexity ends the search with a re-checkable witness.

mod bounds;
mod extrema;
mod fixtures;
mod norm;
mod oracle;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::conic::{SolverOptions, Status};
use crate::error::{Error, Result};
use crate::forms::Form;
use crate::sos::{
    self, validate_certificate, AffineForm, GramCertificate, MonomialBasis, SosProgram, Verdict,
};

pub use bounds::{eta_bound, reznick_bound, DegreeBound};
pub use extrema::{bisphere_extrema, bisphere_sample_min, sphere_extrema, SphereExtrema};
pub use fixtures::{clique_quartic, octic_counterexample};
pub use norm::{build_norm_constraints, NormMode, NormSystem};
pub use oracle::{hessian_oracle, norm_oracle, OracleReport, Witness, WITNESS_TOL};

/// `(c, r, q)` with Gram witnesses for `q` SOS, `q · y^T H_f y` SOS and
/// `(f − c(Σx²)^{d/2})(Σx²)^r` SOS.
#[derive(Clone, Debug, Serialize)]
pub struct NormCertificate {
    pub c: f64,
    pub r: u32,
    pub deg_q: u32,
    pub q: Form,
    pub gram_q: GramCertificate,
    pub gram_conv: GramCertificate,
    pub gram_pd: GramCertificate,
}

/// `c > 0`, `r` and a Gram witness for `y^T H_{f−c(Σx²)^{d/2}}(x) y · (Σx²)^r`.
#[derive(Clone, Debug, Serialize)]
pub struct HessianCertificate {
    pub c: f64,
    pub r: u32,
    pub gram: GramCertificate,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", content = "detail")]
pub enum Outcome<C> {
    #[serde(rename = "CERTIFIED")]
    Certified(C),
    #[serde(rename = "NOT_CERTIFIED")]
    NotCertified,
    #[serde(rename = "REFUTED")]
    Refuted(Witness),
}

impl<C> Outcome<C> {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Certified(_) => "CERTIFIED",
            Outcome::NotCertified => "NOT_CERTIFIED",
            Outcome::Refuted(_) => "REFUTED",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Convexity,
    Positivity,
    Hessian,
}

/// One SDP solved along the search ladder.
#[derive(Clone, Debug, Serialize)]
pub struct Attempt {
    pub stage: Stage,
    pub r: u32,
    pub deg_q: u32,
    pub verdict: Verdict,
    pub margin: f64,
    pub status: Status,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report<C> {
    pub outcome: Outcome<C>,
    pub attempts: Vec<Attempt>,
    pub oracle: Option<OracleReport>,
    /// Multiplier degree guaranteed by the Reznick or Hessian bound, from
    /// sampled extrema.
    pub theoretical_r: Option<DegreeBound>,
    /// Some SDP on the ladder ended without a decision.
    pub solver_trouble: bool,
    pub diagnostics: Vec<String>,
}

impl<C> Report<C> {
    pub fn is_certified(&self) -> bool {
        matches!(self.outcome, Outcome::Certified(_))
    }

    fn new() -> Self {
        Report {
            outcome: Outcome::NotCertified,
            attempts: Vec::new(),
            oracle: None,
            theoretical_r: None,
            solver_trouble: false,
            diagnostics: Vec::new(),
        }
    }

    fn record(&mut self, a: Attempt, diagnostics: &[String]) {
        if a.verdict == Verdict::Undecided {
            self.solver_trouble = true;
        }
        for d in diagnostics {
            self.diagnostics.push(format!(
                "{:?} r={} deg_q={}: {d}",
                a.stage, a.r, a.deg_q
            ));
        }
        self.attempts.push(a);
    }
}

#[derive(Clone, Debug)]
pub struct CertifyOptions {
    pub r_max: u32,
    /// First multiplier degree tried; the ladder continues up to 4.
    pub deg_q: u32,
    pub samples: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            r_max: 3,
            deg_q: 0,
            samples: 10_000,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

const MAX_DEG_Q: u32 = 4;

fn require_even(f: &Form) -> Result<()> {
    if f.degree() < 2 || !f.degree().is_multiple_of(2) {
        return Err(Error::InvalidDegree {
            degree: f.degree(),
            reason: "need an even degree of at least 2",
        });
    }
    Ok(())
}

fn validated(target: &Form, mut cert: GramCertificate) -> Result<(GramCertificate, bool)> {
    let rep = validate_certificate(target, &cert)?;
    cert.residual = rep.residual;
    cert.min_eig = rep.min_eig;
    Ok((cert, rep.valid))
}

/// Symmetric coefficient matrix of a quadratic form.
fn quadratic_matrix(f: &Form) -> DMatrix<f64> {
    let n = f.n_vars();
    let mut q = DMatrix::zeros(n, n);
    for (a, c) in f.terms() {
        let idx: Vec<usize> = (0..n)
            .flat_map(|i| std::iter::repeat_n(i, a.exponents()[i] as usize))
            .collect();
        let (i, j) = (idx[0], idx[1]);
        if i == j {
            q[(i, i)] = c;
        } else {
            q[(i, j)] = 0.5 * c;
            q[(j, i)] = 0.5 * c;
        }
    }
    q
}

fn one_basis(n: usize) -> MonomialBasis {
    MonomialBasis::of_degree(n, 0)
}

fn norm_quadratic(f: &Form) -> Result<Report<NormCertificate>> {
    let n = f.n_vars();
    let q = quadratic_matrix(f);
    let eig = q.clone().symmetric_eigen();
    let k = (0..n).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
    let lmin = eig.eigenvalues[k];
    let mut report = Report::new();
    report.diagnostics.push(format!("quadratic form: smallest eigenvalue {lmin:e}"));
    if lmin <= WITNESS_TOL {
        let x: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let value = f.eval(&x);
        report.outcome = Outcome::Refuted(Witness::NonPositive { x, value });
        return Ok(report);
    }
    let s = Form::quadratic_power(n, 1);
    let (gram_q, _) = validated(
        &Form::constant(n, 1.0),
        GramCertificate::new(one_basis(n), DMatrix::identity(1, 1)),
    )?;
    let (gram_conv, ok_conv) = validated(
        &sos::r_sos_convex_target(f, 0)?,
        GramCertificate::new(sos::sos_convex_basis(n, 2, 0), &q * 2.0),
    )?;
    let (gram_pd, ok_pd) = validated(
        &f.add_scaled(&s, -lmin)?,
        GramCertificate::new(
            MonomialBasis::of_degree(n, 1),
            &q - DMatrix::identity(n, n) * lmin,
        ),
    )?;
    if ok_conv && ok_pd {
        report.outcome = Outcome::Certified(NormCertificate {
            c: lmin,
            r: 0,
            deg_q: 0,
            q: Form::constant(n, 1.0),
            gram_q,
            gram_conv,
            gram_pd,
        });
        report.theoretical_r = Some(DegreeBound::Finite(0));
    }
    Ok(report)
}

struct Convexity {
    deg_q: u32,
    q: Form,
    gram_q: GramCertificate,
    gram_conv: GramCertificate,
}

/// Searches for an SOS `q` of degree `deg_q` (trace-normalized Gram) with
/// `q · y^T H_f y` SOS.
fn convexity_rung(
    f: &Form,
    deg_q: u32,
    opts: &SolverOptions,
    report: &mut Report<NormCertificate>,
) -> Result<Option<Convexity>> {
    let n = f.n_vars();
    if deg_q == 0 {
        let out = sos::is_sos_convex(f)?;
        report.record(
            Attempt {
                stage: Stage::Convexity,
                r: 0,
                deg_q,
                verdict: out.verdict,
                margin: out.margin,
                status: out.solver_status,
                iterations: out.iterations,
            },
            &out.diagnostics,
        );
        if !out.is_sos() {
            return Ok(None);
        }
        let (gram_q, _) = validated(
            &Form::constant(n, 1.0),
            GramCertificate::new(one_basis(n), DMatrix::identity(1, 1)),
        )?;
        return Ok(Some(Convexity {
            deg_q,
            q: Form::constant(n, 1.0),
            gram_q,
            gram_conv: out.certificate.expect("SOS verdict carries a certificate"),
        }));
    }

    let h = sos::r_sos_convex_target(f, 0)?;
    let scale = h.max_abs_coeff();
    if scale == 0.0 {
        return Ok(None);
    }
    let hn = h.scale(1.0 / scale);
    let zq = MonomialBasis::of_degree(n, deg_q / 2);
    let mut prog = SosProgram::new();
    let kq = prog.add_psd_block(zq.len());
    let m = zq.len();
    let mut target = AffineForm::zero(2 * n, hn.degree() + deg_q);
    for i in 0..m {
        for j in i..m {
            let mono = zq.entries()[i].add(&zq.entries()[j]).embed(2 * n, 0);
            let mult = if i == j { 1.0 } else { 2.0 };
            let shifted = Form::monomial(mono, mult).multiply(&hn)?;
            target.add_term(crate::conic::Var::psd(kq, i, j), shifted)?;
        }
    }
    prog.add_equality(
        (0..m).map(|i| (crate::conic::Var::psd(kq, i, i), 1.0)).collect(),
        1.0,
    );
    prog.add_sos(target, sos::sos_convex_basis(n, f.degree() + deg_q, 0))?;
    let sol = prog.solve_feasibility_with(opts)?;
    report.record(
        Attempt {
            stage: Stage::Convexity,
            r: 0,
            deg_q,
            verdict: sol.verdict,
            margin: sol.margin,
            status: sol.conic.status,
            iterations: sol.conic.iterations,
        },
        &sol.diagnostics,
    );
    if sol.verdict != Verdict::Sos {
        return Ok(None);
    }
    let qg = {
        let g = &sol.conic.blocks[kq];
        (g + g.transpose()) * 0.5
    };
    let q = sos::gram_form(&zq, &qg);
    let (gram_q, ok_q) = validated(&q, GramCertificate::new(zq, qg))?;
    let mut conv = sol.certificates[0].clone();
    conv.gram *= scale;
    let target = q.embed(2 * n, 0).multiply(&h)?;
    let (gram_conv, ok_conv) = validated(&target, conv)?;
    if !(ok_q && ok_conv) {
        report.solver_trouble = true;
        report.diagnostics.push(format!(
            "deg_q={deg_q}: multiplier certificate failed validation"
        ));
        return Ok(None);
    }
    Ok(Some(Convexity {
        deg_q,
        q,
        gram_q,
        gram_conv,
    }))
}

/// `γ ≥ 0` with `(γ f − (Σx²)^{d/2})(Σx²)^r` SOS; returns `c = 1/γ` and the
/// Gram witness for `(f − c(Σx²)^{d/2})(Σx²)^r`.
fn positivity_rung<C>(
    f: &Form,
    r: u32,
    opts: &SolverOptions,
    report: &mut Report<C>,
) -> Result<Option<(f64, GramCertificate)>> {
    let n = f.n_vars();
    let d = f.degree();
    let scale = f.max_abs_coeff();
    let sr = Form::quadratic_power(n, r);
    let fn_r = f.scale(1.0 / scale).multiply(&sr)?;
    let s_top = Form::quadratic_power(n, d / 2 + r);
    let mut prog = SosProgram::new();
    let gamma = prog.new_nonneg();
    let mut target = AffineForm::from(s_top.scale(-1.0));
    target.add_term(gamma, fn_r)?;
    prog.add_sos(target, MonomialBasis::of_degree(n, d / 2 + r))?;
    let sol = prog.solve_feasibility_with(opts)?;
    report.record(
        Attempt {
            stage: Stage::Positivity,
            r,
            deg_q: 0,
            verdict: sol.verdict,
            margin: sol.margin,
            status: sol.conic.status,
            iterations: sol.conic.iterations,
        },
        &sol.diagnostics,
    );
    if sol.verdict != Verdict::Sos {
        return Ok(None);
    }
    let g = sol.value(gamma);
    if g <= 0.0 {
        report.diagnostics.push(format!("r={r}: nonpositive multiplier {g:e}"));
        return Ok(None);
    }
    let c = scale / g;
    let mut cert = sol.certificates[0].clone();
    cert.gram *= scale / g;
    let target = f.add_scaled(&Form::quadratic_power(n, d / 2), -c)?.multiply(&sr)?;
    let (cert, ok) = validated(&target, cert)?;
    if !ok {
        report.solver_trouble = true;
        report.diagnostics.push(format!(
            "r={r}: rescaled positivity certificate failed validation"
        ));
        return Ok(None);
    }
    Ok(Some((c, cert)))
}

/// Searches for `(c, r, q)` proving that `f^{1/d}` is a norm.
pub fn certify_polynomial_norm(
    f: &Form,
    opts: &CertifyOptions,
) -> Result<Report<NormCertificate>> {
    require_even(f)?;
    if !opts.deg_q.is_multiple_of(2) {
        return Err(Error::InvalidDegree {
            degree: opts.deg_q,
            reason: "multiplier degree must be even",
        });
    }
    if f.degree() == 2 {
        return norm_quadratic(f);
    }
    let mut report = Report::new();
    let oracle = norm_oracle(f, opts.samples, opts.seed)?;
    let witness = oracle.witness.clone();
    report.oracle = Some(oracle);
    if let Some(w) = witness {
        report.outcome = Outcome::Refuted(w);
        return Ok(report);
    }
    if let Ok(e) = sphere_extrema(f) {
        if e.min_val > 0.0 {
            report.theoretical_r = reznick_bound(e.ratio.min(1.0), f.n_vars(), f.degree()).ok();
        }
    }

    let mut conv = None;
    let mut dq = opts.deg_q;
    while dq <= opts.deg_q.max(MAX_DEG_Q) {
        if let Some(c) = convexity_rung(f, dq, &opts.solver, &mut report)? {
            conv = Some(c);
            break;
        }
        dq += 2;
    }
    let Some(conv) = conv else {
        return Ok(report);
    };
    for r in 0..=opts.r_max {
        if let Some((c, gram_pd)) = positivity_rung(f, r, &opts.solver, &mut report)? {
            report.outcome = Outcome::Certified(NormCertificate {
                c,
                r,
                deg_q: conv.deg_q,
                q: conv.q,
                gram_q: conv.gram_q,
                gram_conv: conv.gram_conv,
                gram_pd,
            });
            return Ok(report);
        }
    }
    Ok(report)
}

/// Searches for `c > 0` and `r ≤ r_max` with `f − c(Σx²)^{d/2}` r-sos-convex,
/// which proves `H_f(x) ≻ 0` for all `x ≠ 0`.
pub fn certify_pd_hessian(f: &Form, opts: &CertifyOptions) -> Result<Report<HessianCertificate>> {
    require_even(f)?;
    let n = f.n_vars();
    let d = f.degree();
    let mut report = Report::new();
    let (vmin, witness) = hessian_oracle(f, opts.samples, opts.seed)?;
    report.diagnostics.push(format!("smallest sampled curvature {vmin:e}"));
    if let Some(w) = witness {
        report.outcome = Outcome::Refuted(w);
        return Ok(report);
    }
    if let Ok(e) = bisphere_extrema(&f.hessian_biform()?) {
        if e.min_val > 0.0 {
            report.theoretical_r = eta_bound(e.ratio.min(1.0), n, d).ok();
        }
    }

    let h = f.hessian_biform()?;
    let scale = h.stack().max_abs_coeff();
    let hs = Form::quadratic_power(n, d / 2).hessian_biform()?;
    for r in 0..=opts.r_max {
        let (hf, hn) = if r > 0 {
            let sr = Form::quadratic_power(n, r);
            (h.mul_x(&sr)?.stack(), hs.mul_x(&sr)?.stack())
        } else {
            (h.stack(), hs.stack())
        };
        let mut prog = SosProgram::new();
        let c = prog.new_nonneg();
        let mut target = AffineForm::from(hf.scale(1.0 / scale));
        target.add_term(c, hn.scale(-1.0))?;
        prog.add_sos(target, sos::sos_convex_basis(n, d, r))?;
        let sol = prog.solve_feasibility_with(&opts.solver)?;
        report.record(
            Attempt {
                stage: Stage::Hessian,
                r,
                deg_q: 0,
                verdict: sol.verdict,
                margin: sol.margin,
                status: sol.conic.status,
                iterations: sol.conic.iterations,
            },
            &sol.diagnostics,
        );
        if sol.verdict != Verdict::Sos {
            continue;
        }
        let cv = sol.value(c) * scale;
        if cv <= 0.0 {
            report.diagnostics.push(format!("r={r}: c = {cv:e} is not positive"));
            continue;
        }
        let mut cert = sol.certificates[0].clone();
        cert.gram *= scale;
        let target = hf.add_scaled(&hn, -cv)?;
        let (gram, ok) = validated(&target, cert)?;
        if !ok {
            report.solver_trouble = true;
            report.diagnostics.push(format!("r={r}: rescaled certificate failed validation"));
            continue;
        }
        report.outcome = Outcome::Certified(HessianCertificate { c: cv, r, gram });
        return Ok(report);
    }
    Ok(report)
}
