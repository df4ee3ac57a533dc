use std::collections::BTreeSet;

use nalgebra::DMatrix;

use super::{validate_certificate, GramCertificate, MonomialBasis, Verdict};
use crate::conic::{self, ConicProblem, ConicSolution, SolverOptions, Status, Var};
use crate::error::{Error, Result};
use crate::forms::{Form, MultiIndex};
use crate::tolerances::NOT_SOS_MARGIN;

const TIGHTEN: f64 = 1e-3;

pub(crate) fn tightened(opts: &SolverOptions) -> SolverOptions {
    SolverOptions {
        tol: opts.tol * TIGHTEN,
        ..opts.clone()
    }
}

/// `constant + Σ var · form`: a form whose coefficients are affine in
/// conic decision variables.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineForm {
    pub constant: Form,
    pub linear: Vec<(Var, Form)>,
}

impl From<Form> for AffineForm {
    fn from(f: Form) -> Self {
        AffineForm {
            constant: f,
            linear: Vec::new(),
        }
    }
}

impl AffineForm {
    pub fn zero(n_vars: usize, degree: u32) -> Self {
        Form::zero(n_vars, degree).into()
    }

    pub fn n_vars(&self) -> usize {
        self.constant.n_vars()
    }

    pub fn degree(&self) -> u32 {
        self.constant.degree()
    }

    fn check(&self, f: &Form) -> Result<()> {
        if f.n_vars() != self.n_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars(),
                found: f.n_vars(),
            });
        }
        if f.degree() != self.degree() && !f.is_zero() {
            return Err(Error::InvalidDegree {
                degree: f.degree(),
                reason: "affine form components must share one degree",
            });
        }
        Ok(())
    }

    pub fn add_term(&mut self, var: Var, f: Form) -> Result<()> {
        self.check(&f)?;
        self.linear.push((var, f));
        Ok(())
    }

    pub fn add_constant(&mut self, f: &Form) -> Result<()> {
        self.check(f)?;
        self.constant = self.constant.add(f)?;
        Ok(())
    }

    /// Applies a linear map to every component.
    pub fn map(&self, g: impl Fn(&Form) -> Result<Form>) -> Result<AffineForm> {
        Ok(AffineForm {
            constant: g(&self.constant)?,
            linear: self
                .linear
                .iter()
                .map(|(v, f)| Ok((*v, g(f)?)))
                .collect::<Result<_>>()?,
        })
    }

    pub fn add(&self, other: &AffineForm) -> Result<AffineForm> {
        let mut out = self.clone();
        out.add_constant(&other.constant)?;
        for (v, f) in &other.linear {
            out.add_term(*v, f.clone())?;
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> AffineForm {
        AffineForm {
            constant: self.constant.scale(s),
            linear: self.linear.iter().map(|(v, f)| (*v, f.scale(s))).collect(),
        }
    }

    pub fn sub(&self, other: &AffineForm) -> Result<AffineForm> {
        self.add(&other.scale(-1.0))
    }

    /// The form obtained by substituting variable values.
    pub fn evaluate_at(&self, value: impl Fn(Var) -> f64) -> Form {
        let mut out = self.constant.clone();
        for (v, f) in &self.linear {
            out = out.add_scaled(f, value(*v)).expect("components share shape");
        }
        out
    }

    pub fn monomials(&self) -> BTreeSet<MultiIndex> {
        let mut s: BTreeSet<MultiIndex> = self.constant.terms().map(|(a, _)| a.clone()).collect();
        for (_, f) in &self.linear {
            s.extend(f.terms().map(|(a, _)| a.clone()));
        }
        s
    }

    fn coefficient_terms(&self, alpha: &MultiIndex) -> Vec<(Var, f64)> {
        self.linear
            .iter()
            .map(|(v, f)| (*v, f.coeff(alpha)))
            .filter(|(_, c)| *c != 0.0)
            .collect()
    }
}

/// One SOS constraint: PSD block `block` is the Gram matrix of `target`.
#[derive(Clone, Debug)]
pub struct SosBlock {
    pub block: usize,
    pub basis: MonomialBasis,
    pub target: AffineForm,
}

/// A conic problem assembled from SOS constraints and extra linear data.
#[derive(Clone, Debug, Default)]
pub struct SosProgram {
    problem: ConicProblem,
    blocks: Vec<SosBlock>,
}

pub struct SosSolution {
    pub verdict: Verdict,
    pub margin: f64,
    pub conic: ConicSolution,
    /// One per SOS constraint, Gram polished onto the coefficient equations.
    pub certificates: Vec<GramCertificate>,
    pub diagnostics: Vec<String>,
}

impl SosSolution {
    pub fn value(&self, v: Var) -> f64 {
        self.conic.value(v)
    }
}

/// Adds the SOS constraint `target = z^T G z` to `prog` and returns its index.
pub fn sos_constraint(
    prog: &mut SosProgram,
    target: AffineForm,
    basis: MonomialBasis,
) -> Result<usize> {
    prog.add_sos(target, basis)
}

impl SosProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn problem(&self) -> &ConicProblem {
        &self.problem
    }

    pub fn problem_mut(&mut self) -> &mut ConicProblem {
        &mut self.problem
    }

    pub fn blocks(&self) -> &[SosBlock] {
        &self.blocks
    }

    pub fn new_free(&mut self) -> Var {
        self.problem.add_free()
    }

    pub fn new_nonneg(&mut self) -> Var {
        self.problem.add_nonneg()
    }

    pub fn add_psd_block(&mut self, size: usize) -> usize {
        self.problem.add_psd_block(size)
    }

    pub fn add_equality(&mut self, terms: Vec<(Var, f64)>, rhs: f64) {
        self.problem.add_equality(terms, rhs);
    }

    pub fn add_sos(&mut self, target: AffineForm, basis: MonomialBasis) -> Result<usize> {
        if !target.degree().is_multiple_of(2) {
            return Err(Error::InvalidDegree {
                degree: target.degree(),
                reason: "SOS constraints need even degree",
            });
        }
        if basis.n_vars() != target.n_vars() || 2 * basis.degree() != target.degree() {
            return Err(Error::BasisMismatch(format!(
                "basis of degree {} in {} variables for a degree-{} target in {} variables",
                basis.degree(),
                basis.n_vars(),
                target.degree(),
                target.n_vars()
            )));
        }
        let block = self.problem.add_psd_block(basis.len());
        let pairs = basis.pairs();
        let mut alphas: BTreeSet<MultiIndex> = pairs.keys().cloned().collect();
        alphas.extend(target.monomials());
        for alpha in alphas {
            let mut terms: Vec<(Var, f64)> = pairs
                .get(&alpha)
                .map(|ps| {
                    ps.iter()
                        .map(|&(i, j)| (Var::psd(block, i, j), if i == j { 1.0 } else { 2.0 }))
                        .collect()
                })
                .unwrap_or_default();
            terms.extend(
                target
                    .coefficient_terms(&alpha)
                    .into_iter()
                    .map(|(v, c)| (v, -c)),
            );
            self.problem.add_equality(terms, target.constant.coeff(&alpha));
        }
        self.blocks.push(SosBlock {
            block,
            basis,
            target,
        });
        Ok(self.blocks.len() - 1)
    }

    /// Maximizes the eigenvalue margin over all cones.
    pub fn solve_feasibility(&self) -> Result<SosSolution> {
        self.solve_feasibility_with(&SolverOptions::default())
    }

    /// Like `solve_feasibility`; an undecided result with a margin near zero
    /// is re-solved once at a thousandfold tighter tolerance.
    pub fn solve_feasibility_with(&self, opts: &SolverOptions) -> Result<SosSolution> {
        let first = self.wrap(conic::solve_feasibility_with(&self.problem, opts)?);
        if first.verdict != Verdict::Undecided || !(first.margin > -NOT_SOS_MARGIN) {
            return Ok(first);
        }
        let second = self.wrap(conic::solve_feasibility_with(&self.problem, &tightened(opts))?);
        if second.verdict == Verdict::Undecided {
            return Ok(first);
        }
        let mut second = second;
        second
            .diagnostics
            .push(format!("decided at tolerance {:e}", opts.tol * TIGHTEN));
        Ok(second)
    }

    /// Minimizes the objective set on the underlying problem.
    pub fn solve(&self) -> Result<SosSolution> {
        self.solve_with(&SolverOptions::default())
    }

    pub fn solve_with(&self, opts: &SolverOptions) -> Result<SosSolution> {
        let conic = conic::solve_with(&self.problem, opts)?;
        Ok(self.wrap(conic))
    }

    fn wrap(&self, conic: ConicSolution) -> SosSolution {
        let mut diagnostics = conic.diagnostics.clone();
        let certificates: Vec<GramCertificate> =
            self.blocks.iter().map(|b| polish(b, &conic)).collect();
        let mut verdict = match conic.status {
            Status::Optimal => Verdict::Sos,
            Status::Infeasible => Verdict::NotSos,
            _ => Verdict::Undecided,
        };
        if verdict == Verdict::Sos {
            for (k, (b, c)) in self.blocks.iter().zip(&certificates).enumerate() {
                let target = b.target.evaluate_at(|v| conic.value(v));
                let ok = validate_certificate(&target, c).map(|r| r.valid).unwrap_or(false);
                if !ok {
                    diagnostics.push(format!(
                        "block {k}: certificate failed validation (residual {:.3e}, min eig {:.3e})",
                        c.residual, c.min_eig
                    ));
                    verdict = Verdict::Undecided;
                }
            }
        }
        SosSolution {
            verdict,
            margin: conic.margin.unwrap_or(f64::NAN),
            conic,
            certificates,
            diagnostics,
        }
    }
}

/// Projects the solver's Gram matrix onto the coefficient equations with
/// the decision variables held fixed, then measures it.
fn polish(b: &SosBlock, conic: &ConicSolution) -> GramCertificate {
    let target = b.target.evaluate_at(|v| conic.value(v));
    let mut g = conic.blocks[b.block].clone();
    let n = g.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    for (alpha, ps) in b.basis.pairs() {
        let have: f64 = ps
            .iter()
            .map(|&(i, j)| if i == j { g[(i, i)] } else { 2.0 * g[(i, j)] })
            .sum();
        let weight: f64 = ps.iter().map(|&(i, j)| if i == j { 1.0 } else { 2.0 }).sum();
        let delta = (target.coeff(&alpha) - have) / weight;
        for &(i, j) in &ps {
            g[(i, j)] += delta;
            if i != j {
                g[(j, i)] += delta;
            }
        }
    }
    let mut cert = GramCertificate {
        basis: b.basis.clone(),
        gram: g,
        residual: f64::NAN,
        min_eig: f64::NAN,
    };
    if let Ok(r) = validate_certificate(&target, &cert) {
        cert.residual = r.residual;
        cert.min_eig = r.min_eig;
    }
    cert
}

impl GramCertificate {
    /// Certificate with residual and smallest eigenvalue not yet measured.
    pub fn new(basis: MonomialBasis, gram: DMatrix<f64>) -> Self {
        GramCertificate {
            basis,
            gram,
            residual: f64::NAN,
            min_eig: f64::NAN,
        }
    }
}
