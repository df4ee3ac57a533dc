//! Sum-of-squares programs compiled to conic problems.
//!
//! A form `p` of degree `2k` is SOS iff `p = z^T G z` for a PSD Gram matrix
//! `G`, where `z` lists the degree-`k` monomials. Matching coefficients
//! gives one equation per monomial of `p`. For Hessian biforms the basis is
//! the mixed set `{x^β y_i}`, written as monomials in the stacked `(x, y)`
//! variables.

mod program;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conic::{SolverOptions, Status};
use crate::error::{Error, Result};
use crate::forms::{Form, MultiIndex};
use crate::tolerances::{EIG_TOL, NOT_SOS_MARGIN, RES_TOL};

pub use program::{sos_constraint, AffineForm, SosBlock, SosProgram, SosSolution};

/// Gram basis: distinct monomials of one common degree, graded-lex sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialBasis {
    entries: Vec<MultiIndex>,
}

impl MonomialBasis {
    pub fn new(mut entries: Vec<MultiIndex>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::BasisMismatch("empty basis".into()));
        };
        let (n, d) = (first.n_vars(), first.degree());
        if entries.iter().any(|e| e.n_vars() != n || e.degree() != d) {
            return Err(Error::BasisMismatch(
                "basis monomials differ in variable count or degree".into(),
            ));
        }
        entries.sort();
        let before = entries.len();
        entries.dedup();
        if entries.len() != before {
            return Err(Error::BasisMismatch("duplicate basis monomial".into()));
        }
        Ok(MonomialBasis { entries })
    }

    /// All monomials of degree `half_degree` in `n` variables.
    pub fn of_degree(n: usize, half_degree: u32) -> Self {
        MonomialBasis {
            entries: MultiIndex::all_of_degree(n, half_degree),
        }
    }

    /// Mixed basis `{x^β y_i : |β| = half_deg_x}` in stacked variables.
    pub fn biform(n_x: usize, n_y: usize, half_deg_x: u32) -> Self {
        let n = n_x + n_y;
        let mut entries = Vec::new();
        for beta in MultiIndex::all_of_degree(n_x, half_deg_x) {
            for i in 0..n_y {
                entries.push(beta.embed(n, 0).add(&MultiIndex::unit(n, n_x + i)));
            }
        }
        entries.sort();
        MonomialBasis { entries }
    }

    pub fn entries(&self) -> &[MultiIndex] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_vars(&self) -> usize {
        self.entries[0].n_vars()
    }

    pub fn degree(&self) -> u32 {
        self.entries[0].degree()
    }

    /// Pairs `(i, j)`, `i <= j`, grouped by the product monomial.
    pub(crate) fn pairs(&self) -> BTreeMap<MultiIndex, Vec<(usize, usize)>> {
        let mut out: BTreeMap<MultiIndex, Vec<(usize, usize)>> = BTreeMap::new();
        for i in 0..self.entries.len() {
            for j in i..self.entries.len() {
                out.entry(self.entries[i].add(&self.entries[j]))
                    .or_default()
                    .push((i, j));
            }
        }
        out
    }
}

/// `z^T G z` over `basis`.
pub fn gram_form(basis: &MonomialBasis, g: &DMatrix<f64>) -> Form {
    let mut terms = Vec::new();
    for (i, a) in basis.entries.iter().enumerate() {
        for (j, b) in basis.entries.iter().enumerate() {
            terms.push((a.add(b).exponents().to_vec(), g[(i, j)]));
        }
    }
    Form::from_terms(basis.n_vars(), 2 * basis.degree(), terms)
        .expect("basis products are homogeneous")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GramJson", into = "GramJson")]
pub struct GramCertificate {
    pub basis: MonomialBasis,
    pub gram: DMatrix<f64>,
    /// Largest coefficient mismatch against the target.
    pub residual: f64,
    pub min_eig: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GramJson {
    basis: Vec<Vec<u32>>,
    gram: Vec<Vec<f64>>,
    residual: f64,
    min_eig: f64,
}

impl From<GramCertificate> for GramJson {
    fn from(c: GramCertificate) -> GramJson {
        GramJson {
            basis: c.basis.entries.iter().map(|e| e.exponents().to_vec()).collect(),
            gram: (0..c.gram.nrows())
                .map(|i| c.gram.row(i).iter().copied().collect())
                .collect(),
            residual: c.residual,
            min_eig: c.min_eig,
        }
    }
}

impl TryFrom<GramJson> for GramCertificate {
    type Error = Error;

    fn try_from(j: GramJson) -> Result<Self> {
        let basis = MonomialBasis::new(j.basis.into_iter().map(MultiIndex::new).collect())?;
        let n = basis.len();
        if j.gram.len() != n || j.gram.iter().any(|r| r.len() != n) {
            return Err(Error::BasisMismatch(format!(
                "Gram matrix is not {n}x{n} for a basis of {n} monomials"
            )));
        }
        let gram = DMatrix::from_fn(n, n, |i, k| j.gram[i][k]);
        Ok(GramCertificate {
            basis,
            gram,
            residual: j.residual,
            min_eig: j.min_eig,
        })
    }
}

impl GramCertificate {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub residual: f64,
    pub min_eig: f64,
    /// Residual threshold used, `res_tol · max|target coefficient|`.
    pub residual_tol: f64,
    pub valid: bool,
}

/// Recomputes residual and smallest eigenvalue of `cert` against `target`
/// without using anything reported by the solver.
pub fn validate_certificate(target: &Form, cert: &GramCertificate) -> Result<ValidationReport> {
    let basis = &cert.basis;
    if basis.n_vars() != target.n_vars() {
        return Err(Error::BasisMismatch(format!(
            "basis has {} variables, target has {}",
            basis.n_vars(),
            target.n_vars()
        )));
    }
    if 2 * basis.degree() != target.degree() {
        return Err(Error::BasisMismatch(format!(
            "basis degree {} cannot represent a degree-{} form",
            basis.degree(),
            target.degree()
        )));
    }
    let n = basis.len();
    if cert.gram.nrows() != n || cert.gram.ncols() != n {
        return Err(Error::BasisMismatch(format!(
            "Gram matrix is {}x{}, basis has {n} monomials",
            cert.gram.nrows(),
            cert.gram.ncols()
        )));
    }
    let sym = (&cert.gram + cert.gram.transpose()) * 0.5;
    let residual = gram_form(basis, &sym).max_abs_diff(target);
    let min_eig = sym.symmetric_eigenvalues().min();
    let residual_tol = RES_TOL * target.max_abs_coeff().max(f64::MIN_POSITIVE);
    Ok(ValidationReport {
        residual,
        min_eig,
        residual_tol,
        valid: min_eig >= -EIG_TOL && residual <= residual_tol,
    })
}

/// `f · (Σ x_i²)^r`.
pub fn r_sos_target(f: &Form, r: u32) -> Form {
    if r == 0 {
        return f.clone();
    }
    f.multiply(&Form::quadratic_power(f.n_vars(), r))
        .expect("same variable count")
}

/// `y^T H_f(x) y · (Σ x_i²)^r` as a form in the stacked `(x, y)` variables.
pub fn r_sos_convex_target(f: &Form, r: u32) -> Result<Form> {
    let b = f.hessian_biform()?;
    let b = if r > 0 {
        b.mul_x(&Form::quadratic_power(f.n_vars(), r))?
    } else {
        b
    };
    Ok(b.stack())
}

/// Mixed Gram basis for `r_sos_convex_target(f, r)` with `deg f = d`.
pub fn sos_convex_basis(n: usize, d: u32, r: u32) -> MonomialBasis {
    MonomialBasis::biform(n, n, (d - 2) / 2 + r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "SOS")]
    Sos,
    #[serde(rename = "NOT_SOS")]
    NotSos,
    #[serde(rename = "UNDECIDED")]
    Undecided,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Sos => "SOS",
            Verdict::NotSos => "NOT-SOS",
            Verdict::Undecided => "UNDECIDED",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SosOutcome {
    pub verdict: Verdict,
    /// Present whenever the solver returned a Gram matrix.
    pub certificate: Option<GramCertificate>,
    pub margin: f64,
    pub solver_status: Status,
    pub iterations: usize,
    pub diagnostics: Vec<String>,
}

impl SosOutcome {
    pub fn is_sos(&self) -> bool {
        self.verdict == Verdict::Sos
    }
}

fn require_even(f: &Form) -> Result<()> {
    if !f.degree().is_multiple_of(2) {
        return Err(Error::InvalidDegree {
            degree: f.degree(),
            reason: "SOS checks need even degree",
        });
    }
    Ok(())
}

/// Decides whether `target` is SOS on `basis`; the program is solved on
/// the target scaled to unit largest coefficient.
fn check(target: &Form, basis: MonomialBasis, opts: &SolverOptions) -> Result<SosOutcome> {
    let scale = target.max_abs_coeff();
    if scale == 0.0 {
        let n = basis.len();
        let cert = GramCertificate {
            basis,
            gram: DMatrix::zeros(n, n),
            residual: 0.0,
            min_eig: 0.0,
        };
        return Ok(SosOutcome {
            verdict: Verdict::Sos,
            certificate: Some(cert),
            margin: 0.0,
            solver_status: Status::Optimal,
            iterations: 0,
            diagnostics: vec!["zero form".into()],
        });
    }
    let mut prog = SosProgram::new();
    prog.add_sos(AffineForm::from(target.scale(1.0 / scale)), basis)?;
    let out = decide(&prog, target, scale, opts)?;
    if out.verdict == Verdict::Undecided && out.margin > -NOT_SOS_MARGIN {
        let tight = decide(&prog, target, scale, &program::tightened(opts))?;
        if tight.verdict != Verdict::Undecided {
            return Ok(tight);
        }
    }
    Ok(out)
}

/// Solves `prog` and validates the rescaled certificate against `target`.
fn decide(
    prog: &SosProgram,
    target: &Form,
    scale: f64,
    opts: &SolverOptions,
) -> Result<SosOutcome> {
    let sol = prog.solve_feasibility_with(opts)?;
    let mut diagnostics = sol.diagnostics.clone();
    let certificate = sol.certificates.into_iter().next().map(|mut c| {
        c.gram *= scale;
        c
    });
    let mut verdict = sol.verdict;
    let certificate = match certificate {
        Some(mut c) => {
            let report = validate_certificate(target, &c)?;
            c.residual = report.residual;
            c.min_eig = report.min_eig;
            if verdict == Verdict::Sos && !report.valid {
                diagnostics.push(format!(
                    "certificate failed validation (residual {:.3e}, min eig {:.3e})",
                    report.residual, report.min_eig
                ));
                verdict = Verdict::Undecided;
            }
            Some(c)
        }
        None => None,
    };
    Ok(SosOutcome {
        verdict,
        certificate,
        margin: sol.margin,
        solver_status: sol.conic.status,
        iterations: sol.conic.iterations,
        diagnostics,
    })
}

pub fn is_sos(f: &Form) -> Result<SosOutcome> {
    is_r_sos(f, 0)
}

/// SOS test of `(Σ x_i²)^r · f`.
pub fn is_r_sos(f: &Form, r: u32) -> Result<SosOutcome> {
    is_r_sos_with(f, r, &SolverOptions::default())
}

pub fn is_r_sos_with(f: &Form, r: u32, opts: &SolverOptions) -> Result<SosOutcome> {
    require_even(f)?;
    let target = r_sos_target(f, r);
    check(&target, MonomialBasis::of_degree(f.n_vars(), target.degree() / 2), opts)
}

pub fn is_sos_convex(f: &Form) -> Result<SosOutcome> {
    is_r_sos_convex(f, 0)
}

/// SOS test of `y^T H_f(x) y · (Σ x_i²)^r` on the mixed basis.
pub fn is_r_sos_convex(f: &Form, r: u32) -> Result<SosOutcome> {
    is_r_sos_convex_with(f, r, &SolverOptions::default())
}

pub fn is_r_sos_convex_with(f: &Form, r: u32, opts: &SolverOptions) -> Result<SosOutcome> {
    require_even(f)?;
    if f.degree() < 2 {
        return Err(Error::InvalidDegree {
            degree: f.degree(),
            reason: "sos-convexity needs degree at least 2",
        });
    }
    let target = r_sos_convex_target(f, r)?;
    check(&target, sos_convex_basis(f.n_vars(), f.degree(), r), opts)
}

#[cfg(test)]
mod tests;
