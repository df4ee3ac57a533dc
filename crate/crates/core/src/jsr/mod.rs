//! Joint spectral radius: spectral radii of products for lower bounds and
//! contracting sos-convex polynomial norms for stability certificates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::approx::emit_level_set;
use crate::certify::{build_norm_constraints, NormMode};
use crate::conic::SolverOptions;
use crate::error::{Error, Result};
use crate::forms::Form;
use crate::sos::{
    self, validate_certificate, AffineForm, GramCertificate, MonomialBasis, SosProgram, Verdict,
};

/// Schur iteration cap for `spectral_radius`.
const SCHUR_ITERS: usize = 10_000;
/// Depth used for the lower end of the bisection in `jsr_upper_bound`.
const LOWER_DEPTH: usize = 4;

/// A finite set of square matrices of one size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyJson", into = "FamilyJson")]
pub struct MatrixFamily {
    matrices: Vec<DMatrix<f64>>,
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    n: usize,
    matrices: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<FamilyJson> for MatrixFamily {
    type Error = Error;

    fn try_from(j: FamilyJson) -> Result<Self> {
        let fam = MatrixFamily::from_rows(j.matrices)?;
        if fam.n() != j.n {
            return Err(Error::DimensionMismatch {
                expected: j.n,
                found: fam.n(),
            });
        }
        Ok(fam)
    }
}

impl From<MatrixFamily> for FamilyJson {
    fn from(f: MatrixFamily) -> Self {
        FamilyJson {
            n: f.n(),
            matrices: f
                .matrices
                .iter()
                .map(|a| (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect())
                .collect(),
        }
    }
}

impl MatrixFamily {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InvalidInput("matrix family is empty".into()));
        };
        let n = first.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("matrices must be at least 1×1".into()));
        }
        for a in &matrices {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: if a.nrows() != n { a.nrows() } else { a.ncols() },
                });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite matrix entry".into()));
            }
        }
        Ok(MatrixFamily { matrices })
    }

    /// Builds the family from row-major nested vectors.
    pub fn from_rows(rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let mats = rows
            .into_iter()
            .map(|m| {
                let n = m.len();
                if let Some(r) = m.iter().find(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: r.len(),
                    });
                }
                Ok(DMatrix::from_fn(n, n, |i, j| m[i][j]))
            })
            .collect::<Result<Vec<_>>>()?;
        MatrixFamily::new(mats)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("matrix family serializes")
    }

    pub fn n(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn scaled(&self, c: f64) -> MatrixFamily {
        MatrixFamily {
            matrices: self.matrices.iter().map(|a| a * c).collect(),
        }
    }

    /// `max_i ‖A_i‖₂`, an upper bound on the joint spectral radius.
    pub fn max_norm(&self) -> f64 {
        self.matrices
            .iter()
            .map(|a| a.clone().svd(false, false).singular_values.max())
            .fold(0.0, f64::max)
    }
}

/// Largest eigenvalue modulus, from a real Schur decomposition.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, SCHUR_ITERS)
        .ok_or(Error::NoConvergence)?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// `max ρ(A_{σ_k}⋯A_{σ_1})^{1/k}` over all products of length at most
/// `max_len`, enumerated depth first.
pub fn jsr_lower_bound(fam: &MatrixFamily, max_len: usize) -> Result<f64> {
    if max_len == 0 {
        return Err(Error::InvalidInput("max_len must be at least 1".into()));
    }
    // Products are stored normalized, with the logarithm of the dropped scale.
    fn walk(
        fam: &MatrixFamily,
        prod: &DMatrix<f64>,
        log_scale: f64,
        depth: usize,
        max_len: usize,
        best: &mut f64,
    ) -> Result<()> {
        for a in fam.matrices() {
            let next = a * prod;
            let norm = next.norm();
            if norm == 0.0 {
                continue;
            }
            let log_next = log_scale + norm.ln();
            let next = next / norm;
            let rho = spectral_radius(&next)?;
            if rho > 0.0 {
                let v = ((rho.ln() + log_next) / (depth + 1) as f64).exp();
                *best = best.max(v);
            }
            if depth + 1 < max_len {
                walk(fam, &next, log_next, depth + 1, max_len, best)?;
            }
        }
        Ok(())
    }
    let mut best = 0.0;
    walk(fam, &DMatrix::identity(fam.n(), fam.n()), 0.0, 0, max_len, &mut best)?;
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct JsrOptions {
    /// Use `r`-sos-convexity in the norm condition.
    pub r: u32,
    pub samples: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for JsrOptions {
    fn default() -> Self {
        JsrOptions {
            r: 0,
            samples: 1000,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

pub const DEFAULT_DEGREES: [u32; 4] = [2, 4, 6, 8];

#[derive(Clone, Debug, Serialize)]
pub struct JsrCertificate {
    pub d: u32,
    pub r: u32,
    pub f: Form,
    /// `f − (Σx²)^{d/2}` is `r`-sos-convex.
    pub gram_conv: GramCertificate,
    /// One per matrix: `f(x) − f(A_i x) − (Σx²)^{d/2}` is SOS.
    pub gram_contract: Vec<GramCertificate>,
    /// Smallest `1 − V(A_i x)/V(x)` over the sampled points, `V = f^{1/d}`.
    pub contraction_margin: f64,
}

impl JsrCertificate {
    /// `V(x) = f(x)^{1/d}`.
    pub fn norm(&self, x: &[f64]) -> f64 {
        self.f.eval(x).max(0.0).powf(1.0 / self.d as f64)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeAttempt {
    pub d: u32,
    pub verdict: Verdict,
    pub margin: f64,
    pub iterations: usize,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JsrOutcome {
    Certified(JsrCertificate),
    NotCertified,
}

#[derive(Clone, Debug, Serialize)]
pub struct JsrReport {
    pub outcome: JsrOutcome,
    pub attempts: Vec<DegreeAttempt>,
}

impl JsrReport {
    pub fn is_certified(&self) -> bool {
        matches!(self.outcome, JsrOutcome::Certified(_))
    }

    pub fn certificate(&self) -> Option<&JsrCertificate> {
        match &self.outcome {
            JsrOutcome::Certified(c) => Some(c),
            JsrOutcome::NotCertified => None,
        }
    }
}

fn contraction_margin(fam: &MatrixFamily, f: &Form, d: u32, samples: usize, seed: u64) -> f64 {
    let v = |x: &[f64]| f.eval(x).max(0.0).powf(1.0 / d as f64);
    let pts = crate::sampling::gaussian_sphere(fam.n(), samples.max(1), seed);
    let mut worst = f64::INFINITY;
    for x in &pts {
        let vx = v(x);
        for a in fam.matrices() {
            let ax: Vec<f64> = (a * nalgebra::DVector::from_column_slice(x)).iter().copied().collect();
            worst = worst.min(1.0 - v(&ax) / vx);
        }
    }
    worst
}

/// Solves the contracting-norm feasibility system at one degree.
fn attempt(fam: &MatrixFamily, d: u32, opts: &JsrOptions) -> Result<(DegreeAttempt, Option<JsrCertificate>)> {
    let n = fam.n();
    let mut prog = SosProgram::new();
    let sys = build_norm_constraints(&mut prog, n, d, opts.r, NormMode::Fixed(1.0))?;
    let s = Form::quadratic_power(n, d / 2);
    let mut targets = Vec::new();
    for a in fam.matrices() {
        let mut t = sys.f.map(|g| g.sub(&g.compose_linear(a)?))?;
        t.add_constant(&s.scale(-1.0))?;
        targets.push(t.clone());
        prog.add_sos(t, MonomialBasis::of_degree(n, d / 2))?;
    }
    let sol = prog.solve_feasibility_with(&opts.solver)?;
    let mut diagnostics = sol.diagnostics.clone();
    let mut verdict = sol.verdict;
    let mut cert = None;
    if verdict == Verdict::Sos {
        let f = sys.f.evaluate_at(|v| sol.value(v));
        let conv_target = sos::r_sos_convex_target(&f.sub(&s)?, opts.r)?;
        let mut valid = validate_certificate(&conv_target, &sol.certificates[sys.block])?.valid;
        let contract: Vec<GramCertificate> = (0..fam.len())
            .map(|k| sol.certificates[sys.block + 1 + k].clone())
            .collect();
        for (t, c) in targets.iter().zip(&contract) {
            let t: &AffineForm = t;
            valid &= validate_certificate(&t.evaluate_at(|v| sol.value(v)), c)?.valid;
        }
        let margin = contraction_margin(fam, &f, d, opts.samples, opts.seed);
        if !valid {
            diagnostics.push("certificate failed independent validation".into());
            verdict = Verdict::Undecided;
        } else if !(margin > 0.0) {
            diagnostics.push(format!("sampled contraction failed: margin {margin:.3e}"));
            verdict = Verdict::Undecided;
        } else {
            cert = Some(JsrCertificate {
                d,
                r: opts.r,
                f,
                gram_conv: sol.certificates[sys.block].clone(),
                gram_contract: contract,
                contraction_margin: margin,
            });
        }
    }
    Ok((
        DegreeAttempt {
            d,
            verdict,
            margin: sol.margin,
            iterations: sol.conic.iterations,
            diagnostics,
        },
        cert,
    ))
}

/// Searches the degrees in order for a contracting sos-convex polynomial
/// norm; a certificate proves `ρ < 1`.
pub fn jsr_certify(fam: &MatrixFamily, degrees: &[u32], opts: &JsrOptions) -> Result<JsrReport> {
    if degrees.is_empty() {
        return Err(Error::InvalidInput("no degrees to try".into()));
    }
    if let Some(&d) = degrees.iter().find(|&&d| d < 2 || d % 2 != 0) {
        return Err(Error::InvalidDegree {
            degree: d,
            reason: "contracting norms need an even degree of at least 2",
        });
    }
    let mut attempts = Vec::new();
    for &d in degrees {
        let (a, cert) = attempt(fam, d, opts)?;
        attempts.push(a);
        if let Some(cert) = cert {
            return Ok(JsrReport {
                outcome: JsrOutcome::Certified(cert),
                attempts,
            });
        }
    }
    Ok(JsrReport {
        outcome: JsrOutcome::NotCertified,
        attempts,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct UpperBound {
    pub value: f64,
    /// False when even the norm bound could not be certified and `value`
    /// is `max_i ‖A_i‖₂`.
    pub certified: bool,
    pub lower: f64,
    pub steps: usize,
}

/// Smallest `γ` (to within `tol`) for which `{A_i/γ}` is certified at
/// degree `d`, by bisection between the product lower bound and the
/// largest spectral norm.
pub fn jsr_upper_bound(fam: &MatrixFamily, d: u32, tol: f64, opts: &JsrOptions) -> Result<UpperBound> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let lower = jsr_lower_bound(fam, LOWER_DEPTH)?;
    let norm = fam.max_norm();
    let ok = |g: f64| -> Result<bool> {
        Ok(g > 0.0 && jsr_certify(&fam.scaled(1.0 / g), &[d], opts)?.is_certified())
    };
    let mut hi = norm + tol;
    if !ok(hi)? {
        return Ok(UpperBound {
            value: norm,
            certified: false,
            lower,
            steps: 1,
        });
    }
    let mut lo = lower;
    let mut steps = 1;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        steps += 1;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(UpperBound {
        value: hi,
        certified: true,
        lower,
        steps,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionFigure {
    /// Points of `{V = 1}`.
    pub level: Vec<[f64; 2]>,
    /// The same points mapped by each `A_i`.
    pub images: Vec<Vec<[f64; 2]>>,
    /// `min 1 − V(A_i p)` over emitted points.
    pub margin: f64,
}

impl ContractionFigure {
    pub fn contained(&self) -> bool {
        self.margin > 0.0
    }
}

/// The unit level set of the certified norm and its images under the family.
pub fn emit_contraction_figure(
    cert: &JsrCertificate,
    fam: &MatrixFamily,
    resolution: usize,
) -> Result<ContractionFigure> {
    if fam.n() != 2 || cert.f.n_vars() != 2 {
        return Err(Error::LevelSet("contraction figures are drawn for n = 2".into()));
    }
    let level = emit_level_set(&cert.f, 1.0, resolution)?;
    let mut margin = f64::INFINITY;
    let images = fam
        .matrices()
        .iter()
        .map(|a| {
            level
                .iter()
                .map(|p| {
                    let q = [
                        a[(0, 0)] * p[0] + a[(0, 1)] * p[1],
                        a[(1, 0)] * p[0] + a[(1, 1)] * p[1],
                    ];
                    margin = margin.min(1.0 - cert.norm(&q));
                    q
                })
                .collect()
        })
        .collect();
    Ok(ContractionFigure {
        level,
        images,
        margin,
    })
}
