use crate::conic::Var;
use crate::error::{Error, Result};
use crate::forms::{Form, MultiIndex};
use crate::sos::{self, AffineForm, SosProgram};

/// How the constant `c` in `f − c(Σx²)^{d/2}` enters the system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormMode {
    /// `c ≥ 0` is a decision variable.
    FreeC,
    /// `c = 1 + s`, `s ≥ 0`; suitable when `f` is otherwise unconstrained.
    AtLeastOne,
    Fixed(f64),
}

/// Conic constraints making `f − c(Σx²)^{d/2}` r-sos-convex, with the
/// coefficients of `f` as free variables.
#[derive(Clone, Debug)]
pub struct NormSystem {
    pub n: usize,
    pub d: u32,
    pub r: u32,
    pub mode: NormMode,
    /// One free variable per degree-`d` monomial, graded-lex order.
    pub coefficients: Vec<(MultiIndex, Var)>,
    /// `f` as an affine form in the coefficient variables.
    pub f: AffineForm,
    /// The variable `c` (`FreeC`) or `s` (`AtLeastOne`).
    pub c_var: Option<Var>,
    /// Index of the SOS constraint inside the program.
    pub block: usize,
}

impl NormSystem {
    pub fn form(&self, value: impl Fn(Var) -> f64) -> Form {
        self.f.evaluate_at(value)
    }

    pub fn c_value(&self, value: impl Fn(Var) -> f64) -> f64 {
        match (self.mode, self.c_var) {
            (NormMode::FreeC, Some(v)) => value(v),
            (NormMode::AtLeastOne, Some(v)) => 1.0 + value(v),
            (NormMode::Fixed(c), _) => c,
            _ => unreachable!("mode and variable are created together"),
        }
    }
}

fn hessian_target(g: &Form, r: u32) -> Result<Form> {
    sos::r_sos_convex_target(g, r)
}

/// Adds the r-sos-convexity constraint on `f − c(Σx²)^{d/2}` to `prog`.
pub fn build_norm_constraints(
    prog: &mut SosProgram,
    n: usize,
    d: u32,
    r: u32,
    mode: NormMode,
) -> Result<NormSystem> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one variable".into()));
    }
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::InvalidDegree {
            degree: d,
            reason: "norm constraints need an even degree of at least 2",
        });
    }
    if let NormMode::Fixed(c) = mode {
        if !c.is_finite() {
            return Err(Error::InvalidInput(format!("fixed c must be finite, got {c}")));
        }
    }
    let mut f = AffineForm::zero(n, d);
    let mut coefficients = Vec::new();
    let mut target = AffineForm::zero(2 * n, d + 2 * r);
    for alpha in MultiIndex::all_of_degree(n, d) {
        let v = prog.new_free();
        let mono = Form::monomial(alpha.clone(), 1.0);
        f.add_term(v, mono.clone())?;
        target.add_term(v, hessian_target(&mono, r)?)?;
        coefficients.push((alpha, v));
    }
    let hs = hessian_target(&Form::quadratic_power(n, d / 2), r)?;
    let c_var = match mode {
        NormMode::FreeC => {
            let c = prog.new_nonneg();
            target.add_term(c, hs.scale(-1.0))?;
            Some(c)
        }
        NormMode::AtLeastOne => {
            let s = prog.new_nonneg();
            target.add_constant(&hs.scale(-1.0))?;
            target.add_term(s, hs.scale(-1.0))?;
            Some(s)
        }
        NormMode::Fixed(c) => {
            target.add_constant(&hs.scale(-c))?;
            None
        }
    };
    let block = prog.add_sos(target, sos::sos_convex_basis(n, d, r))?;
    Ok(NormSystem {
        n,
        d,
        r,
        mode,
        coefficients,
        f,
        c_var,
        block,
    })
}
