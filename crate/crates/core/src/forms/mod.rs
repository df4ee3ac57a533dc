//! Homogeneous multivariate polynomials (forms) and biforms.
//!
//! Coefficients are `f64`. Terms live in a `BTreeMap` keyed by [`MultiIndex`],
//! whose ordering is graded lexicographic (for a fixed degree, larger powers
//! of `x1` come first). Every place that needs a canonical order (JSON output,
//! Gram bases) relies on that ordering.

mod biform;
mod calculus;
mod json;

pub use biform::{Biform, PolyMatrix};
pub use json::{FormJson, TermJson};

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Relative threshold below which arithmetic results are dropped.
pub const PRUNE_REL: f64 = 1e-14;

/// Exponent vector of a monomial.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.0.len(), other.0.len());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// True when every exponent is even.
    pub fn is_even(&self) -> bool {
        self.0.iter().all(|e| e % 2 == 0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(e, _)| **e > 0)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }

    /// Pads the exponent vector into `n_total` variables starting at `offset`.
    pub fn embed(&self, n_total: usize, offset: usize) -> MultiIndex {
        let mut e = vec![0; n_total];
        e[offset..offset + self.0.len()].copy_from_slice(&self.0);
        MultiIndex(e)
    }

    /// All exponent vectors in `n` variables of total degree `d`, in
    /// graded-lex order.
    pub fn all_of_degree(n: usize, d: u32) -> Vec<MultiIndex> {
        fn rec(n: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if n == 1 {
                prefix.push(d);
                out.push(MultiIndex(prefix.clone()));
                prefix.pop();
                return;
            }
            for e in (0..=d).rev() {
                prefix.push(e);
                rec(n - 1, d - e, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if n == 0 {
            return out;
        }
        rec(n, d, &mut Vec::with_capacity(n), &mut out);
        out
    }

    /// Number of monomials of degree `d` in `n` variables, C(n+d-1, d).
    pub fn count_of_degree(n: usize, d: u32) -> usize {
        binomial(n as u64 + d as u64 - 1, d as u64) as usize
    }

    /// Multinomial coefficient d! / (a_1! ... a_n!).
    pub fn multinomial(&self) -> f64 {
        let mut remaining = self.degree() as u64;
        let mut out = 1.0;
        for &a in &self.0 {
            out *= binomial(remaining, a as u64) as f64;
            remaining -= a as u64;
        }
        out
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// A homogeneous polynomial: every stored monomial has total degree `degree`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "json::FormJson", into = "json::FormJson")]
pub struct Form {
    n_vars: usize,
    degree: u32,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Form {
    pub fn zero(n_vars: usize, degree: u32) -> Self {
        assert!(n_vars >= 1, "a form needs at least one variable");
        Form {
            n_vars,
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: f64) -> Self {
        let mut f = Form::zero(n_vars, 0);
        if c != 0.0 {
            f.terms.insert(MultiIndex::zero(n_vars), c);
        }
        f
    }

    pub fn monomial(alpha: MultiIndex, coeff: f64) -> Self {
        let mut f = Form::zero(alpha.n_vars(), alpha.degree());
        if coeff != 0.0 {
            f.terms.insert(alpha, coeff);
        }
        f
    }

    /// Builds a form from `(exponents, coefficient)` pairs. Repeated
    /// exponents are summed; exact zeros are dropped.
    pub fn from_terms<I>(n_vars: usize, degree: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        if n_vars == 0 {
            return Err(Error::InvalidInput("n_vars must be at least 1".into()));
        }
        let mut f = Form::zero(n_vars, degree);
        for (index, (exponents, coeff)) in terms.into_iter().enumerate() {
            if exponents.len() != n_vars {
                return Err(Error::DimensionMismatch {
                    expected: n_vars,
                    found: exponents.len(),
                });
            }
            let alpha = MultiIndex(exponents);
            let found = alpha.degree();
            if found != degree {
                return Err(Error::NonHomogeneous {
                    index,
                    exponents: alpha.0,
                    found,
                    expected: degree,
                });
            }
            f.add_term(alpha, coeff);
        }
        f.terms.retain(|_, c| *c != 0.0);
        Ok(f)
    }

    /// Homogeneous Motzkin form `x^4 y^2 + x^2 y^4 - 3 x^2 y^2 z^2 + z^6`.
    pub fn motzkin() -> Self {
        Form::from_terms(
            3,
            6,
            [
                (vec![4, 2, 0], 1.0),
                (vec![2, 4, 0], 1.0),
                (vec![2, 2, 2], -3.0),
                (vec![0, 0, 6], 1.0),
            ],
        )
        .expect("static fixture")
    }

    /// `(x_1^2 + ... + x_n^2)^r`.
    pub fn quadratic_power(n: usize, r: u32) -> Self {
        let mut sq = Form::zero(n, 2);
        for i in 0..n {
            sq.terms.insert(MultiIndex::unit(n, i).add(&MultiIndex::unit(n, i)), 1.0);
        }
        let mut acc = Form::constant(n, 1.0);
        for _ in 0..r {
            acc = acc.mul(&sq);
        }
        acc
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.terms.iter().map(|(a, c)| (a, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn coeff_of(&self, exponents: &[u32]) -> f64 {
        self.coeff(&MultiIndex(exponents.to_vec()))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn add_term(&mut self, alpha: MultiIndex, coeff: f64) {
        *self.terms.entry(alpha).or_insert(0.0) += coeff;
    }

    /// Drops coefficients below `PRUNE_REL` times the largest magnitude.
    fn pruned(mut self) -> Self {
        let cut = PRUNE_REL * self.max_abs_coeff();
        self.terms.retain(|_, c| c.abs() > cut && *c != 0.0);
        self
    }

    /// Evaluates at `x`, checking the dimension.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_vars {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars,
                found: x.len(),
            });
        }
        Ok(self.eval(x))
    }

    /// Unchecked evaluation; `x` must have `n_vars` entries.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_vars);
        self.terms.iter().map(|(a, c)| c * a.eval(x)).sum()
    }

    pub fn scale(&self, s: f64) -> Form {
        let mut out = self.clone();
        if s == 0.0 {
            out.terms.clear();
        } else {
            out.terms.values_mut().for_each(|c| *c *= s);
        }
        out
    }

    fn check_compatible(&self, other: &Form) -> Result<()> {
        if self.n_vars != other.n_vars {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars,
                found: other.n_vars,
            });
        }
        Ok(())
    }

    /// `self + s * other`; both must share variable count and degree.
    pub fn add_scaled(&self, other: &Form, s: f64) -> Result<Form> {
        self.check_compatible(other)?;
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() && self.degree != other.degree {
            return Ok(other.scale(s));
        }
        if self.degree != other.degree {
            return Err(Error::InvalidDegree {
                degree: other.degree,
                reason: "sum of forms of different degrees",
            });
        }
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(a.clone(), s * c);
        }
        Ok(out.pruned())
    }

    pub fn add(&self, other: &Form) -> Result<Form> {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &Form) -> Result<Form> {
        self.add_scaled(other, -1.0)
    }

    /// Product of two forms in the same variables.
    pub fn multiply(&self, other: &Form) -> Result<Form> {
        self.check_compatible(other)?;
        Ok(self.mul(other))
    }

    fn mul(&self, other: &Form) -> Form {
        let mut out = Form::zero(self.n_vars, self.degree + other.degree);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term(a.add(b), ca * cb);
            }
        }
        out.pruned()
    }

    pub fn pow(&self, k: u32) -> Form {
        let mut acc = Form::constant(self.n_vars, 1.0);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Re-expresses the form in `n_total` variables, mapping variable `i` to
    /// `offset + i`.
    pub fn embed(&self, n_total: usize, offset: usize) -> Form {
        assert!(offset + self.n_vars <= n_total);
        Form {
            n_vars: n_total,
            degree: self.degree,
            terms: self
                .terms
                .iter()
                .map(|(a, c)| (a.embed(n_total, offset), *c))
                .collect(),
        }
    }

    /// Largest coefficient mismatch against `other`.
    pub fn max_abs_diff(&self, other: &Form) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, c) in &self.terms {
            worst = worst.max((c - other.coeff(a)).abs());
        }
        for (a, c) in &other.terms {
            if !self.terms.contains_key(a) {
                worst = worst.max(c.abs());
            }
        }
        worst
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (a, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
                write!(f, "{}", c.abs())?;
            } else {
                write!(f, "{}", c)?;
            }
            for (i, e) in a.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{}", i + 1, e)?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_order_puts_x1_first() {
        let all = MultiIndex::all_of_degree(2, 2);
        assert_eq!(
            all,
            vec![
                MultiIndex::new(vec![2, 0]),
                MultiIndex::new(vec![1, 1]),
                MultiIndex::new(vec![0, 2])
            ]
        );
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, all);
        assert_eq!(MultiIndex::all_of_degree(3, 6).len(), 28);
        assert_eq!(MultiIndex::count_of_degree(3, 6), 28);
    }

    #[test]
    fn evaluate_examples() {
        let f = Form::from_terms(2, 2, [(vec![2, 0], 1.0), (vec![0, 2], 1.0)]).unwrap();
        assert_eq!(f.evaluate(&[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(Form::motzkin().evaluate(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        let g = Form::from_terms(2, 4, [(vec![4, 0], 1.0), (vec![0, 4], 1.0)]).unwrap();
        assert_eq!(g.evaluate(&[1.0, 1.0]).unwrap(), 2.0);
        assert!(matches!(
            g.evaluate(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn rejects_non_homogeneous_terms() {
        let err = Form::from_terms(2, 2, [(vec![2, 0], 1.0), (vec![1, 0], 1.0)]).unwrap_err();
        match err {
            Error::NonHomogeneous { index, exponents, found, expected } => {
                assert_eq!(index, 1);
                assert_eq!(exponents, vec![1, 0]);
                assert_eq!((found, expected), (1, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn quadratic_powers() {
        let p1 = Form::quadratic_power(2, 1);
        assert_eq!(p1.coeff_of(&[2, 0]), 1.0);
        assert_eq!(p1.coeff_of(&[0, 2]), 1.0);
        assert_eq!(p1.len(), 2);
        let p2 = Form::quadratic_power(2, 2);
        assert_eq!(p2.coeff_of(&[4, 0]), 1.0);
        assert_eq!(p2.coeff_of(&[2, 2]), 2.0);
        assert_eq!(p2.coeff_of(&[0, 4]), 1.0);
        let p0 = Form::quadratic_power(3, 0);
        assert_eq!(p0.degree(), 0);
        assert_eq!(p0.coeff_of(&[0, 0, 0]), 1.0);
        let m = Form::motzkin().multiply(&Form::quadratic_power(3, 1)).unwrap();
        assert_eq!(m.degree(), 8);
    }

    #[test]
    fn multinomial_coefficients() {
        assert_eq!(MultiIndex::new(vec![2, 1, 1]).multinomial(), 12.0);
        assert_eq!(MultiIndex::new(vec![4, 0]).multinomial(), 1.0);
        assert_eq!(MultiIndex::new(vec![2, 2]).multinomial(), 6.0);
    }

    #[test]
    fn zero_coefficients_are_not_stored() {
        let f = Form::from_terms(2, 2, [(vec![2, 0], 1.0), (vec![2, 0], -1.0)]).unwrap();
        assert!(f.is_zero());
        let g = Form::quadratic_power(2, 1);
        assert!(g.sub(&g).unwrap().is_zero());
    }
}
