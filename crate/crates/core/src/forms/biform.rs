use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{Form, MultiIndex, PRUNE_REL};
use crate::error::{Error, Result};

/// A polynomial in two groups of variables, homogeneous of degree `deg_x`
/// in `x` and `deg_y` in `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Biform {
    n_x: usize,
    n_y: usize,
    deg_x: u32,
    deg_y: u32,
    terms: BTreeMap<(MultiIndex, MultiIndex), f64>,
}

impl Biform {
    pub fn zero(n_x: usize, n_y: usize, deg_x: u32, deg_y: u32) -> Self {
        Biform {
            n_x,
            n_y,
            deg_x,
            deg_y,
            terms: BTreeMap::new(),
        }
    }

    pub(crate) fn add_term(&mut self, ax: MultiIndex, ay: MultiIndex, c: f64) {
        debug_assert_eq!(ax.degree(), self.deg_x);
        debug_assert_eq!(ay.degree(), self.deg_y);
        *self.terms.entry((ax, ay)).or_insert(0.0) += c;
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn deg_x(&self) -> u32 {
        self.deg_x
    }

    pub fn deg_y(&self) -> u32 {
        self.deg_y
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &MultiIndex, f64)> + '_ {
        self.terms.iter().map(|((a, b), c)| (a, b, *c))
    }

    pub fn coeff(&self, ax: &[u32], ay: &[u32]) -> f64 {
        self.terms
            .get(&(MultiIndex::new(ax.to_vec()), MultiIndex::new(ay.to_vec())))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.n_x {
            return Err(Error::DimensionMismatch {
                expected: self.n_x,
                found: x.len(),
            });
        }
        if y.len() != self.n_y {
            return Err(Error::DimensionMismatch {
                expected: self.n_y,
                found: y.len(),
            });
        }
        Ok(self.eval(x, y))
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|((a, b), c)| c * a.eval(x) * b.eval(y))
            .sum()
    }

    /// Multiplies by a form in the `x` variables only.
    pub fn mul_x(&self, g: &Form) -> Result<Biform> {
        if g.n_vars() != self.n_x {
            return Err(Error::DimensionMismatch {
                expected: self.n_x,
                found: g.n_vars(),
            });
        }
        let mut out = Biform::zero(self.n_x, self.n_y, self.deg_x + g.degree(), self.deg_y);
        for ((a, b), c) in &self.terms {
            for (ga, gc) in g.terms() {
                out.add_term(a.add(ga), b.clone(), c * gc);
            }
        }
        let cut = PRUNE_REL * out.terms.values().fold(0.0f64, |m, c| m.max(c.abs()));
        out.terms.retain(|_, c| c.abs() > cut && *c != 0.0);
        Ok(out)
    }

    /// The same polynomial as a form in `n_x + n_y` stacked variables
    /// `(x, y)`, of degree `deg_x + deg_y`.
    pub fn stack(&self) -> Form {
        let n = self.n_x + self.n_y;
        let mut f = Form::zero(n, self.deg_x + self.deg_y);
        for ((a, b), c) in &self.terms {
            let mut e = Vec::with_capacity(n);
            e.extend_from_slice(a.exponents());
            e.extend_from_slice(b.exponents());
            f.add_term(MultiIndex::new(e), *c);
        }
        f
    }

    /// Splits a stacked form back into a biform. Fails if some term is not
    /// bihomogeneous of the requested degrees.
    pub fn from_stacked(f: &Form, n_x: usize, deg_x: u32, deg_y: u32) -> Result<Biform> {
        if n_x >= f.n_vars() {
            return Err(Error::DimensionMismatch {
                expected: f.n_vars(),
                found: n_x,
            });
        }
        let n_y = f.n_vars() - n_x;
        let mut out = Biform::zero(n_x, n_y, deg_x, deg_y);
        for (index, (alpha, c)) in f.terms().enumerate() {
            let ax = MultiIndex::new(alpha.exponents()[..n_x].to_vec());
            let ay = MultiIndex::new(alpha.exponents()[n_x..].to_vec());
            if ax.degree() != deg_x || ay.degree() != deg_y {
                return Err(Error::NonHomogeneous {
                    index,
                    exponents: alpha.exponents().to_vec(),
                    found: ax.degree(),
                    expected: deg_x,
                });
            }
            out.add_term(ax, ay, c);
        }
        Ok(out)
    }
}

/// Symmetric matrix of forms sharing variables and degree.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    dim: usize,
    entries: Vec<Form>,
}

impl PolyMatrix {
    pub(crate) fn from_entries(dim: usize, entries: Vec<Form>) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        PolyMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &Form {
        &self.entries[i * self.dim + j]
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = self.get(i, j).evaluate(x)?;
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stack_round_trip() {
        let b = Form::quadratic_power(2, 2).hessian_biform().unwrap();
        let s = b.stack();
        assert_eq!(s.n_vars(), 4);
        assert_eq!(s.degree(), 4);
        let back = Biform::from_stacked(&s, 2, 2, 2).unwrap();
        assert_eq!(back, b);
        let x = [0.3, -1.2];
        let y = [0.7, 0.4];
        let direct = b.evaluate(&x, &y).unwrap();
        let stacked = s.evaluate(&[0.3, -1.2, 0.7, 0.4]).unwrap();
        assert!((direct - stacked).abs() < 1e-12);
    }

    #[test]
    fn mul_x_raises_x_degree_only() {
        let b = Form::quadratic_power(2, 2).hessian_biform().unwrap();
        let m = b.mul_x(&Form::quadratic_power(2, 1)).unwrap();
        assert_eq!((m.deg_x(), m.deg_y()), (4, 2));
        let x = [0.5, 2.0];
        let y = [-1.0, 0.25];
        let expect = b.eval(&x, &y) * (0.25 + 4.0);
        assert!((m.eval(&x, &y) - expect).abs() < 1e-12);
    }
}
