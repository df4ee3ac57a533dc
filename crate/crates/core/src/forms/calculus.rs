use nalgebra::DMatrix;

use super::{Biform, Form, MultiIndex, PolyMatrix};
use crate::error::{Error, Result};

impl Form {
    /// Partial derivative with respect to variable `i`. The result has
    /// degree `d - 1`; requires `d >= 1`.
    pub fn partial(&self, i: usize) -> Result<Form> {
        if self.degree == 0 {
            return Err(Error::InvalidDegree {
                degree: 0,
                reason: "cannot differentiate a degree-0 form",
            });
        }
        if i >= self.n_vars {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars,
                found: i + 1,
            });
        }
        let mut out = Form::zero(self.n_vars, self.degree - 1);
        for (a, c) in &self.terms {
            let e = a.0[i];
            if e == 0 {
                continue;
            }
            let mut b = a.0.clone();
            b[i] -= 1;
            out.add_term(MultiIndex(b), c * e as f64);
        }
        Ok(out)
    }

    pub fn gradient(&self) -> Result<Vec<Form>> {
        (0..self.n_vars).map(|i| self.partial(i)).collect()
    }

    /// Hessian as a symmetric matrix of degree `d - 2` forms.
    pub fn hessian(&self) -> Result<PolyMatrix> {
        if self.degree < 2 {
            return Err(Error::InvalidDegree {
                degree: self.degree,
                reason: "the Hessian needs degree at least 2",
            });
        }
        let n = self.n_vars;
        let grad = self.gradient()?;
        let mut entries = vec![Form::zero(n, self.degree - 2); n * n];
        for i in 0..n {
            for j in i..n {
                let h = grad[i].partial(j)?;
                entries[j * n + i] = h.clone();
                entries[i * n + j] = h;
            }
        }
        Ok(PolyMatrix::from_entries(n, entries))
    }

    /// The biform `y^T H_f(x) y` with `deg_x = d - 2` and `deg_y = 2`.
    pub fn hessian_biform(&self) -> Result<Biform> {
        let h = self.hessian()?;
        let n = self.n_vars;
        let mut out = Biform::zero(n, n, self.degree - 2, 2);
        for i in 0..n {
            for j in i..n {
                let weight = if i == j { 1.0 } else { 2.0 };
                let mut ey = vec![0u32; n];
                ey[i] += 1;
                ey[j] += 1;
                let ey = MultiIndex(ey);
                for (a, c) in h.get(i, j).terms() {
                    out.add_term(a.clone(), ey.clone(), weight * c);
                }
            }
        }
        Ok(out)
    }

    /// `x -> f(A x)`.
    pub fn compose_linear(&self, a: &DMatrix<f64>) -> Result<Form> {
        let n = self.n_vars;
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if a.nrows() != n { a.nrows() } else { a.ncols() },
            });
        }
        // Row i of A as a linear form, with its powers cached on demand.
        let linear: Vec<Form> = (0..n)
            .map(|i| {
                let mut l = Form::zero(n, 1);
                for j in 0..n {
                    if a[(i, j)] != 0.0 {
                        l.add_term(MultiIndex::unit(n, j), a[(i, j)]);
                    }
                }
                l
            })
            .collect();
        let mut powers: Vec<Vec<Form>> = linear
            .iter()
            .map(|_| vec![Form::constant(n, 1.0)])
            .collect();
        let mut out = Form::zero(n, self.degree);
        for (alpha, c) in &self.terms {
            let mut term = Form::constant(n, *c);
            for (i, &e) in alpha.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap().mul(&linear[i]);
                    powers[i].push(next);
                }
                term = term.mul(&powers[i][e as usize]);
            }
            for (b, cb) in term.terms {
                out.add_term(b, cb);
            }
        }
        if out.degree != self.degree {
            out.degree = self.degree;
        }
        Ok(out.pruned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic_sum() -> Form {
        Form::from_terms(2, 4, [(vec![4, 0], 1.0), (vec![0, 4], 1.0)]).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let g = Form::quadratic_power(2, 1).gradient().unwrap();
        assert_eq!(g[0].coeff_of(&[1, 0]), 2.0);
        assert_eq!(g[0].len(), 1);
        assert_eq!(g[1].coeff_of(&[0, 1]), 2.0);
        let g = quartic_sum().gradient().unwrap();
        assert_eq!(g[0].coeff_of(&[3, 0]), 4.0);
        assert_eq!(g[1].coeff_of(&[0, 3]), 4.0);
    }

    #[test]
    fn hessian_of_quartic_sum_is_singular_on_axis() {
        let h = quartic_sum().hessian().unwrap();
        let m = h.evaluate(&[1.0, 0.0]).unwrap();
        assert_eq!(m[(0, 0)], 12.0);
        assert_eq!(m[(1, 1)], 0.0);
        assert_eq!(m[(0, 1)], 0.0);
    }

    #[test]
    fn hessian_of_squared_norm_squared() {
        // (x1^2 + x2^2)^2 -> [[12x1^2+4x2^2, 8x1x2], [8x1x2, 4x1^2+12x2^2]]
        let h = Form::quadratic_power(2, 2).hessian().unwrap();
        assert_eq!(h.get(0, 0).coeff_of(&[2, 0]), 12.0);
        assert_eq!(h.get(0, 0).coeff_of(&[0, 2]), 4.0);
        assert_eq!(h.get(0, 1).coeff_of(&[1, 1]), 8.0);
        assert_eq!(h.get(1, 0).coeff_of(&[1, 1]), 8.0);
        assert_eq!(h.get(1, 1).coeff_of(&[2, 0]), 4.0);
        assert_eq!(h.get(1, 1).coeff_of(&[0, 2]), 12.0);
    }

    #[test]
    fn hessian_of_quadratic_is_twice_the_matrix() {
        // x^T Q x with Q = [[2, 0.5], [0.5, 3]]
        let f = Form::from_terms(2, 2, [(vec![2, 0], 2.0), (vec![1, 1], 1.0), (vec![0, 2], 3.0)])
            .unwrap();
        let m = f.hessian().unwrap().evaluate(&[0.3, -0.7]).unwrap();
        assert_eq!(m[(0, 0)], 4.0);
        assert_eq!(m[(0, 1)], 1.0);
        assert_eq!(m[(1, 1)], 6.0);
    }

    #[test]
    fn hessian_biform_examples() {
        let b = quartic_sum().hessian_biform().unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b.coeff(&[2, 0], &[2, 0]), 12.0);
        assert_eq!(b.coeff(&[0, 2], &[0, 2]), 12.0);

        // 4(x1^2+x2^2)(y1^2+y2^2) + 8(x1y1+x2y2)^2
        let b = Form::quadratic_power(2, 2).hessian_biform().unwrap();
        assert_eq!(b.coeff(&[2, 0], &[2, 0]), 12.0);
        assert_eq!(b.coeff(&[2, 0], &[0, 2]), 4.0);
        assert_eq!(b.coeff(&[0, 2], &[2, 0]), 4.0);
        assert_eq!(b.coeff(&[0, 2], &[0, 2]), 12.0);
        assert_eq!(b.coeff(&[1, 1], &[1, 1]), 16.0);
        assert_eq!(b.len(), 5);
        assert_eq!((b.deg_x(), b.deg_y()), (2, 2));
    }

    #[test]
    fn compose_examples() {
        let f = Form::quadratic_power(2, 1);
        let id = DMatrix::identity(2, 2);
        assert_eq!(f.compose_linear(&id).unwrap(), f);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(f.compose_linear(&swap).unwrap(), f);
        let x4 = Form::from_terms(2, 4, [(vec![4, 0], 1.0)]).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let g = x4.compose_linear(&a).unwrap();
        assert_eq!(g.coeff_of(&[4, 0]), 16.0);
        assert_eq!(g.len(), 1);
        assert!(f.compose_linear(&DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn degree_preconditions() {
        assert!(Form::constant(2, 1.0).gradient().is_err());
        assert!(Form::from_terms(2, 1, [(vec![1, 0], 1.0)]).unwrap().hessian().is_err());
    }
}
