//! Hard instances: the clique quartic and the octic family with positive
//! definite Hessian that is not r-sos-convex.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::forms::Form;

/// The quartic in stacked `(x, y)` variables built from a graph on `n`
/// vertices and an integer `k`, together with its constant `γ`.
///
/// `b(x;y) = −2k Σ_{ij∈E} x_i x_j y_i y_j − (1−k)(Σx²)(Σy²)` plus
/// `n²γ/2 (Σx_i⁴ + Σy_i⁴ + Σ_{i<j} (x_i²x_j² + y_i²y_j²))`, where `γ` is
/// the largest absolute coefficient in the mixed partials `∂²b/∂x_i∂y_j`.
pub fn clique_quartic(n: usize, edges: &[(usize, usize)], k: u32) -> Result<(Form, f64)> {
    if n == 0 {
        return Err(Error::InvalidInput("graph has no vertices".into()));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut seen = BTreeSet::new();
    for &(i, j) in edges {
        if i >= n || j >= n {
            return Err(Error::InvalidInput(format!(
                "edge ({i}, {j}) leaves the vertex set 0..{n}"
            )));
        }
        if i == j {
            return Err(Error::InvalidInput(format!("self loop at vertex {i}")));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(Error::InvalidInput(format!("repeated edge ({i}, {j})")));
        }
    }
    let m = 2 * n;
    let kf = k as f64;
    let mut terms: Vec<(Vec<u32>, f64)> = Vec::new();
    for &(i, j) in &seen {
        let mut e = vec![0; m];
        e[i] += 1;
        e[j] += 1;
        e[n + i] += 1;
        e[n + j] += 1;
        terms.push((e, -2.0 * kf));
    }
    for i in 0..n {
        for j in 0..n {
            let mut e = vec![0; m];
            e[i] += 2;
            e[n + j] += 2;
            terms.push((e, -(1.0 - kf)));
        }
    }
    let b = Form::from_terms(m, 4, terms)?;

    let mut gamma = 0.0f64;
    for i in 0..n {
        let bx = b.partial(i)?;
        for j in 0..n {
            gamma = gamma.max(bx.partial(n + j)?.max_abs_coeff());
        }
    }

    let mut reg: Vec<(Vec<u32>, f64)> = Vec::new();
    for block in [0, n] {
        for i in 0..n {
            let mut e = vec![0; m];
            e[block + i] = 4;
            reg.push((e, 1.0));
            for j in i + 1..n {
                let mut e = vec![0; m];
                e[block + i] = 2;
                e[block + j] = 2;
                reg.push((e, 1.0));
            }
        }
    }
    let reg = Form::from_terms(m, 4, reg)?;
    let weight = (n * n) as f64 * gamma / 2.0;
    Ok((b.add_scaled(&reg, weight)?, gamma))
}

/// `g_s(x) = f(x1, s·x2, s·x3)` for the trivariate octic `f`; `g_1 = f`.
pub fn octic_counterexample(s: u32) -> Result<Form> {
    if s == 0 {
        return Err(Error::InvalidInput("s must be at least 1".into()));
    }
    let f: [([u32; 3], f64); 13] = [
        ([8, 0, 0], 32.0),
        ([6, 2, 0], 118.0),
        ([6, 0, 2], 40.0),
        ([4, 2, 2], 25.0),
        ([4, 0, 4], -35.0),
        ([2, 4, 2], 3.0),
        ([2, 2, 4], -16.0),
        ([2, 0, 6], 24.0),
        ([0, 8, 0], 16.0),
        ([0, 6, 2], 44.0),
        ([0, 4, 4], 70.0),
        ([0, 2, 6], 60.0),
        ([0, 0, 8], 30.0),
    ];
    let s = s as f64;
    Form::from_terms(
        3,
        8,
        f.iter()
            .map(|(e, c)| (e.to_vec(), c * s.powi((e[1] + e[2]) as i32))),
    )
}
