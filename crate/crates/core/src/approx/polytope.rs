//! Origin-symmetric polytopes: polar duals, face lattices by brute force,
//! centroid-fan triangulation and Grundmann–Möller simplex quadrature.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const FACE_TOL: f64 = 1e-9;

fn rank(points: &[&[f64]]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let n = points[0].len();
    let m = DMatrix::from_fn(points.len() - 1, n, |i, j| points[i + 1][j] - points[0][j]);
    m.svd(false, false)
        .singular_values
        .iter()
        .filter(|s| **s > 1e-9)
        .count()
}

fn check_vertices(vertices: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = vertices.first() else {
        return Err(Error::DegeneratePolytope("no vertices".into()));
    };
    let n = first.len();
    if n == 0 || vertices.iter().any(|v| v.len() != n || v.iter().any(|x| !x.is_finite())) {
        return Err(Error::DegeneratePolytope(
            "vertices must share one positive dimension and be finite".into(),
        ));
    }
    let refs: Vec<&[f64]> = vertices.iter().map(|v| v.as_slice()).collect();
    if rank(&refs) < n {
        return Err(Error::DegeneratePolytope(format!(
            "vertices do not span {n} dimensions"
        )));
    }
    Ok(n)
}

/// Facet normals `a` with `⟨a, x⟩ ≤ 1` on the polytope, from every
/// `n`-subset of points whose hyperplane leaves all points on one side.
fn facet_normals(points: &[Vec<f64>], n: usize) -> Result<Vec<Vec<f64>>> {
    let m = points.len();
    let mut normals: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    if m < n {
        return Err(Error::DegeneratePolytope("too few vertices".into()));
    }
    loop {
        let a = DMatrix::from_fn(n, n, |i, j| points[idx[i]][j]);
        if let Some(sol) = a.clone().lu().solve(&DVector::from_element(n, 1.0)) {
            let residual = (&a * &sol).add_scalar(-1.0).amax();
            if residual < 1e-9 && sol.iter().all(|x| x.is_finite()) {
                let ok = points.iter().all(|p| {
                    p.iter().zip(sol.iter()).map(|(x, y)| x * y).sum::<f64>() <= 1.0 + FACE_TOL
                });
                let normal: Vec<f64> = sol.iter().copied().collect();
                if ok
                    && !normals.iter().any(|q| {
                        q.iter().zip(&normal).all(|(x, y)| (x - y).abs() <= 1e-9)
                    })
                {
                    normals.push(normal);
                }
            }
        }
        // Next n-subset in lexicographic order.
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(normals);
            }
            k -= 1;
            if idx[k] < m - n + k {
                idx[k] += 1;
                for j in k + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Vertices of the polar `{y : ⟨x, y⟩ ≤ 1 ∀x ∈ B}` of the polytope with the
/// given vertices. The origin must be interior.
pub fn polar_polytope(vertices: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = check_vertices(vertices)?;
    let centroid: Vec<f64> = (0..n)
        .map(|j| vertices.iter().map(|v| v[j]).sum::<f64>() / vertices.len() as f64)
        .collect();
    let normals = facet_normals(vertices, n)?;
    // The origin is interior iff the facet normals span and every facet
    // stays off the origin, which holds when their hull has full rank and
    // the centroid lies strictly inside.
    let refs: Vec<&[f64]> = normals.iter().map(|v| v.as_slice()).collect();
    if normals.len() <= n || rank(&refs) < n {
        return Err(Error::DegeneratePolytope(
            "origin is not interior to the polytope".into(),
        ));
    }
    let inside = normals.iter().all(|a| {
        a.iter().zip(&centroid).map(|(x, y)| x * y).sum::<f64>() < 1.0 - FACE_TOL
    });
    if !inside {
        return Err(Error::DegeneratePolytope("polytope is not centred".into()));
    }
    Ok(normals)
}

/// Whether `v` is (within 1e-9) closed under negation.
pub fn is_symmetric(vertices: &[Vec<f64>]) -> bool {
    vertices.iter().all(|v| {
        vertices
            .iter()
            .any(|w| v.iter().zip(w).all(|(a, b)| (a + b).abs() <= 1e-9))
    })
}

/// Simplices (as vertex lists) of a centroid-fan triangulation of the
/// polytope with vertices `verts` and facet normals `normals`.
pub(crate) fn triangulate(verts: &[Vec<f64>], normals: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
    let n = verts[0].len();
    let facets: Vec<BTreeSet<usize>> = normals
        .iter()
        .map(|a| {
            (0..verts.len())
                .filter(|&i| {
                    (verts[i].iter().zip(a).map(|(x, y)| x * y).sum::<f64>() - 1.0).abs()
                        <= FACE_TOL
                })
                .collect()
        })
        .collect();
    let all: BTreeSet<usize> = (0..verts.len()).collect();
    let mut out = Vec::new();
    fan(verts, &facets, &all, n, &mut Vec::new(), &mut out);
    out
}

fn centroid_of(verts: &[Vec<f64>], face: &BTreeSet<usize>) -> Vec<f64> {
    let n = verts[0].len();
    (0..n)
        .map(|j| face.iter().map(|&i| verts[i][j]).sum::<f64>() / face.len() as f64)
        .collect()
}

fn face_dim(verts: &[Vec<f64>], face: &BTreeSet<usize>) -> usize {
    let refs: Vec<&[f64]> = face.iter().map(|&i| verts[i].as_slice()).collect();
    rank(&refs)
}

fn fan(
    verts: &[Vec<f64>],
    facets: &[BTreeSet<usize>],
    face: &BTreeSet<usize>,
    dim: usize,
    apexes: &mut Vec<Vec<f64>>,
    out: &mut Vec<Vec<Vec<f64>>>,
) {
    if dim == 0 {
        let mut simplex = apexes.clone();
        simplex.push(verts[*face.iter().next().expect("nonempty face")].clone());
        out.push(simplex);
        return;
    }
    apexes.push(centroid_of(verts, face));
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    for f in facets {
        let sub: BTreeSet<usize> = face.intersection(f).copied().collect();
        if sub.len() == face.len() || sub.is_empty() {
            continue;
        }
        if face_dim(verts, &sub) != dim - 1 {
            continue;
        }
        if seen.insert(sub.iter().copied().collect()) {
            fan(verts, facets, &sub, dim - 1, apexes, out);
        }
    }
    apexes.pop();
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Compositions of `total` into `parts` nonnegative parts.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Grundmann–Möller rule on the standard `n`-simplex, exact to degree
/// `2s + 1`: barycentric points and weights summing to 1.
pub fn grundmann_moller(n: usize, s: usize) -> Vec<(Vec<f64>, f64)> {
    let d = (2 * s + 1) as i32;
    let mut rule = Vec::new();
    for i in 0..=s {
        let denom = (d as usize + n - 2 * i) as f64;
        let w = (-1f64).powi(i as i32) * 2f64.powi(-2 * s as i32) * denom.powi(d)
            / (factorial(i) * factorial(d as usize + n - i));
        for beta in compositions(s - i, n + 1) {
            let bary: Vec<f64> = beta.iter().map(|&b| (2 * b + 1) as f64 / denom).collect();
            rule.push((bary, w));
        }
    }
    let total: f64 = rule.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut rule {
        *w /= total;
    }
    rule
}

pub(crate) fn simplex_volume(simplex: &[Vec<f64>]) -> f64 {
    let n = simplex.len() - 1;
    let m = DMatrix::from_fn(n, n, |i, j| simplex[i + 1][j] - simplex[0][j]);
    m.determinant().abs() / factorial(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        for p in &mut v {
            for x in p.iter_mut() {
                if x.abs() < 1e-12 {
                    *x = 0.0;
                }
            }
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let d = |p: &Vec<f64>, q: &Vec<f64>| {
            p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        };
        let one = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            a.iter()
                .map(|p| b.iter().map(|q| d(p, q)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        one(a, b).max(one(b, a))
    }

    #[test]
    fn cross_polytope_and_cube_are_dual() {
        let cross = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let cube = polar_polytope(&cross).unwrap();
        assert_eq!(
            sorted(cube.clone()),
            vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]]
        );
        assert!(hausdorff(&polar_polytope(&cube).unwrap(), &cross) < 1e-12);
    }

    #[test]
    fn polar_is_an_involution_on_a_hexagon() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut verts = Vec::new();
        for k in 0..3 {
            let th = k as f64 * std::f64::consts::PI / 3.0 + rng.random_range(-0.1..0.1);
            let r = rng.random_range(0.95..1.05);
            verts.push(vec![r * th.cos(), r * th.sin()]);
            verts.push(vec![-r * th.cos(), -r * th.sin()]);
        }
        let back = polar_polytope(&polar_polytope(&verts).unwrap()).unwrap();
        assert!(hausdorff(&back, &verts) < 1e-9);
        assert!(is_symmetric(&back));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(polar_polytope(&[]).is_err());
        assert!(polar_polytope(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).is_err());
        let off = vec![vec![1.0, 1.0], vec![2.0, 1.0], vec![1.0, 2.0]];
        assert!(polar_polytope(&off).is_err());
    }

    #[test]
    fn fan_covers_the_volume() {
        let octa = vec![
            vec![1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, -1.0],
        ];
        let cube = polar_polytope(&octa).unwrap();
        assert_eq!(cube.len(), 8);
        let simplices = triangulate(&cube, &octa);
        let vol: f64 = simplices.iter().map(|s| simplex_volume(s)).sum();
        assert!((vol - 8.0).abs() < 1e-12);
        let vol: f64 = triangulate(&octa, &cube).iter().map(|s| simplex_volume(s)).sum();
        assert!((vol - 4.0 / 3.0).abs() < 1e-12);
    }

    /// ∫_T λ^a = |T| n! a! / (n + |a|)! on any simplex.
    fn dirichlet(a: &[usize], n: usize) -> f64 {
        let num: f64 = a.iter().map(|&k| factorial(k)).product();
        factorial(n) * num / factorial(n + a.iter().sum::<usize>())
    }

    #[test]
    fn quadrature_is_exact_on_barycentric_monomials() {
        for n in 1..=3 {
            for s in 0..=4 {
                let rule = grundmann_moller(n, s);
                for deg in 0..=2 * s + 1 {
                    for a in compositions(deg, n + 1) {
                        let q: f64 = rule
                            .iter()
                            .map(|(p, w)| w * p.iter().zip(&a).map(|(x, &k)| x.powi(k as i32)).product::<f64>())
                            .sum();
                        let exact = dirichlet(&a, n);
                        assert!(
                            (q - exact).abs() <= 1e-12 * exact.max(1e-3),
                            "n={n} s={s} a={a:?}: {q} vs {exact}"
                        );
                    }
                }
            }
        }
    }
}
