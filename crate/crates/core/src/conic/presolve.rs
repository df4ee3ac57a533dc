//! Drops linearly dependent equality rows and detects inconsistent ones.
//!
//! Rows are grouped into connected components through shared variables and
//! each component is orthogonalized row by row (modified Gram-Schmidt,
//! applied twice). A row whose remainder falls below the threshold relative
//! to its own norm is dependent; its transformed right-hand side must then
//! vanish as well.

use std::collections::HashMap;

use nalgebra::DVector;

use super::{ConicProblem, Var};

pub(crate) struct Presolved {
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    /// First row found to contradict earlier rows.
    pub inconsistent: Option<usize>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub(crate) fn var_index(p: &ConicProblem) -> impl Fn(&Var) -> usize + '_ {
    let mut offsets = Vec::with_capacity(p.psd_blocks.len());
    let mut acc = 0;
    for &n in &p.psd_blocks {
        offsets.push(acc);
        acc += n * n;
    }
    let nn = acc;
    move |v: &Var| match *v {
        Var::Psd { block, i, j } => offsets[block] + i * p.psd_blocks[block] + j,
        Var::Nonneg(l) => nn + l,
        Var::Free(l) => nn + p.nonneg_count + l,
    }
}

pub(crate) fn presolve(p: &ConicProblem, threshold: f64) -> Presolved {
    let index = var_index(p);
    let total = p.psd_blocks.iter().map(|n| n * n).sum::<usize>() + p.nonneg_count + p.free_count;
    let mut uf = UnionFind((0..total).collect());
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(p.equalities.len());
    for eq in &p.equalities {
        let mut merged: HashMap<usize, f64> = HashMap::new();
        for (v, c) in &eq.terms {
            *merged.entry(index(v)).or_insert(0.0) += *c;
        }
        let mut r: Vec<(usize, f64)> = merged.into_iter().filter(|(_, c)| *c != 0.0).collect();
        r.sort_by_key(|(k, _)| *k);
        for w in r.windows(2) {
            uf.union(w[0].0, w[1].0);
        }
        rows.push(r);
    }

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut inconsistent = None;
    let mut components: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut order = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        if row.is_empty() {
            dropped.push(r);
            if p.equalities[r].rhs.abs() > threshold && inconsistent.is_none() {
                inconsistent = Some(r);
            }
            continue;
        }
        let root = uf.find(row[0].0);
        components.entry(root).or_insert_with(|| {
            order.push(root);
            Vec::new()
        });
        components.get_mut(&root).unwrap().push(r);
    }

    for root in order {
        let members = &components[&root];
        let mut cols: HashMap<usize, usize> = HashMap::new();
        for &r in members {
            for (k, _) in &rows[r] {
                let next = cols.len();
                cols.entry(*k).or_insert(next);
            }
        }
        let width = cols.len();
        let mut basis: Vec<(DVector<f64>, f64)> = Vec::new();
        for &r in members {
            let mut v = DVector::zeros(width);
            for (k, c) in &rows[r] {
                v[cols[k]] = *c;
            }
            let mut rhs = p.equalities[r].rhs;
            let norm0 = v.norm();
            for _ in 0..2 {
                for (q, rq) in &basis {
                    let c = q.dot(&v);
                    v.axpy(-c, q, 1.0);
                    rhs -= c * rq;
                }
            }
            let norm = v.norm();
            if norm > threshold * norm0 {
                basis.push((v / norm, rhs / norm));
                kept.push(r);
            } else {
                dropped.push(r);
                let scale = 1.0 + p.equalities[r].rhs.abs();
                if rhs.abs() > 1e-8 * scale * norm0.max(1.0) && inconsistent.is_none() {
                    inconsistent = Some(r);
                }
            }
        }
    }
    kept.sort_unstable();
    dropped.sort_unstable();
    Presolved {
        kept,
        dropped,
        inconsistent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_duplicate_and_flags_contradiction() {
        let mut p = ConicProblem::new();
        let a = p.add_nonneg();
        let b = p.add_nonneg();
        let c = p.add_free();
        p.add_equality(vec![(a, 1.0), (b, 1.0)], 2.0);
        p.add_equality(vec![(c, 1.0)], 0.5);
        p.add_equality(vec![(a, 2.0), (b, 2.0)], 4.0);
        let pre = presolve(&p, 1e-10);
        assert_eq!(pre.kept, vec![0, 1]);
        assert_eq!(pre.dropped, vec![2]);
        assert!(pre.inconsistent.is_none());

        p.add_equality(vec![(a, -1.0), (b, -1.0)], 1.0);
        let pre = presolve(&p, 1e-10);
        assert_eq!(pre.inconsistent, Some(3));
    }

    #[test]
    fn empty_row_with_nonzero_rhs_is_inconsistent() {
        let mut p = ConicProblem::new();
        p.add_psd_block(2);
        p.add_equality(vec![], 1.0);
        assert_eq!(presolve(&p, 1e-10).inconsistent, Some(0));
    }
}
