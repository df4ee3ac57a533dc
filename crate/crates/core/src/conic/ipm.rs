//! Primal-dual interior-point method with Nesterov-Todd scaling.
//!
//! Standard form: minimize `<C, X> + c'x + f'u` subject to
//! `A(X) + a x + B u = b`, `X ⪰ 0`, `x ≥ 0`, `u` free. The Newton system is
//! reduced to the Schur complement `M Δy + B Δu = h`, `Bᵀ Δy = r_u`, solved
//! by a Cholesky factorization of `M` followed by the small `Bᵀ M⁻¹ B`
//! system in the free variables.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::presolve::presolve;
use super::{ConicProblem, ConicSolution, IterationLog, SolverOptions, Status, Var};
use crate::error::Result;
use crate::tolerances;

type Entries = Vec<(usize, usize, f64)>;

pub(crate) struct StdProblem {
    blocks: Vec<usize>,
    n_nonneg: usize,
    n_free: usize,
    m: usize,
    /// Per block, the rows touching it with their `(p, q, a)` entries, `p <= q`.
    brows: Vec<Vec<(usize, Entries)>>,
    /// Per nonnegative variable, its `(row, a)` column.
    ncols: Vec<Vec<(usize, f64)>>,
    bfree: DMatrix<f64>,
    b: DVector<f64>,
    cblk: Vec<DMatrix<f64>>,
    cnn: DVector<f64>,
    cfree: DVector<f64>,
}

impl StdProblem {
    pub(crate) fn build(p: &ConicProblem, rows: &[usize]) -> StdProblem {
        let nb = p.psd_blocks.len();
        let m = rows.len();
        let mut per_block: Vec<Vec<Entries>> = vec![vec![Vec::new(); m]; nb];
        let mut ncols = vec![Vec::new(); p.nonneg_count];
        let mut bfree = DMatrix::zeros(m, p.free_count);
        let mut b = DVector::zeros(m);
        let canon = p.canonical();
        for (r, &orig) in rows.iter().enumerate() {
            let eq = &canon.equalities[orig];
            b[r] = eq.rhs;
            for (v, c) in &eq.terms {
                match *v {
                    Var::Psd { block, i, j } => per_block[block][r].push((i, j, *c)),
                    Var::Nonneg(l) => ncols[l].push((r, *c)),
                    Var::Free(l) => bfree[(r, l)] += *c,
                }
            }
        }
        let brows = per_block
            .into_iter()
            .map(|rs| {
                rs.into_iter()
                    .enumerate()
                    .filter(|(_, e)| !e.is_empty())
                    .collect()
            })
            .collect();
        let mut cblk: Vec<DMatrix<f64>> =
            p.psd_blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        let mut cnn = DVector::zeros(p.nonneg_count);
        let mut cfree = DVector::zeros(p.free_count);
        for (v, c) in &canon.objective {
            match *v {
                Var::Psd { block, i, j } => {
                    if i == j {
                        cblk[block][(i, i)] += c;
                    } else {
                        cblk[block][(i, j)] += c / 2.0;
                        cblk[block][(j, i)] += c / 2.0;
                    }
                }
                Var::Nonneg(l) => cnn[l] += c,
                Var::Free(l) => cfree[l] += c,
            }
        }
        StdProblem {
            blocks: p.psd_blocks.clone(),
            n_nonneg: p.nonneg_count,
            n_free: p.free_count,
            m,
            brows,
            ncols,
            bfree,
            b,
            cblk,
            cnn,
            cfree,
        }
    }

    fn nu(&self) -> usize {
        self.blocks.iter().sum::<usize>() + self.n_nonneg
    }

    fn a_apply(&self, x: &[DMatrix<f64>], xn: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.bfree * u;
        for (k, rows) in self.brows.iter().enumerate() {
            for (r, entries) in rows {
                out[*r] += entries.iter().map(|&(p, q, a)| a * x[k][(p, q)]).sum::<f64>();
            }
        }
        for (l, col) in self.ncols.iter().enumerate() {
            for &(r, a) in col {
                out[r] += a * xn[l];
            }
        }
        out
    }

    fn adjoint_blocks(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.blocks
            .iter()
            .zip(&self.brows)
            .map(|(&n, rows)| {
                let mut s = DMatrix::zeros(n, n);
                for (r, entries) in rows {
                    for &(p, q, a) in entries {
                        if p == q {
                            s[(p, p)] += a * y[*r];
                        } else {
                            s[(p, q)] += 0.5 * a * y[*r];
                            s[(q, p)] += 0.5 * a * y[*r];
                        }
                    }
                }
                s
            })
            .collect()
    }

    fn adjoint_nonneg(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n_nonneg,
            self.ncols
                .iter()
                .map(|col| col.iter().map(|&(r, a)| a * y[r]).sum::<f64>()),
        )
    }

    fn c_norm(&self) -> f64 {
        (self.cblk.iter().map(|c| c.norm_squared()).sum::<f64>()
            + self.cnn.norm_squared()
            + self.cfree.norm_squared())
        .sqrt()
    }

    /// Schur matrix `A(W A*(·) W) + a diag(w) aᵀ`.
    fn schur(&self, scalings: &[Scaling], wn: &DVector<f64>) -> DMatrix<f64> {
        let m = self.m;
        let mut big = DMatrix::zeros(m, m);
        for (k, rows) in self.brows.iter().enumerate() {
            let w = &scalings[k].w;
            let contrib: Vec<Vec<(usize, f64)>> = rows
                .par_iter()
                .enumerate()
                .map(|(ii, (_, ei))| {
                    rows[ii..]
                        .iter()
                        .map(|(rj, ej)| {
                            let mut s = 0.0;
                            for &(p, q, a) in ei {
                                for &(r, t, c) in ej {
                                    s += a
                                        * c
                                        * (w[(p, r)] * w[(q, t)] + w[(p, t)] * w[(q, r)]);
                                }
                            }
                            (*rj, 0.5 * s)
                        })
                        .collect()
                })
                .collect();
            for ((ri, _), row) in rows.iter().zip(contrib) {
                for (rj, v) in row {
                    big[(*ri, rj)] += v;
                    if *ri != rj {
                        big[(rj, *ri)] += v;
                    }
                }
            }
        }
        for (l, col) in self.ncols.iter().enumerate() {
            for &(ri, a) in col {
                for &(rj, c) in col {
                    big[(ri, rj)] += a * c * wn[l];
                }
            }
        }
        big
    }
}

#[derive(Clone, Debug)]
pub(crate) struct State {
    pub x: Vec<DMatrix<f64>>,
    pub xn: DVector<f64>,
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    pub z: Vec<DMatrix<f64>>,
    pub zn: DVector<f64>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Metrics {
    pub pobj: f64,
    pub dobj: f64,
    pub pinf: f64,
    pub dinf: f64,
    pub gap: f64,
    pub mu: f64,
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rdn: DVector<f64>,
    ru: DVector<f64>,
    metrics: Metrics,
}

struct Scaling {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    w: DMatrix<f64>,
    lam: DVector<f64>,
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let l = x.clone().cholesky()?.l();
    let r = z.clone().cholesky()?.l();
    let n = x.nrows();
    let k = l.transpose() * r;
    let svd = k.svd(true, false);
    let u = svd.u?;
    let lam = svd.singular_values;
    if lam.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return None;
    }
    let inv_sqrt = DMatrix::from_diagonal(&lam.map(|s| 1.0 / s.sqrt()));
    let sqrt = DMatrix::from_diagonal(&lam.map(f64::sqrt));
    let g = &l * &u * inv_sqrt;
    let linv = l.solve_lower_triangular(&DMatrix::identity(n, n))?;
    let ginv = sqrt * u.transpose() * linv;
    let mut w = &g * g.transpose();
    symmetrize(&mut w);
    Some(Scaling { g, ginv, w, lam })
}

/// Largest step keeping `Λ + α S` PSD, for `S` given in scaled coordinates.
fn max_step_scaled(lam: &DVector<f64>, ds: &DMatrix<f64>) -> f64 {
    let n = lam.len();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = ds[(i, j)] / (lam[i] * lam[j]).sqrt();
        }
    }
    symmetrize(&mut s);
    let min = s.symmetric_eigenvalues().min();
    if min < 0.0 {
        -1.0 / min
    } else {
        f64::INFINITY
    }
}

fn max_step_vec(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(a, d)| -a / d)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dxn: DVector<f64>,
    du: DVector<f64>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
    dzn: DVector<f64>,
}

/// Factored Newton system for the current scaling.
struct Newton {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    minv_b: DMatrix<f64>,
    schur_free: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl Newton {
    fn factor(sp: &StdProblem, scalings: &[Scaling], wn: &DVector<f64>) -> Option<Newton> {
        let mut m = sp.schur(scalings, wn);
        symmetrize(&mut m);
        let maxdiag = m.diagonal().iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
        let mut chol = m.clone().cholesky();
        let mut reg = 1e-14 * maxdiag;
        while chol.is_none() && reg < 1e-6 * maxdiag {
            let mut mr = m.clone();
            for i in 0..mr.nrows() {
                mr[(i, i)] += reg;
            }
            chol = mr.cholesky();
            reg *= 100.0;
        }
        let chol = chol?;
        let (minv_b, schur_free) = if sp.n_free > 0 {
            let minv_b = chol.solve(&sp.bfree);
            let s = sp.bfree.transpose() * &minv_b;
            let lu = s.lu();
            if !lu.is_invertible() {
                return None;
            }
            (minv_b, Some(lu))
        } else {
            (DMatrix::zeros(sp.m, 0), None)
        };
        Some(Newton {
            chol,
            minv_b,
            schur_free,
        })
    }

    fn solve(&self, sp: &StdProblem, h: &DVector<f64>, ru: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let minv_h = self.chol.solve(h);
        match &self.schur_free {
            Some(lu) => {
                let rhs = sp.bfree.transpose() * &minv_h - ru;
                let du = lu.solve(&rhs).unwrap_or_else(|| DVector::zeros(sp.n_free));
                let dy = minv_h - &self.minv_b * &du;
                (dy, du)
            }
            None => (minv_h, DVector::zeros(0)),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn direction(
    sp: &StdProblem,
    newton: &Newton,
    sc: &[Scaling],
    wn: &DVector<f64>,
    res: &Residuals,
    rc: &[DMatrix<f64>],
    rcn: &DVector<f64>,
) -> Direction {
    let t: Vec<DMatrix<f64>> = sc
        .iter()
        .zip(rc.iter().zip(&res.rd))
        .map(|(s, (rck, rdk))| rck - &s.w * rdk * &s.w)
        .collect();
    let tn = rcn - wn.component_mul(&res.rdn);
    let h = &res.rp - sp.a_apply(&t, &tn, &DVector::zeros(sp.n_free));
    let (dy, du) = newton.solve(sp, &h, &res.ru);
    let aty = sp.adjoint_blocks(&dy);
    let dz: Vec<DMatrix<f64>> = res.rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
    let dzn = &res.rdn - sp.adjoint_nonneg(&dy);
    let dx = sc
        .iter()
        .zip(rc.iter().zip(&dz))
        .map(|(s, (rck, dzk))| {
            let mut d = rck - &s.w * dzk * &s.w;
            symmetrize(&mut d);
            d
        })
        .collect();
    let dxn = rcn - wn.component_mul(&dzn);
    Direction {
        dx,
        dxn,
        du,
        dy,
        dz,
        dzn,
    }
}

fn step_lengths(sc: &[Scaling], st: &State, d: &Direction) -> (f64, f64) {
    let mut ap = max_step_vec(&st.xn, &d.dxn);
    let mut ad = max_step_vec(&st.zn, &d.dzn);
    for (s, (dx, dz)) in sc.iter().zip(d.dx.iter().zip(&d.dz)) {
        let xt = &s.ginv * dx * s.ginv.transpose();
        let zt = s.g.transpose() * dz * &s.g;
        ap = ap.min(max_step_scaled(&s.lam, &xt));
        ad = ad.min(max_step_scaled(&s.lam, &zt));
    }
    (ap, ad)
}

/// Right-hand side `G D Gᵀ` of the linearized centering condition.
fn centering(s: &Scaling, sigma_mu: f64, second: Option<(&DMatrix<f64>, &DMatrix<f64>)>) -> DMatrix<f64> {
    let n = s.lam.len();
    let h = match second {
        Some((dx, dz)) => {
            let xt = &s.ginv * dx * s.ginv.transpose();
            let zt = s.g.transpose() * dz * &s.g;
            let p = xt * zt;
            &p + p.transpose()
        }
        None => DMatrix::zeros(n, n),
    };
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let diag = if i == j {
                2.0 * (sigma_mu - s.lam[i] * s.lam[i])
            } else {
                0.0
            };
            d[(i, j)] = (diag - h[(i, j)]) / (s.lam[i] + s.lam[j]);
        }
    }
    let mut out = &s.g * d * s.g.transpose();
    symmetrize(&mut out);
    out
}

fn residuals(sp: &StdProblem, st: &State, bnorm: f64, cnorm: f64) -> Residuals {
    let rp = &sp.b - sp.a_apply(&st.x, &st.xn, &st.u);
    let aty = sp.adjoint_blocks(&st.y);
    let rd: Vec<DMatrix<f64>> = sp
        .cblk
        .iter()
        .zip(aty.iter().zip(&st.z))
        .map(|(c, (a, z))| c - a - z)
        .collect();
    let rdn = &sp.cnn - sp.adjoint_nonneg(&st.y) - &st.zn;
    let ru = &sp.cfree - sp.bfree.transpose() * &st.y;
    let pobj = sp.cblk.iter().zip(&st.x).map(|(c, x)| c.dot(x)).sum::<f64>()
        + sp.cnn.dot(&st.xn)
        + sp.cfree.dot(&st.u);
    let dobj = sp.b.dot(&st.y);
    let nu = sp.nu().max(1) as f64;
    let mu = (st.x.iter().zip(&st.z).map(|(x, z)| x.dot(z)).sum::<f64>() + st.xn.dot(&st.zn)) / nu;
    let dres = (rd.iter().map(|r| r.norm_squared()).sum::<f64>()
        + rdn.norm_squared()
        + ru.norm_squared())
    .sqrt();
    let metrics = Metrics {
        pobj,
        dobj,
        pinf: rp.norm() / (1.0 + bnorm),
        dinf: dres / (1.0 + cnorm),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        mu,
    };
    Residuals {
        rp,
        rd,
        rdn,
        ru,
        metrics,
    }
}

fn initial_point(sp: &StdProblem) -> State {
    let mut row_norm_sq = vec![vec![0.0; sp.m]; sp.blocks.len()];
    for (k, rows) in sp.brows.iter().enumerate() {
        for (r, entries) in rows {
            row_norm_sq[k][*r] = entries
                .iter()
                .map(|&(p, q, a)| if p == q { a * a } else { 0.5 * a * a })
                .sum();
        }
    }
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (k, &n) in sp.blocks.iter().enumerate() {
        let nf = n as f64;
        let mut xi = 10.0f64.max(nf.sqrt());
        let mut eta = 10.0f64.max(nf.sqrt());
        for (r, _) in &sp.brows[k] {
            let an = row_norm_sq[k][*r].sqrt();
            xi = xi.max(nf * (1.0 + sp.b[*r].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        eta = eta.max(sp.cblk[k].norm());
        x.push(DMatrix::identity(n, n) * xi);
        z.push(DMatrix::identity(n, n) * eta);
    }
    let p = sp.n_nonneg as f64;
    let mut xi = 10.0f64.max(p.sqrt());
    let mut eta = 10.0f64.max(p.sqrt());
    let mut nn_row = vec![0.0; sp.m];
    for col in &sp.ncols {
        for &(r, a) in col {
            nn_row[r] += a * a;
        }
    }
    for (r, s) in nn_row.iter().enumerate() {
        if *s > 0.0 {
            xi = xi.max((1.0 + sp.b[r].abs()) / (1.0 + s.sqrt()));
            eta = eta.max(s.sqrt());
        }
    }
    eta = eta.max(sp.cnn.norm());
    State {
        x,
        xn: DVector::from_element(sp.n_nonneg, xi),
        u: DVector::zeros(sp.n_free),
        y: DVector::zeros(sp.m),
        z,
        zn: DVector::from_element(sp.n_nonneg, eta),
    }
}

pub(crate) struct RunResult {
    pub status: Status,
    pub state: State,
    pub metrics: Metrics,
    pub iterations: usize,
    pub log: Vec<IterationLog>,
    pub diagnostics: Vec<String>,
}

/// Early-termination hook; returns a status and a diagnostic to stop.
pub(crate) type Monitor<'a> = dyn FnMut(&State, &Metrics) -> Option<(Status, String)> + 'a;

/// Iterates worse than the stopping tolerance by at most this factor are
/// kept as a fallback when later iterations break down.
const RELAXED: f64 = 100.0;

pub(crate) fn run(sp: &StdProblem, opts: &SolverOptions, monitor: &mut Monitor<'_>) -> RunResult {
    let mut best: Option<(f64, State, Metrics, usize)> = None;
    let mut out = iterate(sp, opts, monitor, &mut best);
    let recoverable = matches!(out.status, Status::Undecided | Status::IterLimit)
        && !out.diagnostics.iter().any(|d| d.contains("infeasible"));
    if let (true, Some((err, st, mt, iter))) = (recoverable, best) {
        if err <= RELAXED * opts.tol {
            out.diagnostics.push(format!(
                "accepted iterate {iter} at relaxed tolerance {err:.3e}"
            ));
            out.status = Status::Optimal;
            out.state = st;
            out.metrics = mt;
        }
    }
    out
}

fn iterate(
    sp: &StdProblem,
    opts: &SolverOptions,
    monitor: &mut Monitor<'_>,
    best: &mut Option<(f64, State, Metrics, usize)>,
) -> RunResult {
    let mut st = initial_point(sp);
    let bnorm = sp.b.norm();
    let cnorm = sp.c_norm();
    let mut log = Vec::new();
    let mut stalls = 0;
    let mut last = (0.0, 0.0);
    let finish = |status, st: State, metrics, iterations, log, diag: Option<String>| RunResult {
        status,
        state: st,
        metrics,
        iterations,
        log,
        diagnostics: diag.into_iter().collect(),
    };
    for iter in 0..=opts.max_iters {
        let res = residuals(sp, &st, bnorm, cnorm);
        let mt = res.metrics.clone();
        log.push(IterationLog {
            iter,
            mu: mt.mu,
            primal_res: mt.pinf,
            dual_res: mt.dinf,
            gap: mt.gap,
            step_primal: last.0,
            step_dual: last.1,
        });
        if mt.pinf <= opts.tol && mt.dinf <= opts.tol && mt.gap <= opts.tol {
            return finish(Status::Optimal, st, mt, iter, log, None);
        }
        let err = mt.pinf.max(mt.dinf).max(mt.gap);
        if err <= RELAXED * opts.tol && best.as_ref().is_none_or(|b| err < b.0) {
            *best = Some((err, st.clone(), mt.clone(), iter));
        }
        if let Some((status, msg)) = monitor(&st, &mt) {
            return finish(status, st, mt, iter, log, Some(msg));
        }
        if iter == opts.max_iters {
            return finish(
                Status::IterLimit,
                st,
                mt,
                iter,
                log,
                Some(format!("iteration limit {} reached", opts.max_iters)),
            );
        }
        if iter >= 2 {
            // Farkas ray for the primal: A*y ⪯ 0 direction with bᵀy > 0.
            let by = mt.dobj;
            if by > 0.0 {
                let aty = sp.adjoint_blocks(&st.y);
                let ray = (aty
                    .iter()
                    .zip(&st.z)
                    .map(|(a, z)| (a + z).norm_squared())
                    .sum::<f64>()
                    + (sp.adjoint_nonneg(&st.y) + &st.zn).norm_squared()
                    + (sp.bfree.transpose() * &st.y).norm_squared())
                .sqrt();
                if ray <= opts.infeasibility_tol * by {
                    return finish(
                        Status::Infeasible,
                        st,
                        mt,
                        iter,
                        log,
                        Some(format!("primal infeasible: dual ray with b'y = {by:.3e}")),
                    );
                }
            }
            if mt.pobj < 0.0 {
                let ax = (&sp.b - &res.rp).norm();
                if ax <= opts.infeasibility_tol * (-mt.pobj) {
                    return finish(
                        Status::Undecided,
                        st,
                        mt,
                        iter,
                        log,
                        Some("dual infeasible: primal objective unbounded below".into()),
                    );
                }
            }
        }

        let Some(sc) = st
            .x
            .iter()
            .zip(&st.z)
            .map(|(x, z)| nt_scaling(x, z))
            .collect::<Option<Vec<_>>>()
        else {
            return finish(
                Status::Undecided,
                st,
                mt,
                iter,
                log,
                Some("numerical breakdown: iterate left the cone interior".into()),
            );
        };
        let wn = st.xn.component_div(&st.zn);
        let Some(newton) = Newton::factor(sp, &sc, &wn) else {
            return finish(
                Status::Undecided,
                st,
                mt,
                iter,
                log,
                Some("numerical breakdown: Schur complement not positive definite".into()),
            );
        };

        let rc_aff: Vec<DMatrix<f64>> = sc.iter().map(|s| centering(s, 0.0, None)).collect();
        let rcn_aff = -&st.xn;
        let aff = direction(sp, &newton, &sc, &wn, &res, &rc_aff, &rcn_aff);
        let (ap_max, ad_max) = step_lengths(&sc, &st, &aff);
        let (ap, ad) = (ap_max.min(1.0), ad_max.min(1.0));
        let nu = sp.nu().max(1) as f64;
        let mu_aff = (st
            .x
            .iter()
            .zip(&aff.dx)
            .zip(st.z.iter().zip(&aff.dz))
            .map(|((x, dx), (z, dz))| (x + dx * ap).dot(&(z + dz * ad)))
            .sum::<f64>()
            + (&st.xn + &aff.dxn * ap).dot(&(&st.zn + &aff.dzn * ad)))
            / nu;
        let expon = (3.0 * ap.min(ad).powi(2)).max(1.0);
        let sigma = if mt.mu > 0.0 {
            (mu_aff.max(0.0) / mt.mu).powf(expon).min(1.0)
        } else {
            0.0
        };
        let smu = sigma * mt.mu;
        let rc: Vec<DMatrix<f64>> = sc
            .iter()
            .zip(aff.dx.iter().zip(&aff.dz))
            .map(|(s, (dx, dz))| centering(s, smu, Some((dx, dz))))
            .collect();
        let rcn = (DVector::from_element(sp.n_nonneg, smu)
            - st.xn.component_mul(&st.zn)
            - aff.dxn.component_mul(&aff.dzn))
        .component_div(&st.zn);
        let dir = direction(sp, &newton, &sc, &wn, &res, &rc, &rcn);
        let (ap_max, ad_max) = step_lengths(&sc, &st, &dir);
        let tau = 0.9 + 0.09 * ap.min(ad);
        let ap = (tau * ap_max).min(1.0);
        let ad = (tau * ad_max).min(1.0);
        last = (ap, ad);

        for (x, dx) in st.x.iter_mut().zip(&dir.dx) {
            *x += dx * ap;
            symmetrize(x);
        }
        st.xn += &dir.dxn * ap;
        st.u += &dir.du * ap;
        st.y += &dir.dy * ad;
        for (z, dz) in st.z.iter_mut().zip(&dir.dz) {
            *z += dz * ad;
            symmetrize(z);
        }
        st.zn += &dir.dzn * ad;

        if ap < 1e-8 && ad < 1e-8 {
            stalls += 1;
            if stalls >= 3 {
                let mt = residuals(sp, &st, bnorm, cnorm).metrics;
                return finish(
                    Status::Undecided,
                    st,
                    mt,
                    iter + 1,
                    log,
                    Some("stalled: step lengths below 1e-8".into()),
                );
            }
        } else {
            stalls = 0;
        }
    }
    unreachable!("loop returns at max_iters")
}

fn to_solution(p: &ConicProblem, rows: &[usize], run: &RunResult, margin: Option<f64>) -> ConicSolution {
    let mut dual = vec![0.0; p.equalities.len()];
    for (r, &orig) in rows.iter().enumerate() {
        dual[orig] = run.state.y[r];
    }
    ConicSolution {
        status: run.status,
        blocks: run.state.x.clone(),
        nonneg: run.state.xn.iter().copied().collect(),
        free: run.state.u.iter().copied().collect(),
        dual,
        dual_blocks: run.state.z.clone(),
        dual_nonneg: run.state.zn.iter().copied().collect(),
        margin,
        primal_objective: run.metrics.pobj,
        dual_objective: run.metrics.dobj,
        primal_residual: run.metrics.pinf,
        dual_residual: run.metrics.dinf,
        gap: run.metrics.gap,
        iterations: run.iterations,
        diagnostics: run.diagnostics.clone(),
        log: run.log.clone(),
    }
}

pub(crate) fn solve_optimization(p: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    let pre = presolve(p, tolerances::PRESOLVE_TOL);
    if let Some(r) = pre.inconsistent {
        let mut sol = ConicSolution::trivial(p, Status::Infeasible, None);
        sol.diagnostics.push(format!("equality row {r} is inconsistent with earlier rows"));
        return Ok(sol);
    }
    if p.psd_blocks.is_empty() && p.nonneg_count == 0 {
        let mut sol = ConicSolution::trivial(p, Status::Undecided, None);
        sol.diagnostics.push("problem has no conic variables".into());
        return Ok(sol);
    }
    let sp = StdProblem::build(p, &pre.kept);
    let result = run(&sp, opts, &mut |_, _| None);
    let mut sol = to_solution(p, &pre.kept, &result, None);
    if !pre.dropped.is_empty() {
        sol.diagnostics.push(format!("presolve removed {} dependent rows", pre.dropped.len()));
    }
    Ok(sol)
}

pub(crate) fn solve_margin(p: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    if p.equalities.is_empty() {
        return Ok(ConicSolution::trivial(p, Status::Optimal, Some(f64::INFINITY)));
    }
    let pre = presolve(p, tolerances::PRESOLVE_TOL);
    if let Some(r) = pre.inconsistent {
        let mut sol = ConicSolution::trivial(p, Status::Infeasible, Some(f64::NEG_INFINITY));
        sol.diagnostics.push(format!("equality row {r} is inconsistent with earlier rows"));
        return Ok(sol);
    }

    // X = Y + tI, x = y + t with t free and t <= cap.
    let mut mp = ConicProblem {
        psd_blocks: p.psd_blocks.clone(),
        nonneg_count: p.nonneg_count,
        free_count: p.free_count,
        equalities: Vec::with_capacity(pre.kept.len() + 1),
        objective: Vec::new(),
    };
    let t = mp.add_free();
    let s = mp.add_nonneg();
    let tidx = p.free_count;
    for &r in &pre.kept {
        let eq = &p.equalities[r];
        let shift: f64 = eq
            .terms
            .iter()
            .filter(|(v, _)| matches!(v, Var::Psd { i, j, .. } if i == j) || matches!(v, Var::Nonneg(_)))
            .map(|(_, c)| c)
            .sum();
        let mut terms = eq.terms.clone();
        if shift != 0.0 {
            terms.push((t, shift));
        }
        mp.add_equality(terms, eq.rhs);
    }
    mp.add_equality(vec![(t, 1.0), (s, 1.0)], opts.margin_cap);
    mp.objective.push((t, -1.0));

    let rows: Vec<usize> = (0..mp.equalities.len()).collect();
    let sp = StdProblem::build(&mp, &rows);
    let half_cap = 0.5 * opts.margin_cap;
    let tol = opts.tol;
    let inf_tol = opts.infeasibility_tol;
    let result = run(&sp, opts, &mut |st, mt| {
        if mt.pinf <= tol && st.u[tidx] >= half_cap {
            return Some((Status::Optimal, "margin reached half the cap".into()));
        }
        if mt.dinf <= tol && -mt.dobj <= -inf_tol {
            return Some((
                Status::Infeasible,
                format!("dual bound certifies margin <= {:.3e}", -mt.dobj),
            ));
        }
        None
    });

    let tval = result.state.u[tidx];
    let bound = -result.metrics.dobj;
    let primal_ok = result.metrics.pinf <= 10.0 * tol;
    let dual_ok = result.metrics.dinf <= 10.0 * tol;
    let mut diagnostics = result.diagnostics.clone();
    let margin = match result.status {
        Status::Optimal => tval,
        Status::Infeasible => bound,
        _ => {
            if primal_ok && tval >= -opts.eig_tol {
                diagnostics.push("feasible iterate accepted".into());
                tval
            } else if dual_ok && bound <= -inf_tol {
                diagnostics.push("dual bound accepted".into());
                bound
            } else {
                tval
            }
        }
    };
    let decided = matches!(result.status, Status::Optimal | Status::Infeasible)
        || (primal_ok && tval >= -opts.eig_tol)
        || (dual_ok && bound <= -inf_tol);
    let status = if !decided {
        result.status
    } else if margin >= -opts.eig_tol {
        Status::Optimal
    } else if margin <= -inf_tol {
        Status::Infeasible
    } else {
        diagnostics.push(format!("margin {margin:.3e} is inside the undecided band"));
        Status::Undecided
    };

    let mut sol = to_solution(&mp, &rows, &result, Some(margin));
    sol.status = status;
    sol.diagnostics = diagnostics;
    for x in sol.blocks.iter_mut() {
        for i in 0..x.nrows() {
            x[(i, i)] += tval;
        }
    }
    sol.nonneg.truncate(p.nonneg_count);
    for v in sol.nonneg.iter_mut() {
        *v += tval;
    }
    sol.dual_nonneg.truncate(p.nonneg_count);
    sol.free.truncate(p.free_count);
    let mut dual = vec![0.0; p.equalities.len()];
    for (k, &orig) in pre.kept.iter().enumerate() {
        dual[orig] = result.state.y[k];
    }
    sol.dual = dual;
    if !pre.dropped.is_empty() {
        sol.diagnostics.push(format!("presolve removed {} dependent rows", pre.dropped.len()));
    }
    Ok(sol)
}
