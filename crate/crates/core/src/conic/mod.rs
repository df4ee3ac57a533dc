//! Small dense semidefinite programs.
//!
//! A [`ConicProblem`] has positive semidefinite matrix blocks, scalar
//! nonnegative variables and free scalars, coupled by sparse linear
//! equalities. Coefficients on a PSD variable `Var::Psd { i, j }` multiply
//! the matrix entry `X[i][j]` (which for `i != j` is the same entry as
//! `X[j][i]`; it is counted once).
//!
//! [`solve`] runs a primal-dual interior-point method with Nesterov-Todd
//! scaling and Mehrotra predictor-corrector steps. [`solve_feasibility`]
//! maximizes a uniform eigenvalue slack `t` (`X - tI ⪰ 0` on each block,
//! `x - t ≥ 0` on nonnegatives); the optimal slack is the *margin* whose
//! sign decides feasibility.

mod ipm;
mod presolve;
pub mod sdpa;

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tolerances;

pub use sdpa::{export_sdpa, import_sdpa, read_sdpa, write_sdpa};

/// A scalar decision variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// Entry `(i, j)` of PSD block `block`, stored with `i <= j`.
    Psd { block: usize, i: usize, j: usize },
    Nonneg(usize),
    Free(usize),
}

impl Var {
    pub fn psd(block: usize, i: usize, j: usize) -> Var {
        Var::Psd {
            block,
            i: i.min(j),
            j: i.max(j),
        }
    }
}

/// `Σ coeff · var = rhs`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Equality {
    pub terms: Vec<(Var, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicProblem {
    pub psd_blocks: Vec<usize>,
    pub nonneg_count: usize,
    pub free_count: usize,
    pub equalities: Vec<Equality>,
    /// Linear objective to minimize; empty for pure feasibility.
    pub objective: Vec<(Var, f64)>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_psd_block(&mut self, size: usize) -> usize {
        self.psd_blocks.push(size);
        self.psd_blocks.len() - 1
    }

    pub fn add_nonneg(&mut self) -> Var {
        self.nonneg_count += 1;
        Var::Nonneg(self.nonneg_count - 1)
    }

    pub fn add_free(&mut self) -> Var {
        self.free_count += 1;
        Var::Free(self.free_count - 1)
    }

    pub fn add_equality(&mut self, terms: Vec<(Var, f64)>, rhs: f64) {
        self.equalities.push(Equality { terms, rhs });
    }

    pub fn is_feasibility(&self) -> bool {
        self.objective.iter().all(|(_, c)| *c == 0.0)
    }

    /// Number of scalar unknowns (upper-triangular PSD entries count once).
    pub fn variable_count(&self) -> usize {
        self.psd_blocks.iter().map(|n| n * (n + 1) / 2).sum::<usize>()
            + self.nonneg_count
            + self.free_count
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.psd_blocks.iter().position(|&n| n == 0) {
            return Err(Error::InvalidInput(format!("PSD block {k} has size 0")));
        }
        let check = |v: &Var, c: f64| -> Result<()> {
            if !c.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite coefficient on {v:?}")));
            }
            let ok = match *v {
                Var::Psd { block, i, j } => {
                    block < self.psd_blocks.len() && i <= j && j < self.psd_blocks[block]
                }
                Var::Nonneg(l) => l < self.nonneg_count,
                Var::Free(l) => l < self.free_count,
            };
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("variable {v:?} out of range")))
            }
        };
        for (r, eq) in self.equalities.iter().enumerate() {
            if !eq.rhs.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite rhs in row {r}")));
            }
            for (v, c) in &eq.terms {
                check(v, *c)?;
            }
        }
        for (v, c) in &self.objective {
            check(v, *c)?;
        }
        Ok(())
    }

    /// Same problem with terms merged, sorted by variable and zeros removed.
    pub fn canonical(&self) -> ConicProblem {
        fn merge(terms: &[(Var, f64)]) -> Vec<(Var, f64)> {
            let mut map = std::collections::BTreeMap::new();
            for (v, c) in terms {
                *map.entry(*v).or_insert(0.0) += *c;
            }
            map.into_iter().filter(|(_, c)| *c != 0.0).collect()
        }
        ConicProblem {
            psd_blocks: self.psd_blocks.clone(),
            nonneg_count: self.nonneg_count,
            free_count: self.free_count,
            equalities: self
                .equalities
                .iter()
                .map(|e| Equality {
                    terms: merge(&e.terms),
                    rhs: e.rhs,
                })
                .collect(),
            objective: merge(&self.objective),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Optimal,
    Infeasible,
    Undecided,
    IterLimit,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Optimal => "OPTIMAL",
            Status::Infeasible => "INFEASIBLE",
            Status::Undecided => "UNDECIDED",
            Status::IterLimit => "ITER_LIMIT",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stopping tolerance on relative primal/dual residuals and gap.
    pub tol: f64,
    /// Ray threshold for infeasibility and the negative-margin cutoff.
    pub infeasibility_tol: f64,
    /// Margins at or above `-eig_tol` count as feasible.
    pub eig_tol: f64,
    /// Upper bound imposed on the feasibility margin.
    pub margin_cap: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 200,
            tol: tolerances::SOLVER_TOL,
            infeasibility_tol: tolerances::NOT_SOS_MARGIN,
            eig_tol: tolerances::EIG_TOL,
            margin_cap: 1.0,
        }
    }
}

/// One interior-point iteration.
#[derive(Clone, Debug, Serialize)]
pub struct IterationLog {
    pub iter: usize,
    pub mu: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub gap: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

impl fmt::Display for IterationLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>4} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>7.4} {:>7.4}",
            self.iter, self.mu, self.primal_res, self.dual_res, self.gap, self.step_primal,
            self.step_dual
        )
    }
}

impl IterationLog {
    pub const HEADER: &'static str =
        "iter          mu    pres        dres         gap      ap      ad";
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: Status,
    pub blocks: Vec<DMatrix<f64>>,
    pub nonneg: Vec<f64>,
    pub free: Vec<f64>,
    /// Equality multipliers, one per original row (zero for presolved rows).
    pub dual: Vec<f64>,
    pub dual_blocks: Vec<DMatrix<f64>>,
    pub dual_nonneg: Vec<f64>,
    /// Feasibility margin; `None` for optimization solves.
    pub margin: Option<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub diagnostics: Vec<String>,
    pub log: Vec<IterationLog>,
}

impl ConicSolution {
    pub fn value(&self, var: Var) -> f64 {
        match var {
            Var::Psd { block, i, j } => self.blocks[block][(i, j)],
            Var::Nonneg(l) => self.nonneg[l],
            Var::Free(l) => self.free[l],
        }
    }

    /// True when the margin clears `-eig_tol`.
    pub fn is_feasible(&self) -> bool {
        matches!(self.margin, Some(m) if m >= -tolerances::EIG_TOL)
    }

    pub(crate) fn trivial(p: &ConicProblem, status: Status, margin: Option<f64>) -> Self {
        ConicSolution {
            status,
            blocks: p
                .psd_blocks
                .iter()
                .map(|&n| DMatrix::identity(n, n))
                .collect(),
            nonneg: vec![1.0; p.nonneg_count],
            free: vec![0.0; p.free_count],
            dual: vec![0.0; p.equalities.len()],
            dual_blocks: p.psd_blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
            dual_nonneg: vec![0.0; p.nonneg_count],
            margin,
            primal_objective: 0.0,
            dual_objective: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            gap: 0.0,
            iterations: 0,
            diagnostics: Vec::new(),
            log: Vec::new(),
        }
    }
}

/// Solves `min objective` subject to the equalities and cone membership.
pub fn solve(p: &ConicProblem) -> Result<ConicSolution> {
    solve_with(p, &SolverOptions::default())
}

pub fn solve_with(p: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    p.validate()?;
    ipm::solve_optimization(p, opts)
}

/// Maximizes the uniform eigenvalue slack; see the module docs.
pub fn solve_feasibility(p: &ConicProblem) -> Result<ConicSolution> {
    solve_feasibility_with(p, &SolverOptions::default())
}

pub fn solve_feasibility_with(p: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    p.validate()?;
    if !p.is_feasibility() {
        return Err(Error::InvalidInput(
            "solve_feasibility expects a zero objective".into(),
        ));
    }
    ipm::solve_margin(p, opts)
}

#[cfg(test)]
mod tests;
