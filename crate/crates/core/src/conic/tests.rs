use super::*;

fn trace_problem(scale: f64) -> ConicProblem {
    let mut p = ConicProblem::new();
    p.add_psd_block(2);
    p.add_equality(vec![(Var::psd(0, 0, 0), 1.0)], scale);
    p.objective = vec![(Var::psd(0, 0, 0), scale), (Var::psd(0, 1, 1), scale)];
    p
}

/// Gram feasibility for `a x1^4 + b x1^2 x2^2 + c x2^4` on `{x1^2, x1 x2, x2^2}`.
fn quartic_gram(a: f64, b: f64, c: f64) -> ConicProblem {
    let mut p = ConicProblem::new();
    p.add_psd_block(3);
    let g = |i, j| Var::psd(0, i, j);
    p.add_equality(vec![(g(0, 0), 1.0)], a);
    p.add_equality(vec![(g(0, 1), 2.0)], 0.0);
    p.add_equality(vec![(g(0, 2), 2.0), (g(1, 1), 1.0)], b);
    p.add_equality(vec![(g(1, 2), 2.0)], 0.0);
    p.add_equality(vec![(g(2, 2), 1.0)], c);
    p
}

fn assert_kkt(s: &ConicSolution) {
    assert!(s.primal_residual <= 1e-8, "pres {}", s.primal_residual);
    assert!(s.dual_residual <= 1e-8, "dres {}", s.dual_residual);
    assert!(s.gap <= 1e-8, "gap {}", s.gap);
}

#[test]
fn minimizes_trace_with_fixed_corner() {
    let s = solve(&trace_problem(1.0)).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert_kkt(&s);
    assert!((s.primal_objective - 1.0).abs() < 1e-7);
    let x = &s.blocks[0];
    assert!((x[(0, 0)] - 1.0).abs() < 1e-7);
    assert!(x[(0, 1)].abs() < 1e-4);
    assert!(x[(1, 1)].abs() < 1e-7);
}

#[test]
fn negative_diagonal_is_infeasible() {
    let mut p = ConicProblem::new();
    p.add_psd_block(2);
    p.add_equality(vec![(Var::psd(0, 0, 0), 1.0)], -1.0);
    let s = solve_feasibility(&p).unwrap();
    assert_eq!(s.status, Status::Infeasible);
    assert!(s.margin.unwrap() <= -1e-6);

    p.objective = vec![(Var::psd(0, 1, 1), 1.0)];
    assert_eq!(solve(&p).unwrap().status, Status::Infeasible);
}

#[test]
fn quartic_sum_has_positive_margin() {
    let s = solve_feasibility(&quartic_gram(1.0, 0.0, 1.0)).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!(s.margin.unwrap() > 0.0);
    let g = &s.blocks[0];
    assert!(g.clone().symmetric_eigenvalues().min() > 0.0);
    assert!((g[(0, 0)] - 1.0).abs() < 1e-7);
    assert!((2.0 * g[(0, 2)] + g[(1, 1)]).abs() < 1e-7);
}

#[test]
fn indefinite_quartic_is_infeasible() {
    let s = solve_feasibility(&quartic_gram(1.0, -3.0, 1.0)).unwrap();
    assert_eq!(s.status, Status::Infeasible);
    assert!(s.margin.unwrap() <= -1e-6);
}

#[test]
fn empty_problem_is_feasible_with_infinite_margin() {
    let mut p = ConicProblem::new();
    p.add_psd_block(3);
    let s = solve_feasibility(&p).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert_eq!(s.margin, Some(f64::INFINITY));
}

#[test]
fn linear_program_with_free_variable() {
    // min x0 + 2 x1 + u  s.t. x0 + x1 = 1, u - x0 = 0.5
    let mut p = ConicProblem::new();
    let x0 = p.add_nonneg();
    let x1 = p.add_nonneg();
    let u = p.add_free();
    p.add_equality(vec![(x0, 1.0), (x1, 1.0)], 1.0);
    p.add_equality(vec![(u, 1.0), (x0, -1.0)], 0.5);
    p.objective = vec![(x0, 1.0), (x1, 2.0), (u, 1.0)];
    let s = solve(&p).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert_kkt(&s);
    // u = 0.5 + x0, objective 0.5 + 2 x0 + 2 x1 = 2.5 for every feasible point.
    assert!((s.primal_objective - 2.5).abs() < 1e-7);
}

#[test]
fn dependent_rows_are_presolved() {
    let mut p = trace_problem(1.0);
    p.add_equality(vec![(Var::psd(0, 0, 0), 2.0)], 2.0);
    let s = solve(&p).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.primal_objective - 1.0).abs() < 1e-7);
    assert!(s.diagnostics.iter().any(|d| d.contains("presolve")));
}

#[test]
fn status_is_scale_invariant() {
    for scale in [1.0, 1e3] {
        assert_eq!(solve(&trace_problem(scale)).unwrap().status, Status::Optimal);
        let mut q = quartic_gram(1.0, -3.0, 1.0);
        for e in q.equalities.iter_mut() {
            e.rhs *= scale;
        }
        assert_eq!(solve_feasibility(&q).unwrap().status, Status::Infeasible);
        let mut q = quartic_gram(1.0, 0.5, 1.0);
        for e in q.equalities.iter_mut() {
            e.rhs *= scale;
        }
        assert_eq!(solve_feasibility(&q).unwrap().status, Status::Optimal);
    }
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let p = quartic_gram(2.0, 0.3, 1.0);
    let a = solve_feasibility(&p).unwrap();
    let b = solve_feasibility(&p).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.status, b.status);
    assert_eq!(a.margin.unwrap().to_bits(), b.margin.unwrap().to_bits());
    assert_eq!(a.blocks, b.blocks);
}

#[test]
fn iteration_log_has_one_line_per_iteration() {
    let s = solve(&trace_problem(1.0)).unwrap();
    assert_eq!(s.log.len(), s.iterations + 1);
    let line = s.log[0].to_string();
    assert_eq!(line.split_whitespace().count(), 7);
}

#[test]
fn trace_problem_exports_four_header_lines() {
    let text = export_sdpa(&trace_problem(1.0));
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('"')).collect();
    assert_eq!(&lines[..4], &["1", "1", "2", "1e0"]);
    // F0 = -I has two entries and the constraint one.
    assert_eq!(lines.len(), 4 + 3);
    assert_eq!(import_sdpa(&text).unwrap(), trace_problem(1.0).canonical());
}

#[test]
fn rejects_out_of_range_variables() {
    let mut p = ConicProblem::new();
    p.add_psd_block(2);
    p.add_equality(vec![(Var::psd(0, 0, 2), 1.0)], 1.0);
    assert!(solve(&p).is_err());
}
