use super::*;
use crate::forms::Form;
use crate::sos::{is_sos, is_sos_convex};

fn cross_polytope() -> TargetNorm {
    TargetNorm::polytope(vec![
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![-1.0, 0.0],
        vec![0.0, -1.0],
    ])
    .unwrap()
}

fn root(f: &Form, x: &[f64]) -> f64 {
    f.eval(x).powf(1.0 / f.degree() as f64)
}

/// Origin-symmetric octagon with jittered angles and radii.
fn octagon(seed: u64) -> TargetNorm {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut verts = Vec::new();
    for k in 0..4 {
        let th = std::f64::consts::FRAC_PI_4 * k as f64 + rng.random_range(-0.15..0.15);
        let r = rng.random_range(0.85..1.15);
        verts.push(vec![r * th.cos(), r * th.sin()]);
    }
    let neg: Vec<Vec<f64>> = verts.iter().map(|v| v.iter().map(|x| -x).collect()).collect();
    verts.extend(neg);
    TargetNorm::polytope(verts).unwrap()
}

fn training_set(target: &TargetNorm, count: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let pts = sample_sphere(2, count, seed);
    let vals = pts.iter().map(|x| target.eval(x)).collect();
    (pts, vals)
}

#[test]
fn quadratic_moment_form_of_the_one_norm() {
    // The polar body is the square [−1, 1]², whose uniform second moments are 1/3.
    let f = moment_form(&cross_polytope(), 2, 2).unwrap();
    assert!((f.coeff_of(&[2, 0]) - 1.0 / 3.0).abs() < 1e-10);
    assert!((f.coeff_of(&[0, 2]) - 1.0 / 3.0).abs() < 1e-10);
    assert!(f.coeff_of(&[1, 1]).abs() < 1e-10);
    // Quartic: E[y1⁴] = 1/5, E[y1²y2²] = 1/9.
    let f = moment_form(&cross_polytope(), 2, 4).unwrap();
    assert!((f.coeff_of(&[4, 0]) - 0.2).abs() < 1e-10);
    assert!((f.coeff_of(&[2, 2]) - 6.0 / 9.0).abs() < 1e-10);
}

#[test]
fn sandwich_for_the_one_norm() {
    let target = cross_polytope();
    let pts = sample_sphere(2, 1000, 3);
    for d in [2, 4, 6, 8] {
        let f = moment_form(&target, 2, d).unwrap();
        let lo = approx_factor(2, d);
        for x in &pts {
            let (v, t) = (root(&f, x), target.eval(x));
            assert!(v <= t * (1.0 + 1e-6), "d={d}");
            assert!(v >= lo * t * (1.0 - 1e-6), "d={d}");
        }
    }
}

#[test]
fn euclidean_moments_by_monte_carlo() {
    // Polar of the unit disc is the disc; E[y1²] = 1/4.
    let tab = moment_table(&TargetNorm::p_norm(2.0).unwrap(), 2, 2, 0).unwrap();
    let f = tab.form();
    let se = tab.coefficient_error();
    assert!(se > 0.0 && se < 1e-3);
    assert!((f.coeff_of(&[2, 0]) - 0.25).abs() < 4.0 * se);
    assert!((f.coeff_of(&[0, 2]) - 0.25).abs() < 4.0 * se);
    assert!((tab.volume - std::f64::consts::PI).abs() < 0.01);
}

#[test]
fn p_norm_sandwich_within_sampling_error() {
    let target = TargetNorm::p_norm(7.5).unwrap();
    let tab = moment_table(&target, 2, 4, 1).unwrap();
    let f = tab.form();
    let pts = sample_sphere(2, 1000, 5);
    for x in &pts {
        let (v, t) = (root(&f, x), target.eval(x));
        assert!(v <= t * 1.01);
        assert!(v >= approx_factor(2, 4) * t * 0.99);
    }
}

#[test]
fn moment_forms_are_sos_convex() {
    for d in [2, 4, 6] {
        let f = moment_form(&octagon(11), 2, d).unwrap();
        assert!(is_sos_convex(&f).unwrap().is_sos(), "d={d}");
    }
}

#[test]
fn approx_factor_values() {
    assert_eq!(approx_factor(2, 2), 0.25);
    let mut prev = 0.0;
    for d in (2..=100).step_by(2) {
        let a = approx_factor(2, d);
        assert!(a > prev);
        prev = a;
    }
    assert!(approx_factor(2, 100) > 0.9);
}

#[test]
fn sphere_samples_and_split() {
    let pts = sample_sphere(3, 1, 9);
    assert_eq!(pts.len(), 1);
    let pts = sample_sphere(3, 100_000, 2);
    for p in &pts[..100] {
        assert!((p.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
    }
    for j in 0..3 {
        let m: f64 = pts.iter().map(|p| p[j]).sum::<f64>() / pts.len() as f64;
        assert!(m.abs() < 0.01);
    }
    assert_eq!(sample_sphere(3, 10, 4), sample_sphere(3, 10, 4));
    let (a, b) = holdout_split(1000, 1);
    assert_eq!((a.len(), b.len()), (800, 200));
    let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
    all.sort();
    assert_eq!(all, (0..1000).collect::<Vec<_>>());
}

#[test]
fn custom_norms_and_validation() {
    let t = TargetNorm::custom(|x: &[f64]| x.iter().map(|v| v.abs()).sum());
    assert_eq!(t.eval(&[1.0, -2.0]), 3.0);
    assert!(TargetNorm::p_norm(0.5).is_err());
    assert!(TargetNorm::polytope(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]]).is_err());
    assert!(moment_form(&cross_polytope(), 2, 3).is_err());
}

#[test]
fn fit_recovers_the_squared_two_norm() {
    let (pts, vals) = training_set(&TargetNorm::p_norm(2.0).unwrap(), 50, 0);
    let rep = fit_polynomial_norm(&pts, &vals, 2, &FitOptions::default()).unwrap();
    assert!(rep.objective <= 1e-12, "{}", rep.objective);
    assert!(rep.f.max_abs_diff(&Form::quadratic_power(2, 1)) < 1e-6);
    assert!(rep.sos_convex && rep.positive_definite);
    assert!(rep.bound_holds());
}

#[test]
fn fit_without_polish_is_close() {
    let (pts, vals) = training_set(&TargetNorm::p_norm(2.0).unwrap(), 50, 0);
    let opts = FitOptions {
        polish: false,
        ..FitOptions::default()
    };
    let rep = fit_polynomial_norm(&pts, &vals, 2, &opts).unwrap();
    assert!(!rep.polished);
    assert!(rep.objective <= 1e-8, "{}", rep.objective);
    assert!(rep.solver_objective <= 1e-6);
}

#[test]
fn fit_of_the_seven_and_a_half_norm() {
    let target = TargetNorm::p_norm(7.5).unwrap();
    let (pts, vals) = training_set(&target, 200, 0);
    let rep = fit_polynomial_norm(&pts, &vals, 6, &FitOptions::default()).unwrap();
    assert!(rep.objective > 0.0);
    assert!(rep.sos_convex);
    assert!(rep.positive_definite);
    assert!(rep.gram_min_eig.unwrap() > 0.0);
    assert!(rep.bound_holds(), "{} > {}", rep.bound_lhs, rep.bound_rhs);
    assert!(is_sos(&rep.f).unwrap().is_sos());
    let (hp, hv) = training_set(&target, 1000, 99);
    assert!(holdout_error(&rep.f, &hp, &hv) <= 0.1);
}

#[test]
fn octagon_fits_improve_with_degree() {
    let target = octagon(7);
    let (pts, vals) = training_set(&target, 250, 1);
    let (train, hold) = holdout_split(pts.len(), 1);
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (idx.iter().map(|&i| pts[i].clone()).collect(), idx.iter().map(|&i| vals[i]).collect())
    };
    let (tp, tv) = pick(&train);
    let (hp, hv) = pick(&hold);
    let mut prev = f64::INFINITY;
    for d in [2, 4, 6, 8] {
        let rep = fit_polynomial_norm(&tp, &tv, d, &FitOptions::default())
            .unwrap_or_else(|e| panic!("d={d}: {e}"));
        assert!(rep.sos_convex, "d={d} {:?}", rep.notes);
        let err = holdout_rms_error(&rep.f, &hp, &hv);
        assert!(err <= holdout_error(&rep.f, &hp, &hv));
        assert!(err < prev, "d={d}: {err} vs {prev}");
        prev = err;
        let level = emit_level_set(&rep.f, 1.0, 64).unwrap();
        assert!(level.iter().all(|p| (rep.f.eval(p) - 1.0).abs() <= 1e-10));
    }
}

#[test]
fn fit_rejects_bad_input() {
    let opts = FitOptions::default();
    assert!(fit_polynomial_norm(&[], &[], 2, &opts).is_err());
    assert!(fit_polynomial_norm(&[vec![1.0, 0.0]], &[1.0], 3, &opts).is_err());
    assert!(fit_polynomial_norm(&[vec![1.0, 0.0]], &[1.0, 2.0], 2, &opts).is_err());
    assert!(fit_polynomial_norm(&[vec![1.0, 0.0], vec![1.0]], &[1.0, 1.0], 2, &opts).is_err());
}

#[test]
fn three_variable_fits_carry_a_note() {
    let pts = crate::sampling::gaussian_sphere(3, 60, 4);
    let vals: Vec<f64> = pts.iter().map(|x| p_norm(x, 3.0)).collect();
    let rep = fit_polynomial_norm(&pts, &vals, 4, &FitOptions::default()).unwrap();
    assert!(rep.notes.iter().any(|n| n.contains("strict subset")));
}
