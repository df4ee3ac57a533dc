use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::forms::Form;

fn quartic_sum() -> Form {
    Form::from_terms(2, 4, [(vec![4, 0], 1.0), (vec![0, 4], 1.0)]).unwrap()
}

fn mi(e: &[u32]) -> MultiIndex {
    MultiIndex::new(e.to_vec())
}

#[test]
fn constraint_sizes() {
    let mut p = SosProgram::new();
    p.add_sos(quartic_sum().into(), MonomialBasis::of_degree(2, 2)).unwrap();
    assert_eq!(p.problem().psd_blocks, vec![3]);
    assert_eq!(p.problem().equalities.len(), 5);

    let f = Form::quadratic_power(3, 3);
    let mut p = SosProgram::new();
    p.add_sos(f.into(), MonomialBasis::of_degree(3, 3)).unwrap();
    assert_eq!(p.problem().psd_blocks, vec![10]);
    assert_eq!(p.problem().equalities.len(), 28);

    assert_eq!(sos_convex_basis(2, 4, 0).len(), 4);
}

#[test]
fn odd_degree_is_rejected() {
    let f = Form::from_terms(2, 3, [(vec![3, 0], 1.0)]).unwrap();
    assert!(matches!(is_sos(&f), Err(Error::InvalidDegree { .. })));
    let mut p = SosProgram::new();
    assert!(p.add_sos(f.into(), MonomialBasis::of_degree(2, 1)).is_err());
}

#[test]
fn quartic_sum_is_sos_with_diagonal_support() {
    let out = is_sos(&quartic_sum()).unwrap();
    assert!(out.is_sos(), "{:?}", out.diagnostics);
    assert!(out.margin > 0.0);
    let cert = out.certificate.unwrap();
    assert_eq!(cert.basis.entries()[0], mi(&[2, 0]));
    assert!((cert.gram[(0, 0)] - 1.0).abs() < 1e-9);
    assert!((cert.gram[(2, 2)] - 1.0).abs() < 1e-9);
    assert!(validate_certificate(&quartic_sum(), &cert).unwrap().valid);
}

#[test]
fn indefinite_quartic_is_not_sos() {
    let f = Form::from_terms(2, 4, [(vec![4, 0], 1.0), (vec![2, 2], -3.0), (vec![0, 4], 1.0)])
        .unwrap();
    let out = is_sos(&f).unwrap();
    assert_eq!(out.verdict, Verdict::NotSos);
    assert!(out.margin <= -1e-6);
}

#[test]
fn motzkin_is_not_sos_but_one_sos() {
    let m = Form::motzkin();
    let r0 = is_r_sos(&m, 0).unwrap();
    assert_eq!(r0.verdict, Verdict::NotSos, "margin {}", r0.margin);
    assert!(r0.margin <= -1e-6);

    for r in 1..=2 {
        let out = is_r_sos(&m, r).unwrap();
        assert!(out.is_sos(), "r={r}: {:?} margin {}", out.diagnostics, out.margin);
        let report = validate_certificate(&r_sos_target(&m, r), out.certificate.as_ref().unwrap())
            .unwrap();
        assert!(report.valid, "{report:?}");
    }
}

#[test]
fn hand_built_certificates() {
    let basis = MonomialBasis::new(vec![mi(&[2, 0]), mi(&[0, 2])]).unwrap();
    let cert = GramCertificate::new(basis, DMatrix::identity(2, 2));
    let report = validate_certificate(&quartic_sum(), &cert).unwrap();
    assert_eq!(report.residual, 0.0);
    assert!((report.min_eig - 1.0).abs() < 1e-15);
    assert!(report.valid);

    // (x1^2 - x2^2)^2 with its rank-one Gram, pushed below zero along the kernel.
    let f = Form::from_terms(2, 4, [(vec![4, 0], 1.0), (vec![2, 2], -2.0), (vec![0, 4], 1.0)])
        .unwrap();
    let v = nalgebra::DVector::from_vec(vec![1.0, 0.0, -1.0]);
    let good = GramCertificate::new(MonomialBasis::of_degree(2, 2), &v * v.transpose());
    assert!(validate_certificate(&f, &good).unwrap().valid);
    let u = nalgebra::DVector::from_vec(vec![0.0, 1.0, 0.0]);
    let bad = GramCertificate::new(
        MonomialBasis::of_degree(2, 2),
        &v * v.transpose() - &u * u.transpose() * 2e-7,
    );
    let report = validate_certificate(&f, &bad).unwrap();
    assert!(!report.valid);
    assert!((report.min_eig + 2e-7).abs() < 1e-12);
}

#[test]
fn basis_mismatch_is_an_error() {
    let cert = GramCertificate::new(MonomialBasis::of_degree(3, 2), DMatrix::identity(6, 6));
    assert!(matches!(
        validate_certificate(&quartic_sum(), &cert),
        Err(Error::BasisMismatch(_))
    ));
    let cert = GramCertificate::new(MonomialBasis::of_degree(2, 2), DMatrix::identity(2, 2));
    assert!(validate_certificate(&quartic_sum(), &cert).is_err());
}

#[test]
fn certificate_json_round_trip() {
    let cert = is_sos(&quartic_sum()).unwrap().certificate.unwrap();
    let back = GramCertificate::from_json_str(&cert.to_json_string()).unwrap();
    assert_eq!(back, cert);
}

#[test]
fn sos_convexity_examples() {
    let out = is_sos_convex(&quartic_sum()).unwrap();
    assert!(out.is_sos(), "{:?}", out.diagnostics);
    let out = is_sos_convex(&Form::quadratic_power(2, 2)).unwrap();
    assert!(out.is_sos(), "{:?}", out.diagnostics);
    let target = r_sos_convex_target(&Form::quadratic_power(2, 2), 0).unwrap();
    assert!(validate_certificate(&target, out.certificate.as_ref().unwrap()).unwrap().valid);

    // x1^4 - x2^4 is not convex: the Hessian biform is -12 x2^2 y2^2 + ...
    let f = Form::from_terms(2, 4, [(vec![4, 0], 1.0), (vec![0, 4], -1.0)]).unwrap();
    assert_eq!(is_sos_convex(&f).unwrap().verdict, Verdict::NotSos);
}

fn random_form(rng: &mut ChaCha8Rng, n: usize, d: u32) -> Form {
    let terms: Vec<(Vec<u32>, f64)> = MultiIndex::all_of_degree(n, d)
        .into_iter()
        .map(|a| (a.exponents().to_vec(), rng.random_range(-1.0..1.0)))
        .collect();
    Form::from_terms(n, d, terms).unwrap()
}

#[test]
fn random_sums_of_squares_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let n = 2 + trial % 2;
        let half = 1 + (trial / 2) as u32 % 2;
        let mut f = Form::zero(n, 2 * half);
        for _ in 0..3 {
            let q = random_form(&mut rng, n, half);
            f = f.add(&q.multiply(&q).unwrap()).unwrap();
        }
        let out = is_sos(&f).unwrap();
        assert!(out.is_sos(), "trial {trial}: {:?}", out.diagnostics);
        let report = validate_certificate(&f, out.certificate.as_ref().unwrap()).unwrap();
        assert!(
            report.residual <= 1e-7 * f.max_abs_coeff(),
            "trial {trial}: residual {}",
            report.residual
        );
    }
}

#[test]
fn affine_targets_couple_free_coefficients() {
    // Find the largest-margin c with x1^4 + c x1^2 x2^2 + x2^4 SOS and c + 1 = s >= 0.
    let mut p = SosProgram::new();
    let c = p.new_free();
    let mut target = AffineForm::from(quartic_sum());
    target
        .add_term(c, Form::from_terms(2, 4, [(vec![2, 2], 1.0)]).unwrap())
        .unwrap();
    p.add_sos(target, MonomialBasis::of_degree(2, 2)).unwrap();
    let sol = p.solve_feasibility().unwrap();
    assert_eq!(sol.verdict, Verdict::Sos);
    let cv = sol.value(c);
    assert!(cv >= -2.0 - 1e-7, "c = {cv}");
    assert!(sol.certificates[0].min_eig >= -1e-7);
}
