use proptest::prelude::*;

use polynorm::conic::{export_sdpa, import_sdpa, ConicProblem, Var};
use polynorm::forms::{Form, MultiIndex};
use polynorm::jsr::{jsr_lower_bound, MatrixFamily};

fn form_strategy() -> impl Strategy<Value = (Form, Vec<f64>, Vec<f64>)> {
    (2usize..=3, 1u32..=6).prop_flat_map(|(n, d)| {
        let m = MultiIndex::all_of_degree(n, d).len();
        (
            prop::collection::vec(-2.0f64..2.0, m),
            prop::collection::vec(-1.5f64..1.5, n),
            prop::collection::vec(-1.5f64..1.5, n),
        )
            .prop_map(move |(c, x, y)| {
                let terms = MultiIndex::all_of_degree(n, d)
                    .into_iter()
                    .zip(c)
                    .map(|(a, v)| (a.exponents().to_vec(), v));
                (Form::from_terms(n, d, terms).unwrap(), x, y)
            })
    })
}

fn scale(f: &Form) -> f64 {
    1.0 + f.max_abs_coeff()
}

proptest! {
    #[test]
    fn euler_identity((f, x, _) in form_strategy()) {
        let grad = f.gradient().unwrap();
        let lhs: f64 = grad.iter().zip(&x).map(|(g, xi)| xi * g.eval(&x)).sum();
        let rhs = f.degree() as f64 * f.eval(&x);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * scale(&f) * 100.0);
    }

    #[test]
    fn homogeneity((f, x, _) in form_strategy(), t in -2.0f64..2.0) {
        let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
        let expected = t.powi(f.degree() as i32) * f.eval(&x);
        prop_assert!((f.eval(&tx) - expected).abs() <= 1e-9 * scale(&f) * 1e3);
    }

    #[test]
    fn gradient_matches_central_differences((f, x, _) in form_strategy()) {
        let h = 1e-5;
        for (i, g) in f.gradient().unwrap().iter().enumerate() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
            prop_assert!((fd - g.eval(&x)).abs() <= 1e-5 * scale(&f) * 100.0);
        }
    }

    #[test]
    fn hessian_biform_matches_second_differences((f, x, y) in form_strategy()) {
        prop_assume!(f.degree() >= 2);
        let h = 1e-4;
        let at = |t: f64| f.eval(&x.iter().zip(&y).map(|(a, b)| a + t * b).collect::<Vec<_>>());
        let fd = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
        let b = f.hessian_biform().unwrap().eval(&x, &y);
        prop_assert!((fd - b).abs() <= 1e-4 * scale(&f) * 100.0);
    }

    #[test]
    fn composition_is_evaluation_after_the_map(
        (f, x, _) in form_strategy(),
        entries in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        let n = f.n_vars();
        let a = nalgebra::DMatrix::from_row_slice(n, n, &entries[..n * n]);
        let ax: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum()).collect();
        let g = f.compose_linear(&a).unwrap();
        prop_assert!((g.eval(&x) - f.eval(&ax)).abs() <= 1e-9 * scale(&f) * 1e3);
    }

    #[test]
    fn json_round_trip((f, _, _) in form_strategy()) {
        prop_assert_eq!(Form::from_json_str(&f.to_json_string()).unwrap(), f);
    }

    #[test]
    fn sdpa_round_trip(
        size in 1usize..4,
        nonneg in 0usize..3,
        free in 0usize..3,
        rows in prop::collection::vec((0usize..16, -4.0f64..4.0, -4.0f64..4.0), 1..6),
    ) {
        let mut p = ConicProblem::new();
        p.add_psd_block(size);
        let mut scalars: Vec<Var> = (0..nonneg).map(|_| p.add_nonneg()).collect();
        scalars.extend((0..free).map(|_| p.add_free()));
        for (k, a, b) in rows {
            let i = k % size;
            let j = (k / size) % size;
            let mut terms = vec![(Var::psd(0, i.min(j), i.max(j)), a)];
            if let Some(v) = scalars.get(k % (scalars.len() + 1)) {
                terms.push((*v, 1.0));
            }
            p.add_equality(terms, b);
        }
        p.objective = vec![(Var::psd(0, 0, 0), 1.0)];
        prop_assert_eq!(import_sdpa(&export_sdpa(&p)).unwrap(), p.canonical());
    }

    #[test]
    fn lower_bound_scales_linearly(
        entries in prop::collection::vec(-1.0f64..1.0, 8),
        s in 0.1f64..10.0,
    ) {
        let fam = MatrixFamily::new(vec![
            nalgebra::DMatrix::from_row_slice(2, 2, &entries[..4]),
            nalgebra::DMatrix::from_row_slice(2, 2, &entries[4..]),
        ]).unwrap();
        let base = jsr_lower_bound(&fam, 3).unwrap();
        let scaled = jsr_lower_bound(&fam.scaled(s), 3).unwrap();
        prop_assert!((scaled - s * base).abs() <= 1e-9 * (1.0 + s * base));
    }
}
