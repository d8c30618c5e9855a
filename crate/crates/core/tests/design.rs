use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use chaosamp::design::{criterion_value, det_update_ratio, fedorov_exchange, greedy_design, trace_update};
use chaosamp::orthopoly::{BasisSpec, PolyFamily};
use chaosamp::sampling::sample_standard;
use chaosamp::{Criterion, UpdateSign};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_one_updates_match_recomputation(x in matrix(12, 5), v in prop::collection::vec(-2.0f64..2.0, 5)) {
        let a = x.tr_mul(&x) + DMatrix::identity(5, 5) * 0.1;
        let a_inv = a.clone().try_inverse().unwrap();
        let v = DVector::from_vec(v);
        let added = &a + &v * v.transpose();
        let ratio = det_update_ratio(&a_inv, &v, UpdateSign::Add);
        prop_assert!((ratio - added.determinant() / a.determinant()).abs() <= 1e-8 * ratio.abs());
        let (trace, inv) = trace_update(&a_inv, &v, UpdateSign::Add).unwrap();
        let direct = added.clone().try_inverse().unwrap();
        prop_assert!((trace - direct.trace()).abs() <= 1e-8 * direct.trace());
        prop_assert!((&inv - &direct).amax() <= 1e-8 * direct.amax());

        // removing the same vector restores the original inverse
        let (back_trace, back) = trace_update(&inv, &v, UpdateSign::Remove).unwrap();
        prop_assert!((back_trace - a_inv.trace()).abs() <= 1e-7 * a_inv.trace());
        prop_assert!((back - &a_inv).amax() <= 1e-7 * a_inv.amax());
    }

    #[test]
    fn greedy_selection_ignores_uniform_weight_scaling(psi in matrix(30, 4), scale in 0.1f64..10.0) {
        let ones = DVector::from_element(30, 1.0);
        let scaled = DVector::from_element(30, scale);
        for c in [Criterion::D, Criterion::A, Criterion::E, Criterion::K] {
            let a = greedy_design(&psi, Some(&ones), 8, c);
            let b = greedy_design(&psi, Some(&scaled), 8, c);
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.selected, b.selected),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }

    #[test]
    fn greedy_step_beats_any_fixed_choice(psi in matrix(20, 3)) {
        // the greedy design is never worse than the first n candidates
        for c in [Criterion::D, Criterion::A] {
            let Ok(state) = greedy_design(&psi, None, 6, c) else { continue };
            let first = criterion_value(c, &psi.rows(0, 6).into_owned(), None).unwrap();
            let chosen = criterion_value(c, &psi.select_rows(state.selected.iter()), None).unwrap();
            prop_assert!(chosen <= first * (1.0 + 1e-9));
        }
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

#[test]
fn fedorov_exchange_reaches_the_exhaustive_optimum_on_small_pools() {
    let spec = BasisSpec::isotropic(PolyFamily::<f64>::Legendre, 2, 1).unwrap();
    let mut hits = 0;
    for seed in 0..20 {
        let pool = sample_standard(&spec, 10, seed).points;
        let psi = spec.measurement_matrix(&pool).unwrap();
        let det = |rows: &[usize]| {
            let s = psi.select_rows(rows.iter());
            s.tr_mul(&s).determinant()
        };
        let best = subsets(10, 4).iter().map(|s| det(s)).fold(0.0, f64::max);
        let start = greedy_design(&psi, None, 4, Criterion::D).unwrap();
        let swapped = fedorov_exchange(&start, &psi, None, 1e-12, 100).unwrap();
        let got = det(&swapped.selected);
        assert!(got >= det(&start.selected) * (1.0 - 1e-12));
        // no single swap improves the result
        for pos in 0..4 {
            for j in (0..10).filter(|j| !swapped.selected.contains(j)) {
                let mut s = swapped.selected.clone();
                s[pos] = j;
                assert!(det(&s) <= got * (1.0 + 1e-9));
            }
        }
        if got >= best * (1.0 - 1e-9) {
            hits += 1;
        }
    }
    assert!(hits >= 18, "exchange found the global optimum in {hits}/20 pools");
}
