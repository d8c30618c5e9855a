use nalgebra::DMatrix;
use proptest::prelude::*;

use chaosamp::orthopoly::{BasisSpec, PolyFamily};
use chaosamp::sampling::{
    compute_star_discrepancy, family_cdf, halton_unit, sample_coherence_optimal, sample_lhs,
    sample_randomized_quadrature, sample_standard, sample_with, McmcConfig,
};
use chaosamp::solver::info_matrix;
use chaosamp::{gauss_rule, Strategy};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lhs_puts_one_point_in_each_stratum(n in 1usize..60, seed in any::<u64>()) {
        let spec = BasisSpec::new(
            vec![PolyFamily::Legendre, PolyFamily::HermiteProbabilists, PolyFamily::Jacobi { a: 2.0, b: 1.0 }],
            2,
        ).unwrap();
        let set = sample_lhs(&spec, n, seed);
        for (k, fam) in spec.families().iter().enumerate() {
            let mut strata: Vec<usize> = (0..n)
                .map(|i| ((family_cdf(fam, set.points[(i, k)]) * n as f64).floor() as usize).min(n - 1))
                .collect();
            strata.sort_unstable();
            prop_assert_eq!(strata, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn randomized_quadrature_uses_distinct_gauss_nodes(n in 1usize..40, seed in any::<u64>()) {
        let spec = BasisSpec::isotropic(PolyFamily::<f64>::HermiteProbabilists, 2, 3).unwrap();
        let level = 7;
        let set = sample_randomized_quadrature(&spec, n, level, seed).unwrap();
        let nodes: Vec<f64> = gauss_rule(&PolyFamily::<f64>::HermiteProbabilists, level).unwrap().nodes;
        let mut keys = Vec::new();
        for i in 0..n {
            let mut key = Vec::new();
            for k in 0..2 {
                let x = set.points[(i, k)];
                let pos = nodes.iter().position(|&v| v == x);
                prop_assert!(pos.is_some(), "{} is not a node", x);
                key.push(pos.unwrap());
            }
            keys.push(key);
        }
        keys.sort();
        keys.dedup();
        prop_assert_eq!(keys.len(), n);
    }

    #[test]
    fn generators_are_reproducible(seed in any::<u64>()) {
        let spec = BasisSpec::isotropic(PolyFamily::<f64>::Legendre, 3, 2).unwrap();
        for s in [Strategy::Standard, Strategy::Lhs, Strategy::CoherenceOptimal, Strategy::AsymptoticChebyshev] {
            let a = sample_with(&spec, s, 12, seed, &McmcConfig::default()).unwrap();
            let b = sample_with(&spec, s, 12, seed, &McmcConfig::default()).unwrap();
            prop_assert_eq!(a.points, b.points);
            prop_assert_eq!(a.weights, b.weights);
        }
    }
}

#[test]
fn coherence_optimal_legendre_favours_endpoints() {
    let spec = BasisSpec::isotropic(PolyFamily::<f64>::Legendre, 1, 12).unwrap();
    let set = sample_coherence_optimal(&spec, 20_000, 5, &McmcConfig::default());
    let n = set.len() as f64;
    let outer = set.points.iter().filter(|x| x.abs() > 0.9).count() as f64 / n;
    // uniform sampling would put 10% of the points there
    assert!(outer > 0.2, "outer fraction {outer}");
    let mut counts = [0usize; 10];
    for &x in set.points.iter() {
        counts[(((x + 1.0) / 0.2) as usize).min(9)] += 1;
    }
    assert!(counts[0] > counts[4] && counts[9] > counts[5], "{counts:?}");
}

#[test]
fn weighted_information_matrix_is_unbiased() {
    let spec = BasisSpec::isotropic(PolyFamily::<f64>::Legendre, 2, 3).unwrap();
    let p = spec.len();
    for strategy in [Strategy::Standard, Strategy::CoherenceOptimal, Strategy::AsymptoticChebyshev] {
        let set = sample_with(&spec, strategy, 40_000, 17, &McmcConfig::default()).unwrap();
        let psi = spec.measurement_matrix(&set.points).unwrap();
        let m = info_matrix(&psi, Some(&set.weights)).unwrap();
        // the Chebyshev weights omit the constant (pi / 2)^(d / 2)
        let scale = if strategy == Strategy::AsymptoticChebyshev { 2.0 / std::f64::consts::PI } else { 1.0 };
        let dev = (m / scale.powi(2) - DMatrix::<f64>::identity(p, p)).amax();
        assert!(dev < 0.06, "{strategy:?}: max |M - I| = {dev}");
    }
}

#[test]
fn halton_beats_random_points_in_discrepancy() {
    let n = 512;
    let qmc = compute_star_discrepancy(&halton_unit(2, n, 0).unwrap()).star_discrepancy;
    let spec = BasisSpec::isotropic(PolyFamily::<f64>::Legendre, 2, 1).unwrap();
    let mc: f64 = (0..5)
        .map(|s| {
            let pts = sample_standard(&spec, n, 100 + s).points.map(|x| (x + 1.0) / 2.0);
            compute_star_discrepancy(&pts).star_discrepancy
        })
        .sum::<f64>()
        / 5.0;
    assert!(qmc < 0.5 * mc, "qmc {qmc} vs mc {mc}");
}
