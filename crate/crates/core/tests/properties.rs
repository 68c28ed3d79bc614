//! Property tests for posteriors, distances and deterministic bounds.

use dilab_core::bounds::{
    tv_bound_basic, tv_bound_rescaled, tv_bound_symmetrized, w1_bound_two_term, BoundKind, BoundOptions,
    BoundReport, HolderContext, DOMINATION_TOLERANCE,
};
use dilab_core::metrics::{moment_p, tv_distance, wasserstein_1d, wasserstein_transport};
use dilab_core::{build_posterior, lp_norm, Exponent, Metric, Posterior, PosteriorSpec, ThetaGrid};
use proptest::prelude::*;

fn sorted_nodes(gaps: &[f64], start: f64) -> Vec<f64> {
    let mut t = start;
    gaps.iter()
        .map(|g| {
            t += g;
            t
        })
        .collect()
}

/// Random spec on 2..=64 nodes with a random potential, weights and `Z`.
fn spec_strategy() -> impl Strategy<Value = PosteriorSpec> {
    (2usize..=64).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01f64..1.0, n),
            -3.0f64..3.0,
            prop::collection::vec(0.1f64..2.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-2.0f64..2.0, n),
        )
            .prop_map(|(gaps, start, w, phi, logz)| {
                let grid = ThetaGrid::new(sorted_nodes(&gaps, start), w, Metric::Euclidean).unwrap();
                PosteriorSpec::new(grid, phi, logz.iter().map(|v| v.exp()).collect()).unwrap()
            })
    })
}

/// Spec with a perturbation `Zt = Z * ratio`, ratios in `[0.2, 5]`.
fn pair_strategy() -> impl Strategy<Value = (PosteriorSpec, PosteriorSpec)> {
    spec_strategy().prop_flat_map(|s| {
        let n = s.grid().len();
        (Just(s), prop::collection::vec(0.2f64.ln()..5f64.ln(), n)).prop_map(|(s, lr)| {
            let zt = s.z().iter().zip(&lr).map(|(z, r)| z * r.exp()).collect();
            let t = s.with_z(zt).unwrap();
            (s, t)
        })
    })
}

fn atoms_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_map(|mut v| {
        if v.iter().sum::<f64>() == 0.0 {
            v[0] = 1.0;
        }
        v
    })
}

/// Random grid with `k` posteriors on it.
fn posteriors(k: usize) -> impl Strategy<Value = Vec<Posterior>> {
    (2usize..=64).prop_flat_map(move |n| {
        (
            prop::collection::vec(0.01f64..1.0, n),
            prop::collection::vec(atoms_strategy(n), k),
        )
            .prop_map(|(gaps, atoms)| {
                let g = ThetaGrid::counting(sorted_nodes(&gaps, 0.0), Metric::Euclidean).unwrap();
                atoms.into_iter().map(|a| Posterior::from_atoms(g.clone(), a).unwrap()).collect()
            })
    })
}

const EXPONENTS: [Exponent; 5] = [
    Exponent::Finite(1.0),
    Exponent::Finite(1.5),
    Exponent::Finite(2.0),
    Exponent::Finite(3.0),
    Exponent::Infinity,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn posterior_is_scale_invariant(spec in spec_strategy(), log_c in -7.0f64..7.0) {
        let c = log_c.exp();
        let a = build_posterior(&spec).unwrap();
        let b = build_posterior(&spec.with_z(spec.z().iter().map(|z| c * z).collect()).unwrap()).unwrap();
        for (x, y) in a.density().iter().zip(b.density()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
        for (x, y) in a.atoms().iter().zip(b.atoms()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn atoms_sum_to_one(spec in spec_strategy()) {
        let total: f64 = build_posterior(&spec).unwrap().atoms().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn lp_norm_is_monotone_in_p(
        (f, m) in (1usize..40).prop_flat_map(|n| (
            prop::collection::vec(-10.0f64..10.0, n),
            atoms_strategy(n),
        )),
        i in 0usize..5,
        j in 0usize..5,
    ) {
        let total: f64 = m.iter().sum();
        let prob: Vec<f64> = m.iter().map(|v| v / total).collect();
        let (lo, hi) = (EXPONENTS[i.min(j)], EXPONENTS[i.max(j)]);
        let a = lp_norm(&f, &prob, lo).unwrap();
        let b = lp_norm(&f, &prob, hi).unwrap();
        prop_assert!(a <= b + 1e-12, "{a} > {b}");
    }

    #[test]
    fn tv_is_a_metric(ps in posteriors(3)) {
        let (a, b, c) = (&ps[0], &ps[1], &ps[2]);
        let ab = tv_distance(a, b).unwrap();
        prop_assert_eq!(ab, tv_distance(b, a).unwrap());
        prop_assert_eq!(tv_distance(a, a).unwrap(), 0.0);
        prop_assert!(ab <= tv_distance(a, c).unwrap() + tv_distance(c, b).unwrap() + 1e-12);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
    }

    #[test]
    fn sign_function_attains_tv(ps in posteriors(2), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let (a, b) = (&ps[0], &ps[1]);
        let tv = tv_distance(a, b).unwrap();
        let gap = |f: &[f64]| -> f64 {
            f.iter().zip(a.atoms().iter().zip(b.atoms())).map(|(f, (x, y))| f * (x - y)).sum::<f64>().abs()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let f: Vec<f64> = (0..a.grid().len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
            prop_assert!(gap(&f) <= tv + 1e-12);
        }
        let sign: Vec<f64> = a.atoms().iter().zip(b.atoms()).map(|(x, y)| (x - y).signum()).collect();
        prop_assert!((gap(&sign) - tv).abs() <= 1e-12);
    }

    #[test]
    fn cdf_formula_matches_transport(ps in posteriors(2)) {
        let gap = (wasserstein_1d(&ps[0], &ps[1]).unwrap() - wasserstein_transport(&ps[0], &ps[1]).unwrap()).abs();
        prop_assert!(gap <= 1e-9, "gap {gap}");
    }

    #[test]
    fn moment_is_monotone_in_p(ps in posteriors(1)) {
        let m1 = moment_p(&ps[0], 1.0).unwrap();
        let m2 = moment_p(&ps[0], 2.0).unwrap();
        let m4 = moment_p(&ps[0], 4.0).unwrap();
        prop_assert!(m1 <= m2 + 1e-12 && m2 <= m4 + 1e-12);
    }

    #[test]
    fn w1_is_controlled_by_tv(ps in posteriors(2)) {
        let (a, b) = (&ps[0], &ps[1]);
        let w = wasserstein_1d(a, b).unwrap();
        prop_assert!(w <= a.grid().diameter() * tv_distance(a, b).unwrap() / 2.0 + 1e-9);
    }

    #[test]
    fn rescaled_vanishes_on_multiples(spec in spec_strategy(), log_c in -7.0f64..7.0) {
        let t = spec.with_z(spec.z().iter().map(|z| log_c.exp() * z).collect()).unwrap();
        let r = tv_bound_rescaled(&spec, &t).unwrap();
        prop_assert!(r.l1 <= 1e-10 && r.l2 <= 1e-10, "{r:?}");
    }

    #[test]
    fn refined_tv_bounds_improve_on_basic((s, t) in pair_strategy()) {
        let basic = tv_bound_basic(&s, &t).unwrap();
        prop_assert!(tv_bound_rescaled(&s, &t).unwrap().l1 <= basic + 1e-10);
        prop_assert!(tv_bound_symmetrized(&s, &t).unwrap() <= basic + 1e-12);
    }

    #[test]
    fn two_term_ordering((s, t) in pair_strategy()) {
        let b = w1_bound_two_term(&s, &t).unwrap();
        prop_assert!(b.tight <= b.loose * (1.0 + 1e-14), "{b:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn applicable_bounds_dominate(
        (s, t) in pair_strategy(),
        p_index in 0usize..5,
        k_slack in 0.0f64..0.5,
        ell_frac in 0.1f64..=1.0,
        eps in prop::option::of(0.01f64..1.0),
    ) {
        let p = EXPONENTS[p_index];
        let norm = |x: &PosteriorSpec| lp_norm(&x.boltzmann_over_z(), x.grid().weights(), p).unwrap();
        let k = norm(&s).max(norm(&t)) * (1.0 + k_slack);
        let ell = t.z().iter().copied().fold(f64::INFINITY, f64::min) * ell_frac;
        let opts = BoundOptions {
            holder: Some(HolderContext { p, k, ell: Some(ell) }),
            ell: Some(ell),
            eps,
        };
        let report = BoundReport::evaluate(&s, &t, &BoundKind::ALL, &opts).unwrap();
        let bad: Vec<_> = report.violations(DOMINATION_TOLERANCE).iter().map(|e| e.name.clone()).collect();
        prop_assert!(bad.is_empty(), "violated: {bad:?}");
        // the hypotheses were constructed to hold
        prop_assert!(report.entries.iter().all(|e| e.bound.is_applicable() || e.name == "w1_eps"));
    }
}
