//! Statistical checks of the estimators with 3-SE tolerances and fixed seeds.

use dilab_core::estimators::{
    envelope_moment_bounds, mean_se, mis_recover, mis_target, q_moments, simple_mc_recover, EnvelopeScheme,
    EnvelopeSpec, GibbsUniform, SamplerFamily, UniformTilt,
};
use dilab_core::gibbs::build_ising;
use dilab_core::{Metric, PosteriorSpec, ThetaGrid, WeightRule};

const M: usize = 10_000;
const SEED: u64 = 0x00c0_ffee;

fn grid(n: usize) -> ThetaGrid {
    ThetaGrid::build(0.5, 3.0, n, Metric::Euclidean, WeightRule::UniformTrapezoid).unwrap()
}

fn tilt_truth(g: &ThetaGrid) -> Vec<f64> {
    g.nodes().iter().map(|&t| UniformTilt.exact_z(t).unwrap()).collect()
}

#[test]
fn simple_mc_is_unbiased() {
    let g = grid(9);
    let truth = tilt_truth(&g);
    let e = simple_mc_recover(&UniformTilt, &g, 1, M, SEED, true).unwrap();
    for (i, z) in truth.iter().enumerate() {
        let col: Vec<f64> = e.rows().map(|r| r[i]).collect();
        let (mean, se) = mean_se(&col);
        assert!((mean - z).abs() <= 3.0 * se, "node {i}: {mean} vs {z} (se {se})");
    }
}

#[test]
fn mis_two_anchor_one_by_two_ising() {
    // S(theta) = 4 cosh(theta) * sum_j p_j / (4 cosh(theta_j))
    let gm = build_ising(1, 2, false).unwrap();
    let g = ThetaGrid::build(0.2, 1.8, 5, Metric::Euclidean, WeightRule::UniformTrapezoid).unwrap();
    let (a, b) = (0.6, 1.4);
    let e = mis_recover(&gm, &g, &[a, b], &[0.5, 0.5], 1, M, SEED).unwrap();
    let lib = mis_target(&gm, g.nodes(), &[a, b], &[0.5, 0.5]).unwrap();
    for (i, &t) in g.nodes().iter().enumerate() {
        let s = 4.0 * t.cosh() * (0.5 / (4.0 * a.cosh()) + 0.5 / (4.0 * b.cosh()));
        assert!((lib[i] - s).abs() <= 1e-14 * s);
        let col: Vec<f64> = e.rows().map(|r| r[i]).collect();
        let (mean, se) = mean_se(&col);
        assert!((mean - s).abs() <= 3.0 * se, "node {i}: {mean} vs {s} (se {se})");
    }
}

#[test]
fn variance_scales_as_inverse_n() {
    let g = grid(5);
    let truth = tilt_truth(&g);
    let ns: Vec<usize> = (2..=10).map(|k| 1 << k).collect();
    let node = 2;
    let m2: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let e = simple_mc_recover(&UniformTilt, &g, n, M, SEED + n as u64, false).unwrap();
            q_moments(&e, &truth).unwrap().m2[node]
        })
        .collect();
    let xs: Vec<f64> = ns.iter().map(|n| (*n as f64).ln()).collect();
    let ys: Vec<f64> = m2.iter().map(|v| v.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 9.0, ys.iter().sum::<f64>() / 9.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    assert!((-1.15..=-0.85).contains(&slope), "slope {slope}");
}

#[test]
fn relative_error_follows_the_root_n_identity() {
    // sqrt(E|Q_N - 1|^2) = sqrt(E|Q_1 - 1|^2) / sqrt(N): quadrupling N halves it
    let g = grid(5);
    let truth = tilt_truth(&g);
    let m2 = |n: usize| {
        let e = simple_mc_recover(&UniformTilt, &g, n, M, SEED ^ n as u64, false).unwrap();
        q_moments(&e, &truth).unwrap().m2
    };
    let (one, four, sixteen) = (m2(1), m2(4), m2(16));
    for i in 0..g.len() {
        let r4 = (four[i] / one[i]).sqrt();
        let r16 = (sixteen[i] / four[i]).sqrt();
        assert!((r4 - 0.5).abs() <= 0.1 && (r16 - 0.5).abs() <= 0.1, "node {i}: {r4} {r16}");
        let ratio = four[i] / one[i] * 4.0;
        assert!((ratio - 1.0).abs() <= 0.2, "node {i}: m2(4)/m2(1) = {}", ratio / 4.0);
    }
}

#[test]
fn inverse_moment_contracts_and_jensen_holds() {
    let g = grid(7);
    let truth = tilt_truth(&g);
    let q = |n: usize| {
        let e = simple_mc_recover(&UniformTilt, &g, n, M, SEED.wrapping_mul(n as u64 + 1), true).unwrap();
        q_moments(&e, &truth).unwrap()
    };
    let base = q(1);
    for n in [2, 8, 32] {
        let qn = q(n);
        for i in 0..g.len() {
            assert!(qn.inv2[i] <= base.inv2[i] + 3.0 * base.inv2_se[i]);
            // inv2 >= (E[1/Q])^2 up to noise
            let jensen_gap = qn.inv1[i] * qn.inv1[i] - qn.inv2[i];
            assert!(jensen_gap <= 3.0 * (qn.inv2_se[i] + 2.0 * qn.inv1[i] * qn.inv1_se[i]));
            assert!(qn.m1[i] >= 0.0 && qn.m2[i] >= 0.0 && qn.inv2[i] >= 0.0);
        }
    }
}

#[test]
fn empirical_moments_respect_envelope_bounds() {
    let cases: [(f64, f64, usize); 3] = [(0.1, 1.0, 5), (0.5, 3.0, 9), (1.0, 4.0, 4)];
    for (k, &(lo, hi, n)) in cases.iter().enumerate() {
        let g = ThetaGrid::build(lo, hi, n, Metric::Euclidean, WeightRule::UniformTrapezoid).unwrap();
        let truth = tilt_truth(&g);
        let (ell, u): (Vec<f64>, Vec<f64>) = g.nodes().iter().map(|&t| UniformTilt.envelope(t).unwrap()).unzip();
        let env = EnvelopeSpec::new(ell, u).unwrap();
        let spec = PosteriorSpec::new(g.clone(), vec![0.0; n], truth.clone()).unwrap();
        let b = envelope_moment_bounds(&env, &spec, &truth, &EnvelopeScheme::SimpleMc).unwrap();
        for n_samples in [1, 4] {
            let e = simple_mc_recover(&UniformTilt, &g, n_samples, M, SEED + k as u64, true).unwrap();
            let q = q_moments(&e, &truth).unwrap();
            for i in 0..n {
                assert!(q.m2[i] <= b.m2_bound[i] / n_samples as f64 + 3.0 * q.m2_se[i]);
                assert!(q.inv2[i] <= b.inv2_bound[i] + 3.0 * q.inv2_se[i]);
            }
        }
    }

    // Gibbs model under a uniform proposal
    let gm = build_ising(2, 2, false).unwrap();
    let f = GibbsUniform { model: gm };
    let g = ThetaGrid::build(0.1, 0.6, 4, Metric::Euclidean, WeightRule::UniformTrapezoid).unwrap();
    let truth: Vec<f64> = g.nodes().iter().map(|&t| f.exact_z(t).unwrap()).collect();
    let (ell, u): (Vec<f64>, Vec<f64>) = g.nodes().iter().map(|&t| f.envelope(t).unwrap()).unzip();
    let env = EnvelopeSpec::new(ell, u).unwrap();
    let spec = PosteriorSpec::new(g.clone(), vec![0.0; 4], truth.clone()).unwrap();
    let b = envelope_moment_bounds(&env, &spec, &truth, &EnvelopeScheme::SimpleMc).unwrap();
    let e = simple_mc_recover(&f, &g, 3, M, SEED, true).unwrap();
    let q = q_moments(&e, &truth).unwrap();
    for i in 0..4 {
        assert!(q.m2[i] <= b.m2_bound[i] / 3.0 + 3.0 * q.m2_se[i]);
    }
}

#[test]
fn envelope_bounded_schemes_stay_positive() {
    let g = grid(11);
    let e = simple_mc_recover(&UniformTilt, &g, 1, 2_000, SEED, true).unwrap();
    assert!(e.values().iter().all(|v| *v > 0.0 && v.is_finite()));
    let gm = build_ising(2, 2, true).unwrap();
    let e = mis_recover(&gm, &g, &[1.0, 2.0], &[0.5, 0.5], 1, 2_000, SEED).unwrap();
    assert!(e.values().iter().all(|v| *v > 0.0 && v.is_finite()));
}
