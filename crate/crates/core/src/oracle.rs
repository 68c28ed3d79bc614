//! Brute-force reference computations, independent of the main code paths.
//!
//! * Ising energies from an adjacency matrix and a naive double loop.
//! * Total variation as a maximum over sign test functions.
//! * 1-D Wasserstein distance as a maximum over extreme 1-Lipschitz test
//!   functions (slopes of `+-1` between consecutive nodes).
//! * The optimal rescaling by a dense scan.
//! * A randomized sweep checking that every applicable bound dominates the
//!   exact distance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{BoundKind, BoundOptions, BoundReport, HolderContext, DOMINATION_TOLERANCE};
use crate::error::Result;
use crate::gibbs::{build_ising, exact_partition};
use crate::metrics::{tv_distance, wasserstein_1d, wasserstein_transport};
use crate::posterior::{
    build_posterior, lp_norm, Exponent, Metric, Posterior, PosteriorSpec, ThetaGrid,
};

/// Largest grid accepted by the enumeration oracles.
pub const ENUMERATION_MAX_NODES: usize = 16;

/// `H(x) = -sum_{i<j} A_ij s_i s_j` with `A` the lattice adjacency matrix.
pub fn naive_ising_energies(rows: usize, cols: usize, wrap: bool) -> Vec<f64> {
    let sites = rows * cols;
    let mut adj = vec![vec![false; sites]; sites];
    for r in 0..rows {
        for c in 0..cols {
            let a = r * cols + c;
            let mut link = |b: usize| {
                if a != b {
                    adj[a][b] = true;
                    adj[b][a] = true;
                }
            };
            if c + 1 < cols {
                link(r * cols + c + 1);
            } else if wrap {
                link(r * cols);
            }
            if r + 1 < rows {
                link((r + 1) * cols + c);
            } else if wrap {
                link(c);
            }
        }
    }
    (0..1usize << sites)
        .map(|x| {
            let s = |i: usize| if x >> i & 1 == 0 { 1.0 } else { -1.0 };
            let mut h = 0.0;
            for i in 0..sites {
                for j in i + 1..sites {
                    if adj[i][j] {
                        h -= s(i) * s(j);
                    }
                }
            }
            h
        })
        .collect()
}

/// `sum_x exp(-beta H(x))` in state order.
pub fn naive_partition(energies: &[f64], beta: f64) -> f64 {
    let mut z = 0.0;
    for h in energies {
        z += (-(beta * h)).exp();
    }
    z
}

/// `max_{f in {-1,1}^n} sum_i f_i (a_i - b_i)`.
pub fn tv_by_signs(a: &[f64], b: &[f64]) -> f64 {
    assert!(a.len() <= ENUMERATION_MAX_NODES);
    let n = a.len();
    (0..1u32 << n)
        .map(|mask| {
            (0..n)
                .map(|i| if mask >> i & 1 == 1 { a[i] - b[i] } else { b[i] - a[i] })
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `max_f sum_i f_i (a_i - b_i)` over the extreme 1-Lipschitz functions on sorted nodes.
pub fn w1_by_lipschitz(nodes: &[f64], a: &[f64], b: &[f64]) -> f64 {
    assert!(nodes.len() <= ENUMERATION_MAX_NODES);
    let n = nodes.len();
    if n < 2 {
        return 0.0;
    }
    (0..1u32 << (n - 1))
        .map(|mask| {
            let mut f = 0.0;
            let mut total = 0.0;
            for i in 0..n {
                if i > 0 {
                    let step = nodes[i] - nodes[i - 1];
                    f += if mask >> (i - 1) & 1 == 1 { step } else { -step };
                }
                total += f * (a[i] - b[i]);
            }
            total
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `2 min_a ||a Z/Zt - 1||_{pi_Z,1}` over `points` log-spaced values of `a`
/// in `[1e-4, 1e4]` times the mean ratio.
pub fn rescaled_tv_scan(pi_z: &Posterior, ratio: &[f64], points: usize) -> f64 {
    let m = pi_z.atoms();
    let center: f64 = ratio.iter().zip(m).map(|(r, w)| r * w).sum();
    (0..points)
        .map(|k| {
            let t = -4.0 + 8.0 * k as f64 / (points - 1) as f64;
            let a = 10f64.powf(t) / center;
            2.0 * ratio.iter().zip(m).map(|(r, w)| (a * r - 1.0).abs() * w).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// A random `(Z, Zt)` pair with bound hypotheses, some of them deliberately violated.
pub struct RandomPair {
    pub spec_z: PosteriorSpec,
    pub spec_zt: PosteriorSpec,
    pub options: BoundOptions,
}

pub fn random_pair<R: Rng>(rng: &mut R, n_range: std::ops::RangeInclusive<usize>) -> RandomPair {
    let n = rng.random_range(n_range);
    let mut t = rng.random_range(-2.0..2.0);
    let nodes: Vec<f64> = (0..n)
        .map(|_| {
            let v = t;
            t += rng.random_range(0.05..1.0);
            v
        })
        .collect();
    let metric = if rng.random_bool(0.2) {
        Metric::Truncated {
            radius: rng.random_range(0.2..3.0),
        }
    } else {
        Metric::Euclidean
    };
    let grid = if rng.random_bool(0.5) {
        ThetaGrid::counting(nodes, metric)
    } else {
        let w = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        ThetaGrid::new(nodes, w, metric)
    }
    .expect("valid random grid");
    let phi: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let z: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect();
    let zt: Vec<f64> = if rng.random_bool(0.1) {
        let c = rng.random_range(-3.0f64..3.0).exp();
        z.iter().map(|v| c * v).collect()
    } else {
        let s: f64 = [0.01, 0.3, 2.0][rng.random_range(0..3)];
        z.iter().map(|v| v * rng.random_range(-s..s).exp()).collect()
    };
    let spec_z = PosteriorSpec::new(grid, phi, z).expect("valid random spec");
    let spec_zt = spec_z.with_z(zt).expect("valid random spec");

    let p = [
        Exponent::Finite(1.0),
        Exponent::Finite(1.5),
        Exponent::Finite(2.0),
        Exponent::Finite(4.0),
        Exponent::Infinity,
    ][rng.random_range(0..5)];
    let norm = |s: &PosteriorSpec| {
        lp_norm(&s.boltzmann_over_z(), s.grid().weights(), p).expect("aligned")
    };
    let k_true = norm(&spec_z).max(norm(&spec_zt));
    let k = if rng.random_bool(0.1) {
        0.5 * k_true
    } else {
        k_true * (1.0 + rng.random_range(0.0..0.3))
    };
    let min_zt = spec_zt.z().iter().copied().fold(f64::INFINITY, f64::min);
    let ell = if rng.random_bool(0.1) {
        2.0 * min_zt
    } else {
        min_zt * rng.random_range(0.3..=1.0)
    };
    let options = BoundOptions {
        holder: Some(HolderContext { p, k, ell: Some(ell) }),
        ell: Some(ell),
        eps: rng.random_bool(0.5).then(|| rng.random_range(0.01..1.0)),
    };
    RandomPair {
        spec_z,
        spec_zt,
        options,
    }
}

/// Outcome of a randomized bound sweep.
#[derive(Debug, Clone, Default)]
pub struct SweepSummary {
    pub instances: usize,
    pub applicable: usize,
    pub not_applicable: usize,
    pub violations: Vec<String>,
}

/// Evaluates every bound family on `count` random pairs.
pub fn bound_sweep(count: usize, seed: u64) -> Result<SweepSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SweepSummary::default();
    for k in 0..count {
        let pair = random_pair(&mut rng, 2..=64);
        let report = BoundReport::evaluate(&pair.spec_z, &pair.spec_zt, &BoundKind::ALL, &pair.options)?;
        out.instances += 1;
        for e in &report.entries {
            if e.bound.is_applicable() {
                out.applicable += 1;
            } else {
                out.not_applicable += 1;
            }
        }
        for v in report.violations(DOMINATION_TOLERANCE) {
            out.violations.push(format!(
                "instance {k}: {} = {:?} below true {}",
                v.name,
                v.value(),
                v.dominates
            ));
        }
    }
    Ok(out)
}

/// One oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> OracleCheck {
    OracleCheck { name, passed, detail }
}

fn ising_checks() -> Result<Vec<OracleCheck>> {
    let betas: Vec<f64> = (0..50).map(|k| -1.5 + 4.5 * k as f64 / 49.0).collect();
    let gm = build_ising(1, 2, false)?;
    let mut worst = 0.0f64;
    for &b in &betas {
        worst = worst.max((exact_partition(&gm, b)? - 4.0 * b.cosh()).abs());
    }
    let cosh = check(
        "ising-1x2-cosh",
        worst <= 1e-12,
        format!("max |Z - 4 cosh beta| = {worst:e} over 50 beta"),
    );

    let mut mismatches = 0;
    for (rows, cols, wrap) in [(2, 2, false), (2, 2, true), (3, 3, true), (1, 4, true)] {
        let gm = build_ising(rows, cols, wrap)?;
        let naive = naive_ising_energies(rows, cols, wrap);
        if gm.hamiltonian() != Some(&naive[..]) {
            mismatches += 1;
        }
        for &b in &betas {
            if exact_partition(&gm, b)?.to_bits() != naive_partition(&naive, b).to_bits() {
                mismatches += 1;
            }
        }
    }
    let naive = check(
        "ising-naive-enumeration",
        mismatches == 0,
        format!("{mismatches} bitwise mismatches against the double-loop oracle"),
    );
    Ok(vec![cosh, naive])
}

fn random_posteriors(rng: &mut ChaCha8Rng, n: usize, metric: Metric) -> Result<(Posterior, Posterior)> {
    let mut t = 0.0;
    let nodes: Vec<f64> = (0..n)
        .map(|_| {
            t += rng.random_range(0.01..1.0);
            t
        })
        .collect();
    let grid = ThetaGrid::counting(nodes, metric)?;
    let mut draw = || -> Vec<f64> {
        let mut v: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() })
            .collect();
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        v
    };
    let (a, b) = (draw(), draw());
    Ok((
        Posterior::from_atoms(grid.clone(), a)?,
        Posterior::from_atoms(grid, b)?,
    ))
}

fn distance_checks(seed: u64) -> Result<Vec<OracleCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..=64);
        let (a, b) = random_posteriors(&mut rng, n, Metric::Euclidean)?;
        worst = worst.max((wasserstein_1d(&a, &b)? - wasserstein_transport(&a, &b)?).abs());
    }
    let duality = check(
        "w1-cdf-vs-transport",
        worst <= 1e-9,
        format!("max gap {worst:e} over 200 pairs"),
    );

    let (mut tv_gap, mut w_gap, mut sup_excess) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for _ in 0..100 {
        let n = rng.random_range(2..=12);
        let (a, b) = random_posteriors(&mut rng, n, Metric::Euclidean)?;
        let tv = tv_distance(&a, &b)?;
        tv_gap = tv_gap.max((tv - tv_by_signs(a.atoms(), b.atoms())).abs());
        w_gap = w_gap.max((wasserstein_1d(&a, &b)? - w1_by_lipschitz(a.grid().nodes(), a.atoms(), b.atoms())).abs());
        for _ in 0..20 {
            let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let v: f64 = f.iter().zip(a.atoms().iter().zip(b.atoms())).map(|(f, (x, y))| f * (x - y)).sum();
            sup_excess = sup_excess.max(v - tv);
        }
    }
    Ok(vec![
        duality,
        check(
            "tv-sign-enumeration",
            tv_gap <= 1e-12 && sup_excess <= 1e-12,
            format!("max gap {tv_gap:e}; random test functions exceed TV by at most {sup_excess:e}"),
        ),
        check(
            "w1-lipschitz-enumeration",
            w_gap <= 1e-12,
            format!("max gap {w_gap:e} over 100 pairs"),
        ),
    ])
}

fn worked_example() -> Result<OracleCheck> {
    let g = ThetaGrid::counting(vec![0.0, 1.0], Metric::Euclidean)?;
    let spec = PosteriorSpec::new(g, vec![0.0, 0.0], vec![1.0, 1.0])?;
    let spec_t = spec.with_z(vec![1.0, 2.0])?;
    let a = build_posterior(&spec)?;
    let b = build_posterior(&spec_t)?;
    let tv = tv_by_signs(a.atoms(), b.atoms());
    let w1 = w1_by_lipschitz(a.grid().nodes(), a.atoms(), b.atoms());
    let report = BoundReport::evaluate(&spec, &spec_t, &[BoundKind::TvBasic, BoundKind::W1TwoTerm], &BoundOptions::default())?;
    let basic = report.entry("tv_basic").and_then(|e| e.value()).unwrap_or(f64::NAN);
    let two = report.entry("w1_two_term").and_then(|e| e.value()).unwrap_or(f64::NAN);
    let ok = (tv - 1.0 / 3.0).abs() <= 1e-12
        && (w1 - 1.0 / 6.0).abs() <= 1e-12
        && (basic - 0.5).abs() <= 1e-12
        && (two - 1.0 / 3.0).abs() <= 1e-12
        && (report.true_tv.unwrap_or(f64::NAN) - tv).abs() <= 1e-12
        && (report.true_w1.unwrap_or(f64::NAN) - w1).abs() <= 1e-12;
    Ok(check(
        "two-node-worked-example",
        ok,
        format!("tv {tv}, w1 {w1}, tv_basic {basic}, w1_two_term {two}"),
    ))
}

fn rescaling_check(seed: u64) -> Result<OracleCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let pair = random_pair(&mut rng, 2..=24);
        let pi_z = build_posterior(&pair.spec_z)?;
        let ratio: Vec<f64> = pair.spec_z.z().iter().zip(pair.spec_zt.z()).map(|(a, b)| a / b).collect();
        let scan = rescaled_tv_scan(&pi_z, &ratio, 20_001);
        let lib = crate::bounds::tv_bound_rescaled(&pair.spec_z, &pair.spec_zt)?.l1;
        worst = worst.max(lib - scan);
    }
    Ok(check(
        "rescaled-tv-dense-scan",
        worst <= 1e-12,
        format!("optimized value exceeds the dense scan by at most {worst:e}"),
    ))
}

fn sweep_check(seed: u64) -> Result<OracleCheck> {
    let s = bound_sweep(500, seed)?;
    Ok(check(
        "bound-domination-sweep",
        s.violations.is_empty(),
        format!(
            "{} instances, {} applicable and {} inapplicable bounds, {} violations{}",
            s.instances,
            s.applicable,
            s.not_applicable,
            s.violations.len(),
            s.violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    ))
}

/// Runs every oracle suite.
pub fn run_all(seed: u64) -> Result<Vec<OracleCheck>> {
    let mut out = ising_checks()?;
    out.extend(distance_checks(seed)?);
    out.push(worked_example()?);
    out.push(rescaling_check(seed ^ 0x5eed)?);
    out.push(sweep_check(seed)?);
    Ok(out)
}
