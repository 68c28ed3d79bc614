//! Exact distances between grid posteriors.
//!
//! Total variation follows the `sup_{|f| <= 1}` convention, so it equals the
//! plain `L1` distance of the atoms and ranges over `[0, 2]`. This is twice
//! the "half-normalized" convention used by many libraries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::{Exponent, Metric, Posterior, ThetaGrid};
use crate::transport;

/// Largest grid accepted by [`wasserstein_transport`].
pub const TRANSPORT_MAX_NODES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Tv,
    W1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    DensityIntegral,
    CdfFormula,
    TransportLp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceValue {
    pub kind: DistanceKind,
    pub value: f64,
    pub method: DistanceMethod,
}

fn check_same_grid(a: &Posterior, b: &Posterior) -> Result<()> {
    if !a.grid().same_support(b.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `sum_i |a_i - b_i|`, the supremum over test functions bounded by one.
pub fn tv_distance(a: &Posterior, b: &Posterior) -> Result<f64> {
    check_same_grid(a, b)?;
    Ok(tv_atoms(a.atoms(), b.atoms()))
}

pub(crate) fn tv_atoms(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// 1-Wasserstein distance via the integrated CDF difference.
///
/// Only defined for the euclidean metric; use [`wasserstein_transport`] otherwise.
pub fn wasserstein_1d(a: &Posterior, b: &Posterior) -> Result<f64> {
    check_same_grid(a, b)?;
    if a.grid().metric() != Metric::Euclidean {
        return Err(Error::MetricUnsupported);
    }
    Ok(w1_atoms(a.grid().nodes(), a.atoms(), b.atoms()))
}

pub(crate) fn w1_atoms(nodes: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut cdf_gap = 0.0;
    let mut total = 0.0;
    for k in 0..nodes.len() - 1 {
        cdf_gap += a[k] - b[k];
        total += cdf_gap.abs() * (nodes[k + 1] - nodes[k]);
    }
    total
}

/// 1-Wasserstein distance as the optimum of the discrete transportation problem.
///
/// Works for any metric on the grid. The solver is a successive-shortest-path
/// min-cost flow, which terminates with an exact optimal vertex.
pub fn wasserstein_transport(a: &Posterior, b: &Posterior) -> Result<f64> {
    check_same_grid(a, b)?;
    let grid = a.grid();
    if grid.len() > TRANSPORT_MAX_NODES {
        return Err(Error::BudgetExceeded {
            size: grid.len(),
            limit: TRANSPORT_MAX_NODES,
        });
    }
    let nodes = grid.nodes();
    let metric = grid.metric();
    let plan = transport::solve(a.atoms(), b.atoms(), |i, j| {
        metric.distance(nodes[i], nodes[j])
    })?;
    Ok(plan.cost)
}

/// `|nu|^(p) = inf_{theta_0} (sum_i d(theta_0, theta_i)^p nu_i)^(1/p)`, with
/// `theta_0` restricted to grid nodes.
pub fn moment_p(nu: &Posterior, p: f64) -> Result<f64> {
    let p = Exponent::new(p)?;
    Ok(moment_of_masses(nu.grid(), nu.atoms(), p))
}

/// Moment functional for an arbitrary (not necessarily normalized) measure on a grid.
///
/// `p = inf` gives `inf_{theta_0} max_{nu_i > 0} d(theta_0, theta_i)`.
pub fn moment_of_masses(grid: &ThetaGrid, masses: &[f64], p: Exponent) -> f64 {
    let nodes = grid.nodes();
    let metric = grid.metric();
    nodes
        .iter()
        .map(|&t0| {
            let dist = nodes.iter().map(|&t| metric.distance(t0, t));
            match p {
                Exponent::Infinity => dist
                    .zip(masses)
                    .filter(|(_, m)| **m > 0.0)
                    .map(|(d, _)| d)
                    .fold(0.0, f64::max),
                Exponent::Finite(1.0) => dist.zip(masses).map(|(d, m)| d * m).sum(),
                Exponent::Finite(2.0) => {
                    dist.zip(masses).map(|(d, m)| d * d * m).sum::<f64>().sqrt()
                }
                Exponent::Finite(q) => dist
                    .zip(masses)
                    .map(|(d, m)| d.powf(q) * m)
                    .sum::<f64>()
                    .powf(1.0 / q),
            }
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::WeightRule;

    fn counting(nodes: Vec<f64>) -> ThetaGrid {
        ThetaGrid::counting(nodes, Metric::Euclidean).unwrap()
    }

    fn post(grid: &ThetaGrid, atoms: &[f64]) -> Posterior {
        Posterior::from_atoms(grid.clone(), atoms.to_vec()).unwrap()
    }

    #[test]
    fn tv_examples() {
        let g = counting(vec![0.0, 1.0, 2.0]);
        let a = post(&g, &[0.5, 0.25, 0.25]);
        let b = post(&g, &[0.25, 0.5, 0.25]);
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(tv_distance(&a, &b).unwrap(), 0.5);
        let g2 = counting(vec![0.0, 1.0]);
        let c = post(&g2, &[0.5, 0.5]);
        let d = post(&g2, &[2.0 / 3.0, 1.0 / 3.0]);
        assert!((tv_distance(&c, &d).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(tv_distance(&a, &c), Err(Error::GridMismatch));
    }

    #[test]
    fn w1_examples() {
        let g2 = counting(vec![0.0, 1.0]);
        let c = post(&g2, &[0.5, 0.5]);
        let d = post(&g2, &[2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(wasserstein_1d(&c, &c).unwrap(), 0.0);
        assert!((wasserstein_1d(&c, &d).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        let g = counting(vec![0.0, 1.0, 2.0]);
        let a = post(&g, &[0.5, 0.25, 0.25]);
        let b = post(&g, &[0.25, 0.5, 0.25]);
        assert_eq!(wasserstein_1d(&a, &b).unwrap(), 0.25);
    }

    #[test]
    fn w1_rejects_truncated_metric() {
        let g = ThetaGrid::counting(vec![0.0, 1.0], Metric::Truncated { radius: 0.3 }).unwrap();
        let a = post(&g, &[1.0, 0.0]);
        assert_eq!(wasserstein_1d(&a, &a), Err(Error::MetricUnsupported));
    }

    #[test]
    fn transport_examples() {
        let g = counting(vec![0.0, 1.0, 2.0]);
        let a = post(&g, &[0.5, 0.25, 0.25]);
        let b = post(&g, &[0.25, 0.5, 0.25]);
        assert_eq!(wasserstein_transport(&a, &a).unwrap(), 0.0);
        assert!((wasserstein_transport(&a, &b).unwrap() - 0.25).abs() < 1e-15);
        let t = ThetaGrid::counting(vec![0.0, 1.0], Metric::Truncated { radius: 0.3 }).unwrap();
        let x = post(&t, &[1.0, 0.0]);
        let y = post(&t, &[0.0, 1.0]);
        assert!((wasserstein_transport(&x, &y).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn transport_budget() {
        let g = ThetaGrid::build(0.0, 1.0, 513, Metric::Euclidean, WeightRule::UniformTrapezoid)
            .unwrap();
        let mut atoms = vec![0.0; 513];
        atoms[0] = 1.0;
        let a = post(&g, &atoms);
        assert!(matches!(
            wasserstein_transport(&a, &a),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn moment_examples() {
        let g = counting(vec![0.0, 1.0, 2.0]);
        let point = post(&g, &[0.0, 1.0, 0.0]);
        assert_eq!(moment_p(&point, 1.0).unwrap(), 0.0);
        assert_eq!(moment_p(&point, 2.0).unwrap(), 0.0);
        let uniform = post(&g, &[1.0, 1.0, 1.0]);
        assert!((moment_p(&uniform, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let t = ThetaGrid::counting(vec![0.0, 5.0, 10.0], Metric::Truncated { radius: 1.5 })
            .unwrap();
        let spread = post(&t, &[0.3, 0.3, 0.4]);
        for p in [1.0, 2.0, 7.0] {
            assert!(moment_p(&spread, p).unwrap() <= 1.5);
        }
        assert!(moment_p(&spread, 0.5).is_err());
    }

    #[test]
    fn infinite_moment_is_support_radius() {
        let g = counting(vec![0.0, 1.0, 2.0, 3.0]);
        let m = moment_of_masses(&g, &[1.0, 0.0, 1.0, 0.0], Exponent::Infinity);
        assert_eq!(m, 1.0);
    }
}
