//! Parameter grids, posterior specifications and exact grid posteriors.
//!
//! A posterior is built from a potential `phi` and a positive normalizing
//! function `z` on a [`ThetaGrid`]:
//!
//! ```text
//! pi_Z(dtheta) = exp(-phi(theta)) / (z(theta) * C_Z) mu(dtheta)
//! C_Z          = sum_i w_i exp(-phi_i) / z_i
//! ```
//!
//! The reference measure `mu` is carried entirely by the grid's quadrature
//! weights, so counting measure, trapezoid-Lebesgue and prior-weighted
//! measures are all just different weight vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metric on the parameter line.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Metric {
    /// `d(a, b) = |a - b|`
    #[default]
    Euclidean,
    /// `d(a, b) = min(R, |a - b|)`
    Truncated {
        #[serde(rename = "R")]
        radius: f64,
    },
}

impl Metric {
    #[inline]
    pub fn distance(&self, a: f64, b: f64) -> f64 {
        match *self {
            Metric::Euclidean => (a - b).abs(),
            Metric::Truncated { radius } => (a - b).abs().min(radius),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Metric::Euclidean => Ok(()),
            Metric::Truncated { radius } if radius > 0.0 && radius.is_finite() => Ok(()),
            Metric::Truncated { radius } => Err(Error::InvalidGrid(format!(
                "truncated metric needs a positive finite radius, got {radius}"
            ))),
        }
    }
}

/// Norm exponent in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(Exponent::Infinity)
        } else if p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::InvalidArgument(format!("exponent must be >= 1, got {p}")))
        }
    }

    /// Hölder conjugate `p / (p - 1)`, with `1 -> inf` and `inf -> 1`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(1.0) => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    pub fn scale(self, factor: f64) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p * factor),
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Infinity => f64::INFINITY,
            Exponent::Finite(p) => p,
        }
    }
}

/// How quadrature weights are assigned by [`ThetaGrid::build`].
#[derive(Debug, Clone, PartialEq)]
pub enum WeightRule {
    /// Trapezoid weights `(h/2, h, ..., h, h/2)`: Lebesgue measure on `[lo, hi]`.
    UniformTrapezoid,
    /// Explicit weights, one per node.
    Custom(Vec<f64>),
}

/// Discretized one-dimensional parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    metric: Metric,
}

impl ThetaGrid {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, metric: Metric) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        if weights.len() != nodes.len() {
            return Err(Error::LengthMismatch {
                expected: nodes.len(),
                got: weights.len(),
            });
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("nodes must be finite".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("nodes must be strictly increasing".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "weights must be finite and nonnegative, got {w}"
            )));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::InvalidGrid("at least one weight must be positive".into()));
        }
        metric.validate()?;
        Ok(Self {
            nodes,
            weights,
            metric,
        })
    }

    /// Equispaced grid on `[lo, hi]` with `n` nodes.
    pub fn build(lo: f64, hi: f64, n: usize, metric: Metric, rule: WeightRule) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidGrid(format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need n >= 2, got {n}")));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
        // pin the right end exactly
        nodes[n - 1] = hi;
        let weights = match rule {
            WeightRule::UniformTrapezoid => {
                let mut w = vec![h; n];
                w[0] = h / 2.0;
                w[n - 1] = h / 2.0;
                w
            }
            WeightRule::Custom(w) => w,
        };
        Self::new(nodes, weights, metric)
    }

    /// Counting measure on the given nodes.
    pub fn counting(nodes: Vec<f64>, metric: Metric) -> Result<Self> {
        let w = vec![1.0; nodes.len()];
        Self::new(nodes, w, metric)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Largest metric distance between two nodes.
    pub fn diameter(&self) -> f64 {
        self.metric.distance(self.lo(), self.hi())
    }

    /// Same nodes and metric (weights may differ).
    pub fn same_support(&self, other: &ThetaGrid) -> bool {
        self.nodes == other.nodes && self.metric == other.metric
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.nodes.clone(), weights, self.metric)
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.nodes.len() {
            return Err(Error::LengthMismatch {
                expected: self.nodes.len(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Potential and normalizing function tabulated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct PosteriorSpec {
    grid: ThetaGrid,
    phi: Vec<f64>,
    z: Vec<f64>,
}

impl PosteriorSpec {
    pub fn new(grid: ThetaGrid, phi: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        grid.check_len(phi.len())?;
        grid.check_len(z.len())?;
        if let Some((i, v)) = phi.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!("phi[{i}] = {v} is not finite")));
        }
        if let Some((i, v)) = z
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidSpec(format!(
                "z[{i}] = {v} must be positive and finite"
            )));
        }
        Ok(Self { grid, phi, z })
    }

    pub fn grid(&self) -> &ThetaGrid {
        &self.grid
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Same grid and potential, different normalizing function.
    pub fn with_z(&self, z: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), self.phi.clone(), z)
    }

    pub fn min_phi(&self) -> f64 {
        self.phi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `exp(-phi_i) / z_i` at every node.
    pub fn boltzmann_over_z(&self) -> Vec<f64> {
        self.phi
            .iter()
            .zip(&self.z)
            .map(|(p, z)| (-p).exp() / z)
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    phi: Vec<f64>,
    z: Vec<f64>,
    metric: Metric,
}

impl TryFrom<RawSpec> for PosteriorSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let grid = ThetaGrid::new(raw.nodes, raw.weights, raw.metric)?;
        PosteriorSpec::new(grid, raw.phi, raw.z)
    }
}

impl From<PosteriorSpec> for RawSpec {
    fn from(spec: PosteriorSpec) -> Self {
        RawSpec {
            nodes: spec.grid.nodes,
            weights: spec.grid.weights,
            phi: spec.phi,
            z: spec.z,
            metric: spec.grid.metric,
        }
    }
}

/// Exact probability measure on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    grid: ThetaGrid,
    density: Vec<f64>,
    c_z: f64,
    atoms: Vec<f64>,
}

impl Posterior {
    pub fn grid(&self) -> &ThetaGrid {
        &self.grid
    }

    /// Density w.r.t. the grid measure.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn normalizing_constant(&self) -> f64 {
        self.c_z
    }

    /// Atom masses `density_i * w_i`, summing to one.
    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    /// Point mass or arbitrary atoms on a grid, bypassing `phi`/`z`.
    ///
    /// Atoms are renormalized; `c_z` is set to one. Nodes with zero weight must
    /// carry zero mass.
    pub fn from_atoms(grid: ThetaGrid, atoms: Vec<f64>) -> Result<Self> {
        grid.check_len(atoms.len())?;
        if atoms.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidArgument("atoms must be finite and nonnegative".into()));
        }
        let total: f64 = atoms.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegeneratePosterior(total));
        }
        let mut density = Vec::with_capacity(atoms.len());
        let mut normalized = Vec::with_capacity(atoms.len());
        for (a, w) in atoms.iter().zip(grid.weights()) {
            let m = a / total;
            if m > 0.0 && *w == 0.0 {
                return Err(Error::InvalidArgument(
                    "positive atom on a zero-weight node".into(),
                ));
            }
            normalized.push(m);
            density.push(if *w > 0.0 { m / w } else { 0.0 });
        }
        Ok(Self {
            grid,
            density,
            c_z: 1.0,
            atoms: normalized,
        })
    }
}

/// `C_Z = sum_i w_i exp(-phi_i) / z_i`.
pub fn normalizing_constant(spec: &PosteriorSpec) -> Result<f64> {
    let (shifted, shift) = shifted_constant(spec);
    let c = shifted * (-shift).exp();
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::DegeneratePosterior(c));
    }
    Ok(c)
}

// Sum of w_i exp(-(phi_i - min phi)) / z_i, and the shift used.
fn shifted_constant(spec: &PosteriorSpec) -> (f64, f64) {
    let shift = spec.min_phi();
    let s = spec
        .grid
        .weights
        .iter()
        .zip(&spec.phi)
        .zip(&spec.z)
        .map(|((w, p), z)| w * (-(p - shift)).exp() / z)
        .sum();
    (s, shift)
}

/// Builds `pi_Z`. Potentials are shifted by `min(phi)` before exponentiation.
pub fn build_posterior(spec: &PosteriorSpec) -> Result<Posterior> {
    let c_z = normalizing_constant(spec)?;
    let (shifted, shift) = shifted_constant(spec);
    if !(shifted.is_finite() && shifted > 0.0) {
        return Err(Error::DegeneratePosterior(shifted));
    }
    let density: Vec<f64> = spec
        .phi
        .iter()
        .zip(&spec.z)
        .map(|(p, z)| (-(p - shift)).exp() / (z * shifted))
        .collect();
    let atoms = density
        .iter()
        .zip(&spec.grid.weights)
        .map(|(d, w)| d * w)
        .collect();
    Ok(Posterior {
        grid: spec.grid.clone(),
        density,
        c_z,
        atoms,
    })
}

/// Atom masses of `pi_Z` for `(phi, z)` on `weights`, without building a [`Posterior`].
///
/// Used in hot loops over ensemble replicates. Returns `None` when the
/// posterior is degenerate.
pub fn posterior_atoms(weights: &[f64], phi: &[f64], z: &[f64], out: &mut Vec<f64>) -> Option<()> {
    let shift = phi.iter().copied().fold(f64::INFINITY, f64::min);
    out.clear();
    let mut total = 0.0;
    for ((w, p), zi) in weights.iter().zip(phi).zip(z) {
        let m = w * (-(p - shift)).exp() / zi;
        total += m;
        out.push(m);
    }
    if !(total.is_finite() && total > 0.0) {
        return None;
    }
    out.iter_mut().for_each(|m| *m /= total);
    Some(())
}

/// Weighted `L^p` norm of `values` under the masses `measure`.
///
/// For `p = inf` the maximum is taken over nodes of positive mass.
pub fn lp_norm(values: &[f64], measure: &[f64], p: Exponent) -> Result<f64> {
    if values.len() != measure.len() {
        return Err(Error::LengthMismatch {
            expected: measure.len(),
            got: values.len(),
        });
    }
    Ok(match p {
        Exponent::Infinity => values
            .iter()
            .zip(measure)
            .filter(|(_, m)| **m > 0.0)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max),
        Exponent::Finite(1.0) => {
            values.iter().zip(measure).map(|(v, m)| v.abs() * m).sum()
        }
        Exponent::Finite(2.0) => values
            .iter()
            .zip(measure)
            .map(|(v, m)| v * v * m)
            .sum::<f64>()
            .sqrt(),
        Exponent::Finite(p) => values
            .iter()
            .zip(measure)
            .map(|(v, m)| v.abs().powf(p) * m)
            .sum::<f64>()
            .powf(1.0 / p),
    })
}
