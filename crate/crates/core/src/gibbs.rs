//! Finite-state Gibbs models with exact enumeration.
//!
//! A model assigns an energy `h(x, theta)` to every state `x` of a finite set.
//! The default parametrization is the inverse-temperature form
//! `h(x, theta) = theta * H(x)`; [`Energy::Tabulated`] allows arbitrary
//! energies given per listed `theta`.
//!
//! Ising states are bit-encoded: bit `b` of the state index is the spin at site
//! `b` (row-major), `0 -> +1` and `1 -> -1`. State `0` is all spins up.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EnvelopeSpec;
use crate::posterior::{PosteriorSpec, ThetaGrid};

/// Enumeration budget.
pub const MAX_STATES: usize = 1 << 20;
/// Largest lattice accepted by [`build_ising`].
pub const MAX_SITES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Ising {
        rows: usize,
        cols: usize,
        #[serde(default)]
        wrap: bool,
    },
    Table {
        energies: Vec<f64>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<GibbsModel> {
        match self {
            ModelSpec::Ising { rows, cols, wrap } => build_ising(*rows, *cols, *wrap),
            ModelSpec::Table { energies } => GibbsModel::from_energies(energies.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ising { rows: usize, cols: usize, wrap: bool },
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Energy {
    /// `h(x, theta) = theta * H(x)`
    Linear(Vec<f64>),
    /// `h(x, thetas[k]) = values[x * thetas.len() + k]`; other `theta` are rejected.
    Tabulated { thetas: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsModel {
    kind: ModelKind,
    energy: Energy,
    num_states: usize,
}

impl GibbsModel {
    /// Table model with `h(x, theta) = theta * energies[x]`.
    pub fn from_energies(energies: Vec<f64>) -> Result<Self> {
        if energies.is_empty() || energies.len() > MAX_STATES {
            return Err(Error::BudgetExceeded {
                size: energies.len(),
                limit: MAX_STATES,
            });
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite("energy table".into()));
        }
        Ok(Self {
            kind: ModelKind::Table,
            num_states: energies.len(),
            energy: Energy::Linear(energies),
        })
    }

    /// Fully tabulated energies `values[x][k] = h(x, thetas[k])`.
    pub fn from_tabulated(num_states: usize, thetas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_states > MAX_STATES {
            return Err(Error::BudgetExceeded {
                size: num_states,
                limit: MAX_STATES,
            });
        }
        if values.len() != num_states * thetas.len() {
            return Err(Error::LengthMismatch {
                expected: num_states * thetas.len(),
                got: values.len(),
            });
        }
        if values.iter().chain(&thetas).any(|e| !e.is_finite()) {
            return Err(Error::NonFinite("energy table".into()));
        }
        Ok(Self {
            kind: ModelKind::Table,
            num_states,
            energy: Energy::Tabulated { thetas, values },
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn energy(&self) -> &Energy {
        &self.energy
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// `H(x)` for linear models.
    pub fn hamiltonian(&self) -> Option<&[f64]> {
        match &self.energy {
            Energy::Linear(h) => Some(h),
            Energy::Tabulated { .. } => None,
        }
    }

    /// Same model with every `H(x)` shifted by `c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        match &self.energy {
            Energy::Linear(h) => Ok(Self {
                kind: self.kind,
                energy: Energy::Linear(h.iter().map(|e| e + c).collect()),
                num_states: self.num_states,
            }),
            Energy::Tabulated { .. } => Err(Error::InvalidArgument(
                "shift is defined for linear energies only".into(),
            )),
        }
    }

    fn table_column(&self, theta: f64) -> Result<usize> {
        match &self.energy {
            Energy::Tabulated { thetas, .. } => thetas
                .iter()
                .position(|t| *t == theta)
                .ok_or_else(|| Error::InvalidArgument(format!("theta = {theta} is not tabulated"))),
            Energy::Linear(_) => unreachable!(),
        }
    }

    pub fn h(&self, x: usize, theta: f64) -> Result<f64> {
        if x >= self.num_states {
            return Err(Error::InvalidArgument(format!(
                "state {x} out of range 0..{}",
                self.num_states
            )));
        }
        match &self.energy {
            Energy::Linear(h) => Ok(theta * h[x]),
            Energy::Tabulated { thetas, values } => {
                let k = self.table_column(theta)?;
                Ok(values[x * thetas.len() + k])
            }
        }
    }

    /// `h(., theta)` over all states.
    pub fn h_column(&self, theta: f64) -> Result<Vec<f64>> {
        if !theta.is_finite() {
            return Err(Error::NonFinite(format!("theta = {theta}")));
        }
        match &self.energy {
            Energy::Linear(h) => Ok(h.iter().map(|e| theta * e).collect()),
            Energy::Tabulated { thetas, values } => {
                let k = self.table_column(theta)?;
                Ok((0..self.num_states).map(|x| values[x * thetas.len() + k]).collect())
            }
        }
    }

    /// Parses a state index (`"5"`) or a spin string (`"+-+-"`, Ising only).
    pub fn parse_state(&self, s: &str) -> Result<usize> {
        let s = s.trim();
        if let Ok(i) = s.parse::<usize>() {
            return self.check_state(i);
        }
        let sites = match self.kind {
            ModelKind::Ising { rows, cols, .. } => rows * cols,
            ModelKind::Table => {
                return Err(Error::InvalidArgument(format!("bad state {s:?}")));
            }
        };
        if s.chars().count() != sites {
            return Err(Error::InvalidArgument(format!(
                "spin string {s:?} must have {sites} characters"
            )));
        }
        let mut idx = 0usize;
        for (b, c) in s.chars().enumerate() {
            match c {
                '+' => {}
                '-' => idx |= 1 << b,
                _ => return Err(Error::InvalidArgument(format!("bad spin {c:?} in {s:?}"))),
            }
        }
        Ok(idx)
    }

    pub fn check_state(&self, x: usize) -> Result<usize> {
        if x < self.num_states {
            Ok(x)
        } else {
            Err(Error::InvalidArgument(format!(
                "state {x} out of range 0..{}",
                self.num_states
            )))
        }
    }
}

/// Observed state used as data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservedDatum {
    Index(usize),
    Spins(String),
}

impl ObservedDatum {
    pub fn resolve(&self, gm: &GibbsModel) -> Result<usize> {
        match self {
            ObservedDatum::Index(i) => gm.check_state(*i),
            ObservedDatum::Spins(s) => gm.parse_state(s),
        }
    }
}

/// Spin at `site` for state `x`.
#[inline]
pub fn spin(x: usize, site: usize) -> f64 {
    if (x >> site) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Nearest-neighbour edges of a `rows x cols` lattice, each pair listed once.
pub fn lattice_edges(rows: usize, cols: usize, wrap: bool) -> Vec<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for r in 0..rows {
        for c in 0..cols {
            let a = r * cols + c;
            let right = if c + 1 < cols {
                Some(r * cols + c + 1)
            } else if wrap {
                Some(r * cols)
            } else {
                None
            };
            let down = if r + 1 < rows {
                Some((r + 1) * cols + c)
            } else if wrap {
                Some(c)
            } else {
                None
            };
            for b in [right, down].into_iter().flatten() {
                if a != b {
                    edges.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    edges.into_iter().collect()
}

/// Ising model `H(x) = -sum_{edges} x_a x_b` with the full energy table.
pub fn build_ising(rows: usize, cols: usize, wrap: bool) -> Result<GibbsModel> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("lattice needs at least one site".into()));
    }
    let sites = rows * cols;
    if sites > MAX_SITES {
        return Err(Error::BudgetExceeded {
            size: sites,
            limit: MAX_SITES,
        });
    }
    let edges = lattice_edges(rows, cols, wrap);
    let energies = (0..1usize << sites)
        .map(|x| {
            // each aligned bond contributes -1, each broken bond +1
            let broken = edges
                .iter()
                .filter(|(a, b)| ((x >> a) ^ (x >> b)) & 1 == 1)
                .count() as f64;
            2.0 * broken - edges.len() as f64
        })
        .collect();
    Ok(GibbsModel {
        kind: ModelKind::Ising { rows, cols, wrap },
        energy: Energy::Linear(energies),
        num_states: 1 << sites,
    })
}

/// `Z(theta) = sum_x exp(-h(x, theta))`.
///
/// The plain sum is used when it is finite and positive; otherwise the sum is
/// recomputed with the minimal energy factored out.
pub fn exact_partition(gm: &GibbsModel, theta: f64) -> Result<f64> {
    let h = gm.h_column(theta)?;
    let plain: f64 = h.iter().map(|e| (-e).exp()).sum();
    if plain.is_finite() && plain > 0.0 && plain >= f64::MIN_POSITIVE {
        return Ok(plain);
    }
    let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: f64 = h.iter().map(|e| (-(e - h_min)).exp()).sum();
    let z = (-h_min).exp() * shifted;
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::NonFinite(format!("partition function at theta = {theta}")));
    }
    Ok(z)
}

/// Exact inverse-CDF sampler for `exp(-h(x, theta)) / Z(theta)`.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    cdf: Vec<f64>,
}

impl GibbsSampler {
    pub fn new(gm: &GibbsModel, theta: f64) -> Result<Self> {
        let h = gm.h_column(theta)?;
        let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
        let mut acc = 0.0;
        let cdf = h
            .iter()
            .map(|e| {
                acc += (-(e - h_min)).exp();
                acc
            })
            .collect();
        Ok(Self { cdf })
    }

    /// Exact probabilities of every state.
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total();
        let mut prev = 0.0;
        self.cdf
            .iter()
            .map(|c| {
                let p = (c - prev) / total;
                prev = *c;
                p
            })
            .collect()
    }

    fn total(&self) -> f64 {
        *self.cdf.last().expect("at least one state")
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.total();
        let i = self.cdf.partition_point(|c| *c <= u);
        // u < total, but guard against rounding at the top
        i.min(self.cdf.len() - 1)
    }
}

/// One exact draw, deterministic in `seed`.
pub fn exact_sample(gm: &GibbsModel, theta: f64, seed: u64) -> Result<usize> {
    let sampler = GibbsSampler::new(gm, theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sampler.sample(&mut rng))
}

/// Prior density on `theta`, folded into the grid weights.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Prior {
    #[default]
    Uniform,
    Exponential { rate: f64 },
}

impl Prior {
    pub fn weights(&self, grid: &ThetaGrid) -> Vec<f64> {
        match *self {
            Prior::Uniform => vec![1.0; grid.len()],
            Prior::Exponential { rate } => {
                grid.nodes().iter().map(|t| rate * (-rate * t).exp()).collect()
            }
        }
    }
}

/// Posterior over `theta` given an observed state: `phi_i = h(x_obs, theta_i)`,
/// `z_i = Z(theta_i)`. Prior weights multiply the grid weights.
pub fn gibbs_posterior_spec(
    gm: &GibbsModel,
    x_obs: usize,
    grid: &ThetaGrid,
    prior_weights: Option<&[f64]>,
) -> Result<PosteriorSpec> {
    gm.check_state(x_obs)?;
    let grid = match prior_weights {
        None => grid.clone(),
        Some(p) => {
            grid.check_len(p.len())?;
            grid.with_weights(grid.weights().iter().zip(p).map(|(w, q)| w * q).collect())?
        }
    };
    let phi = grid
        .nodes()
        .iter()
        .map(|&t| gm.h(x_obs, t))
        .collect::<Result<Vec<_>>>()?;
    let z = grid
        .nodes()
        .iter()
        .map(|&t| exact_partition(gm, t))
        .collect::<Result<Vec<_>>>()?;
    PosteriorSpec::new(grid, phi, z)
}

/// Tightest envelopes `min_x exp(-h(x, theta)) <= exp(-h) <= max_x exp(-h(x, theta))`.
pub fn envelopes_for(gm: &GibbsModel, thetas: &[f64]) -> Result<EnvelopeSpec> {
    let mut ell = Vec::with_capacity(thetas.len());
    let mut u = Vec::with_capacity(thetas.len());
    for &t in thetas {
        let h = gm.h_column(t)?;
        let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
        let h_max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ell.push((-h_max).exp());
        u.push((-h_min).exp());
    }
    EnvelopeSpec::new(ell, u)
}
