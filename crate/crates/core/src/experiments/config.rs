//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundKind, BoundOptions, HolderContext};
use crate::error::{Error, Result};
use crate::gibbs::{ModelSpec, ObservedDatum, Prior};
use crate::posterior::{Metric, PosteriorSpec, ThetaGrid, WeightRule};

/// Parameter grid: either `n` equispaced nodes on `[lo, hi]` with trapezoid
/// weights, or explicit nodes (counting weights unless given).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Uniform {
        lo: f64,
        hi: f64,
        n: usize,
        #[serde(default)]
        metric: Metric,
    },
    Explicit {
        nodes: Vec<f64>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
        #[serde(default)]
        metric: Metric,
    },
}

impl GridConfig {
    pub fn build(&self) -> Result<ThetaGrid> {
        match self {
            GridConfig::Uniform { lo, hi, n, metric } => {
                ThetaGrid::build(*lo, *hi, *n, *metric, WeightRule::UniformTrapezoid)
            }
            GridConfig::Explicit {
                nodes,
                weights: None,
                metric,
            } => ThetaGrid::counting(nodes.clone(), *metric),
            GridConfig::Explicit {
                nodes,
                weights: Some(w),
                metric,
            } => ThetaGrid::new(nodes.clone(), w.clone(), *metric),
        }
    }
}

/// Potential `phi` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PhiSpec {
    #[default]
    Zero,
    Linear {
        slope: f64,
    },
    /// `precision / 2 * (theta - center)^2`
    Quadratic {
        center: f64,
        precision: f64,
    },
    Values {
        values: Vec<f64>,
    },
}

impl PhiSpec {
    pub fn evaluate(&self, grid: &ThetaGrid) -> Result<Vec<f64>> {
        let nodes = grid.nodes();
        Ok(match self {
            PhiSpec::Zero => vec![0.0; nodes.len()],
            PhiSpec::Linear { slope } => nodes.iter().map(|t| slope * t).collect(),
            PhiSpec::Quadratic { center, precision } => nodes
                .iter()
                .map(|t| 0.5 * precision * (t - center) * (t - center))
                .collect(),
            PhiSpec::Values { values } => {
                if values.len() != nodes.len() {
                    return Err(Error::LengthMismatch {
                        expected: nodes.len(),
                        got: values.len(),
                    });
                }
                values.clone()
            }
        })
    }
}

/// Sampler family of a simple Monte Carlo scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyConfig {
    /// `rho == value`
    Constant { value: f64 },
    /// `X ~ U(0, 1)`, `rho = exp(-theta X)`
    UniformTilt,
    /// Uniform proposal over the states of a Gibbs model.
    GibbsUniform { model: ModelSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Scenario {
    /// Explicit `Z` and `Zt` arrays.
    Pair {
        grid: GridConfig,
        #[serde(default)]
        phi: PhiSpec,
        z: Vec<f64>,
        z_tilde: Vec<f64>,
    },
    SimpleMc {
        family: FamilyConfig,
        grid: GridConfig,
        #[serde(default)]
        phi: PhiSpec,
    },
    GibbsMis {
        model: ModelSpec,
        grid: GridConfig,
        observed: ObservedDatum,
        #[serde(default)]
        prior: Prior,
        anchors: Vec<f64>,
        weights: Vec<f64>,
    },
}

fn default_replicates() -> usize {
    200
}

fn default_out() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Information parameters, strictly increasing.
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub seed: Option<u64>,
    /// Bound families to evaluate; all of them when absent.
    #[serde(default)]
    pub bounds: Option<Vec<BoundKind>>,
    #[serde(default)]
    pub holder: Option<HolderContext>,
    #[serde(default)]
    pub ell: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Also write every ensemble as CSV and binary dump.
    #[serde(default)]
    pub dump_ensembles: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn selection(&self) -> Vec<BoundKind> {
        self.bounds.clone().unwrap_or_else(|| BoundKind::ALL.to_vec())
    }

    pub fn bound_options(&self) -> BoundOptions {
        BoundOptions {
            holder: self.holder,
            ell: self.ell,
            eps: self.eps,
        }
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required; wall-clock seeding is not supported".into()))
    }

    /// Checks the estimator parameters of a convergence study.
    pub fn check_study(&self) -> Result<()> {
        self.require_seed()?;
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list must be nonempty".into()));
        }
        if self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "n_list must be positive and strictly increasing".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        Ok(())
    }

    /// `(spec_z, spec_zt)` of a pair scenario.
    pub fn pair_specs(&self) -> Result<(PosteriorSpec, PosteriorSpec)> {
        match &self.scenario {
            Scenario::Pair {
                grid,
                phi,
                z,
                z_tilde,
            } => {
                let grid = grid.build()?;
                let phi = phi.evaluate(&grid)?;
                let spec = PosteriorSpec::new(grid, phi, z.clone())?;
                let spec_t = spec.with_z(z_tilde.clone())?;
                Ok((spec, spec_t))
            }
            _ => Err(Error::Config("bounds report needs a pair scenario".into())),
        }
    }
}
