//! Convergence studies: ensembles of recovered normalizers against exact truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{expected_tv_bound, expected_w1_bound, ExpectedTvBound, ExpectedW1Bound};
use crate::error::{Error, Result};
use crate::estimators::{
    envelope_moment_bounds, mean_se, mis_recover, mis_target, q_moments, simple_mc_recover,
    stream_seed, ConstantRho, EnvelopeBounds, EnvelopeScheme, EnvelopeSpec, GibbsUniform,
    NormalizerEnsemble, QMoments, SamplerFamily, UniformTilt,
};
use crate::gibbs::{envelopes_for, gibbs_posterior_spec, GibbsModel};
use crate::metrics::{tv_atoms, w1_atoms, TRANSPORT_MAX_NODES};
use crate::posterior::{build_posterior, lp_norm, posterior_atoms, Exponent, Metric, Posterior, PosteriorSpec};
use crate::transport;

use super::config::{ExperimentConfig, FamilyConfig, Scenario};

const DOMAIN_STUDY: u64 = 0x5354_5544_595f_4e00;

enum Sampler {
    Constant(ConstantRho),
    Tilt(UniformTilt),
    Gibbs(GibbsUniform),
    Mis {
        model: GibbsModel,
        anchors: Vec<f64>,
        weights: Vec<f64>,
    },
}

/// A randomized scenario with its exact posterior, estimator target and envelopes.
pub struct PreparedStudy {
    spec: PosteriorSpec,
    pi_z: Posterior,
    // atoms of pi_Z through the same routine as the replicates, so an exact
    // recovery gives distance zero bit-for-bit
    base_atoms: Vec<f64>,
    truth: Vec<f64>,
    sampler: Sampler,
    envelope: Option<EnvelopeBounds>,
}

fn family_envelope<F: SamplerFamily>(f: &F, thetas: &[f64]) -> Option<EnvelopeSpec> {
    let pairs: Option<Vec<(f64, f64)>> = thetas.iter().map(|&t| f.envelope(t)).collect();
    let (ell, u) = pairs?.into_iter().unzip();
    EnvelopeSpec::new(ell, u).ok()
}

fn family_truth<F: SamplerFamily>(f: &F, thetas: &[f64]) -> Result<Vec<f64>> {
    thetas
        .iter()
        .map(|&t| {
            f.exact_z(t)
                .ok_or_else(|| Error::Config(format!("no exact normalizer at theta = {t}")))
        })
        .collect()
}

impl PreparedStudy {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        match &config.scenario {
            Scenario::Pair { .. } => Err(Error::Config(
                "convergence study needs a simple-mc or gibbs-mis scenario".into(),
            )),
            Scenario::SimpleMc { family, grid, phi } => {
                let grid = grid.build()?;
                let phi = phi.evaluate(&grid)?;
                let thetas = grid.nodes().to_vec();
                let (sampler, truth, env) = match family {
                    FamilyConfig::Constant { value } => {
                        let f = ConstantRho { value: *value };
                        (Sampler::Constant(f), family_truth(&f, &thetas)?, family_envelope(&f, &thetas))
                    }
                    FamilyConfig::UniformTilt => {
                        let f = UniformTilt;
                        (Sampler::Tilt(f), family_truth(&f, &thetas)?, family_envelope(&f, &thetas))
                    }
                    FamilyConfig::GibbsUniform { model } => {
                        let f = GibbsUniform { model: model.build()? };
                        let truth = family_truth(&f, &thetas)?;
                        let env = family_envelope(&f, &thetas);
                        (Sampler::Gibbs(f), truth, env)
                    }
                };
                let spec = PosteriorSpec::new(grid, phi, truth.clone())?;
                let envelope = env
                    .map(|e| envelope_moment_bounds(&e, &spec, &truth, &EnvelopeScheme::SimpleMc))
                    .transpose()?;
                Self::assemble(spec, truth, sampler, envelope)
            }
            Scenario::GibbsMis {
                model,
                grid,
                observed,
                prior,
                anchors,
                weights,
            } => {
                let gm = model.build()?;
                let grid = grid.build()?;
                let x_obs = observed.resolve(&gm)?;
                let prior_w = prior.weights(&grid);
                let spec = gibbs_posterior_spec(&gm, x_obs, &grid, Some(&prior_w))?;
                let truth = mis_target(&gm, grid.nodes(), anchors, weights)?;
                let scheme = EnvelopeScheme::Mis {
                    anchor_envelope: envelopes_for(&gm, anchors)?,
                    weights: weights.clone(),
                };
                let env = envelopes_for(&gm, grid.nodes())?;
                let envelope = Some(envelope_moment_bounds(&env, &spec, &truth, &scheme)?);
                let sampler = Sampler::Mis {
                    model: gm,
                    anchors: anchors.clone(),
                    weights: weights.clone(),
                };
                Self::assemble(spec, truth, sampler, envelope)
            }
        }
    }

    fn assemble(
        spec: PosteriorSpec,
        truth: Vec<f64>,
        sampler: Sampler,
        envelope: Option<EnvelopeBounds>,
    ) -> Result<Self> {
        if let Metric::Truncated { .. } = spec.grid().metric() {
            if spec.grid().len() > TRANSPORT_MAX_NODES {
                return Err(Error::BudgetExceeded {
                    size: spec.grid().len(),
                    limit: TRANSPORT_MAX_NODES,
                });
            }
        }
        let pi_z = build_posterior(&spec)?;
        let mut base_atoms = Vec::with_capacity(spec.grid().len());
        posterior_atoms(spec.grid().weights(), spec.phi(), spec.z(), &mut base_atoms)
            .ok_or(Error::DegeneratePosterior(pi_z.normalizing_constant()))?;
        Ok(Self {
            spec,
            pi_z,
            base_atoms,
            truth,
            sampler,
            envelope,
        })
    }

    pub fn spec(&self) -> &PosteriorSpec {
        &self.spec
    }

    pub fn posterior(&self) -> &Posterior {
        &self.pi_z
    }

    /// Estimator target: `Z` for simple MC, `S` for MIS.
    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn envelope(&self) -> Option<&EnvelopeBounds> {
        self.envelope.as_ref()
    }

    pub fn ensemble(&self, n_samples: usize, replicates: usize, seed: u64) -> Result<NormalizerEnsemble> {
        let grid = self.spec.grid();
        match &self.sampler {
            Sampler::Constant(f) => simple_mc_recover(f, grid, n_samples, replicates, seed, true),
            Sampler::Tilt(f) => simple_mc_recover(f, grid, n_samples, replicates, seed, true),
            Sampler::Gibbs(f) => simple_mc_recover(f, grid, n_samples, replicates, seed, true),
            Sampler::Mis {
                model,
                anchors,
                weights,
            } => mis_recover(model, grid, anchors, weights, n_samples, replicates, seed),
        }
    }

    /// Exact distances between `pi_Z` and every replicate posterior.
    pub fn evaluate(&self, ensemble: &NormalizerEnsemble) -> Result<StudyPoint> {
        let grid = self.spec.grid();
        let weights = grid.weights();
        let phi = self.spec.phi();
        let nodes = grid.nodes();
        let metric = grid.metric();
        let base = &self.base_atoms;
        let per_rep: Vec<Result<(f64, f64, f64)>> = (0..ensemble.replicates())
            .into_par_iter()
            .map(|m| {
                let row = ensemble.row(m);
                let mut atoms = Vec::with_capacity(row.len());
                posterior_atoms(weights, phi, row, &mut atoms)
                    .ok_or_else(|| Error::NonFinite(format!("replicate {m} posterior")))?;
                let tv = tv_atoms(base, &atoms);
                let w1 = match metric {
                    Metric::Euclidean => w1_atoms(nodes, base, &atoms),
                    Metric::Truncated { .. } => {
                        transport::solve(base, &atoms, |i, j| metric.distance(nodes[i], nodes[j]))?.cost
                    }
                };
                let rel: Vec<f64> = self.truth.iter().zip(row).map(|(t, v)| t / v - 1.0).collect();
                let norm = lp_norm(&rel, base, Exponent::Finite(2.0))?;
                Ok((tv, w1, norm))
            })
            .collect();
        let mut tv = Vec::with_capacity(per_rep.len());
        let mut w1 = Vec::with_capacity(per_rep.len());
        let mut norms = Vec::with_capacity(per_rep.len());
        for r in per_rep {
            let (a, b, c) = r?;
            tv.push(a);
            w1.push(b);
            norms.push(c);
        }
        Ok(StudyPoint {
            n_samples: ensemble.n_samples,
            moments: q_moments(ensemble, &self.truth)?,
            tv,
            w1,
            replicate_norms: norms,
        })
    }

    /// Seed of the ensemble at information parameter `n_samples`.
    pub fn seed_for(master: u64, n_samples: usize) -> u64 {
        stream_seed(master, DOMAIN_STUDY, n_samples as u64, 0)
    }

    pub fn point(&self, n_samples: usize, replicates: usize, master: u64) -> Result<StudyPoint> {
        let e = self.ensemble(n_samples, replicates, Self::seed_for(master, n_samples))?;
        self.evaluate(&e)
    }

    /// Moment-based expected-distance bounds from the empirical moments of `point`.
    pub fn expected_bounds(&self, point: &StudyPoint) -> Result<(ExpectedTvBound, ExpectedW1Bound)> {
        let tv = expected_tv_bound(&point.moments, &self.pi_z)?;
        let radius = self.envelope.as_ref().map(|e| e.radius);
        let w1 = expected_w1_bound(&point.moments, &self.pi_z, radius, Some(&point.replicate_norms))?;
        Ok((tv, w1))
    }
}

/// Per-replicate distances at one information parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyPoint {
    pub n_samples: usize,
    pub tv: Vec<f64>,
    pub w1: Vec<f64>,
    /// `||truth / Zt - 1||_{pi_Z,2}` per replicate.
    pub replicate_norms: Vec<f64>,
    pub moments: QMoments,
}

impl StudyPoint {
    pub fn tv_mean_se(&self) -> (f64, f64) {
        mean_se(&self.tv)
    }

    pub fn w1_mean_se(&self) -> (f64, f64) {
        mean_se(&self.w1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub mean_tv: f64,
    pub se_tv: f64,
    pub mean_w1: f64,
    pub se_w1: f64,
    pub bound_tv_expected: Option<f64>,
    pub bound_w1_expected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

/// Numeric columns of a [`ConvergenceTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    MeanTv,
    SeTv,
    MeanW1,
    SeW1,
    BoundTvExpected,
    BoundW1Expected,
}

impl ConvergenceRow {
    pub fn get(&self, c: Column) -> Option<f64> {
        match c {
            Column::MeanTv => Some(self.mean_tv),
            Column::SeTv => Some(self.se_tv),
            Column::MeanW1 => Some(self.mean_w1),
            Column::SeW1 => Some(self.se_w1),
            Column::BoundTvExpected => self.bound_tv_expected,
            Column::BoundW1Expected => self.bound_w1_expected,
        }
    }
}

impl ConvergenceTable {
    pub fn new(rows: Vec<ConvergenceRow>) -> Result<Self> {
        if rows.windows(2).any(|w| w[0].n >= w[1].n) {
            return Err(Error::InvalidArgument("N must be strictly increasing".into()));
        }
        if rows.iter().any(|r| !(r.se_tv >= 0.0 && r.se_w1 >= 0.0)) {
            return Err(Error::InvalidArgument("standard errors must be nonnegative".into()));
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Columns `N,mean_tv,se_tv,mean_w1,se_w1,bound_tv_expected,bound_w1_expected`.
    pub fn to_csv(&self) -> String {
        use crate::csvfmt::{float, opt};
        let mut w = crate::csvfmt::writer();
        w.write_record([
            "N",
            "mean_tv",
            "se_tv",
            "mean_w1",
            "se_w1",
            "bound_tv_expected",
            "bound_w1_expected",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                float(r.mean_tv),
                float(r.se_tv),
                float(r.mean_w1),
                float(r.se_w1),
                opt(r.bound_tv_expected),
                opt(r.bound_w1_expected),
            ])
            .expect("in-memory write");
        }
        crate::csvfmt::finish(w)
    }
}

/// Artifacts of a convergence study.
#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub table: ConvergenceTable,
    pub ensembles: Vec<NormalizerEnsemble>,
}

/// Builds the convergence table of `config` in memory.
pub fn convergence_table(config: &ExperimentConfig) -> Result<StudyOutput> {
    config.check_study()?;
    let seed = config.require_seed()?;
    let prepared = PreparedStudy::from_config(config)?;
    let mut rows = Vec::with_capacity(config.n_list.len());
    let mut ensembles = Vec::new();
    for &n in &config.n_list {
        let e = prepared.ensemble(n, config.replicates, PreparedStudy::seed_for(seed, n))?;
        let point = prepared.evaluate(&e)?;
        let (mean_tv, se_tv) = point.tv_mean_se();
        let (mean_w1, se_w1) = point.w1_mean_se();
        rows.push(ConvergenceRow {
            n,
            mean_tv,
            se_tv,
            mean_w1,
            se_w1,
            bound_tv_expected: prepared.envelope().map(|b| b.tv_at(n)),
            bound_w1_expected: prepared.envelope().map(|b| b.w1_at(n)),
        });
        if config.dump_ensembles {
            ensembles.push(e);
        }
    }
    Ok(StudyOutput {
        table: ConvergenceTable::new(rows)?,
        ensembles,
    })
}
