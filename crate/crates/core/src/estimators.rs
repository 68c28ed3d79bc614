//! Randomized recovery of the normalizing function.
//!
//! Two estimators are provided:
//!
//! * simple Monte Carlo, `Zt_N(theta) = (1/N) sum_j rho(X_j, theta)` with
//!   fresh iid draws `X_j ~ nu_theta` for every grid node;
//! * multiple importance sampling for Gibbs models, where one sample set per
//!   anchor `theta_j` is reused for every grid node:
//!   `S^(i)(theta) = sum_j p_j exp(-h(X_ij, theta)) / exp(-h(X_ij, theta_j))`.
//!   It estimates `S(theta) = Z(theta) sum_j p_j / Z(theta_j)`, a constant
//!   multiple of `Z`, which yields the same posterior.
//!
//! Random streams are derived from `(master_seed, replicate, node-or-anchor)`
//! by a counter-based mixer, so ensembles are bit-identical whatever the
//! degree of parallelism.

use std::io::{Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gibbs::{exact_partition, GibbsModel, GibbsSampler};
use crate::metrics::moment_of_masses;
use crate::posterior::{build_posterior, lp_norm, Exponent, PosteriorSpec, ThetaGrid};

/// Magic bytes of the binary ensemble dump.
pub const ENSEMBLE_MAGIC: &[u8; 5] = b"NSEN1";

const DOMAIN_SIMPLE: u64 = 0x5349_4d50_4c45_4d43;
const DOMAIN_MIS: u64 = 0x4d49_535f_414e_4348;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream indexed by `(master, domain, a, b)`.
pub fn stream_seed(master: u64, domain: u64, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(master ^ domain);
    h = splitmix64(h ^ a);
    splitmix64(h ^ b.rotate_left(32))
}

fn stream_rng(master: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, domain, a, b))
}

/// Pairwise summation; the order is fixed by the slice layout.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Pointwise envelopes `0 < ell <= u`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSpec {
    ell: Vec<f64>,
    u: Vec<f64>,
}

impl EnvelopeSpec {
    pub fn new(ell: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if ell.len() != u.len() {
            return Err(Error::LengthMismatch {
                expected: ell.len(),
                got: u.len(),
            });
        }
        for (i, (l, h)) in ell.iter().zip(&u).enumerate() {
            if !(*l > 0.0 && l <= h && h.is_finite()) {
                return Err(Error::EnvelopeViolation {
                    node: i,
                    value: f64::NAN,
                    lower: *l,
                    upper: *h,
                });
            }
        }
        Ok(Self { ell, u })
    }

    pub fn ell(&self) -> &[f64] {
        &self.ell
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.ell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ell.is_empty()
    }
}

/// Family `(nu_theta, rho)` with `Z(theta) = E_{nu_theta} rho(X, theta)`.
pub trait SamplerFamily: Sync {
    type Draw;

    fn draw<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Self::Draw;

    fn rho(&self, x: &Self::Draw, theta: f64) -> f64;

    /// `ell(theta) <= rho(x, theta) <= u(theta)` for all `x`, when known.
    fn envelope(&self, _theta: f64) -> Option<(f64, f64)> {
        None
    }

    /// Exact `Z(theta)`, when available.
    fn exact_z(&self, _theta: f64) -> Option<f64> {
        None
    }
}

/// `rho == value`; every estimate equals `value` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantRho {
    pub value: f64,
}

impl SamplerFamily for ConstantRho {
    type Draw = ();

    fn draw<R: Rng + ?Sized>(&self, _theta: f64, _rng: &mut R) {}

    fn rho(&self, _x: &(), _theta: f64) -> f64 {
        self.value
    }

    fn envelope(&self, _theta: f64) -> Option<(f64, f64)> {
        Some((self.value, self.value))
    }

    fn exact_z(&self, _theta: f64) -> Option<f64> {
        Some(self.value)
    }
}

/// `nu_theta = Uniform(0, 1)`, `rho(x, theta) = exp(-theta x)`,
/// so `Z(theta) = (1 - exp(-theta)) / theta`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UniformTilt;

impl SamplerFamily for UniformTilt {
    type Draw = f64;

    fn draw<R: Rng + ?Sized>(&self, _theta: f64, rng: &mut R) -> f64 {
        rng.random::<f64>()
    }

    fn rho(&self, x: &f64, theta: f64) -> f64 {
        (-theta * x).exp()
    }

    fn envelope(&self, theta: f64) -> Option<(f64, f64)> {
        let e = (-theta).exp();
        Some((e.min(1.0), e.max(1.0)))
    }

    fn exact_z(&self, theta: f64) -> Option<f64> {
        if theta == 0.0 {
            Some(1.0)
        } else {
            Some(-(-theta).exp_m1() / theta)
        }
    }
}

/// Uniform proposal over the states of a Gibbs model:
/// `rho(x, theta) = |G| exp(-h(x, theta))`, so `Z` is the partition function.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsUniform {
    pub model: GibbsModel,
}

impl SamplerFamily for GibbsUniform {
    type Draw = usize;

    fn draw<R: Rng + ?Sized>(&self, _theta: f64, rng: &mut R) -> usize {
        rng.random_range(0..self.model.num_states())
    }

    fn rho(&self, x: &usize, theta: f64) -> f64 {
        let h = self.model.h(*x, theta).unwrap_or(f64::NAN);
        self.model.num_states() as f64 * (-h).exp()
    }

    fn envelope(&self, theta: f64) -> Option<(f64, f64)> {
        let env = crate::gibbs::envelopes_for(&self.model, &[theta]).ok()?;
        let g = self.model.num_states() as f64;
        Some((g * env.ell()[0], g * env.u()[0]))
    }

    fn exact_z(&self, theta: f64) -> Option<f64> {
        exact_partition(&self.model, theta).ok()
    }
}

/// Estimator that produced an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    SimpleMc,
    Mis { anchors: Vec<f64>, weights: Vec<f64> },
}

/// `M x n` matrix of realizations `Zt(omega_m, theta_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerEnsemble {
    values: Vec<f64>,
    replicates: usize,
    nodes: usize,
    pub n_samples: usize,
    pub master_seed: u64,
    pub scheme: Scheme,
    thetas: Vec<f64>,
}

impl NormalizerEnsemble {
    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.values[m * self.nodes..(m + 1) * self.nodes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.nodes)
    }

    /// Columns `replicate,node_index,theta,value`.
    pub fn to_csv(&self) -> String {
        let mut w = crate::csvfmt::writer();
        w.write_record(["replicate", "node_index", "theta", "value"])
            .expect("in-memory write");
        for (m, row) in self.rows().enumerate() {
            for (i, v) in row.iter().enumerate() {
                w.write_record([
                    m.to_string(),
                    i.to_string(),
                    crate::csvfmt::float(self.thetas[i]),
                    crate::csvfmt::float(*v),
                ])
                .expect("in-memory write");
            }
        }
        crate::csvfmt::finish(w)
    }

    /// `NSEN1`, then `M, n, N, seed` as little-endian u64, then row-major f64.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(ENSEMBLE_MAGIC)?;
        for h in [
            self.replicates as u64,
            self.nodes as u64,
            self.n_samples as u64,
            self.master_seed,
        ] {
            out.write_all(&h.to_le_bytes())?;
        }
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(5 + 32 + 8 * self.values.len());
        self.write_binary(&mut buf).expect("in-memory write");
        buf
    }
}

/// Contents of a binary ensemble dump.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleDump {
    pub replicates: usize,
    pub nodes: usize,
    pub n_samples: usize,
    pub master_seed: u64,
    pub values: Vec<f64>,
}

pub fn read_binary<R: Read>(mut input: R) -> Result<EnsembleDump> {
    let bad = |msg: &str| Error::InvalidArgument(format!("ensemble dump: {msg}"));
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != ENSEMBLE_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut header = [0u64; 4];
    for h in header.iter_mut() {
        let mut b = [0u8; 8];
        input.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
        *h = u64::from_le_bytes(b);
    }
    let [m, n, big_n, seed] = header;
    let count = (m as usize)
        .checked_mul(n as usize)
        .ok_or_else(|| bad("size overflow"))?;
    let mut body = Vec::new();
    input.read_to_end(&mut body).map_err(|_| bad("read failure"))?;
    if body.len() != count * 8 {
        return Err(bad("body length does not match header"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(EnsembleDump {
        replicates: m as usize,
        nodes: n as usize,
        n_samples: big_n as usize,
        master_seed: seed,
        values,
    })
}

fn check_counts(n_samples: usize, replicates: usize) -> Result<()> {
    if n_samples == 0 || replicates == 0 {
        return Err(Error::InvalidArgument(format!(
            "need N >= 1 and M >= 1, got N = {n_samples}, M = {replicates}"
        )));
    }
    Ok(())
}

/// Simple Monte Carlo recovery on every grid node.
///
/// When `check_envelope` is set, every `rho` evaluation is checked against
/// the family's envelope.
pub fn simple_mc_recover<F: SamplerFamily>(
    family: &F,
    grid: &ThetaGrid,
    n_samples: usize,
    replicates: usize,
    master_seed: u64,
    check_envelope: bool,
) -> Result<NormalizerEnsemble> {
    check_counts(n_samples, replicates)?;
    let thetas = grid.nodes().to_vec();
    let envelopes: Vec<Option<(f64, f64)>> = thetas
        .iter()
        .map(|&t| if check_envelope { family.envelope(t) } else { None })
        .collect();

    let rows: Vec<Result<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|m| {
            thetas
                .iter()
                .enumerate()
                .map(|(i, &theta)| {
                    let mut rng = stream_rng(master_seed, DOMAIN_SIMPLE, m as u64, i as u64);
                    let mut acc = 0.0;
                    for _ in 0..n_samples {
                        let x = family.draw(theta, &mut rng);
                        let r = family.rho(&x, theta);
                        if !r.is_finite() {
                            return Err(Error::NonFinite(format!("rho at theta = {theta}")));
                        }
                        if let Some((lo, hi)) = envelopes[i] {
                            if r < lo || r > hi {
                                return Err(Error::EnvelopeViolation {
                                    node: i,
                                    value: r,
                                    lower: lo,
                                    upper: hi,
                                });
                            }
                        }
                        acc += r;
                    }
                    let v = acc / n_samples as f64;
                    if !(v > 0.0) {
                        return Err(Error::InvalidArgument(format!(
                            "nonpositive estimate {v} at node {i}"
                        )));
                    }
                    Ok(v)
                })
                .collect()
        })
        .collect();

    let mut values = Vec::with_capacity(replicates * thetas.len());
    for row in rows {
        values.extend(row?);
    }
    Ok(NormalizerEnsemble {
        values,
        replicates,
        nodes: thetas.len(),
        n_samples,
        master_seed,
        scheme: Scheme::SimpleMc,
        thetas,
    })
}

/// Precomputed tables are used below this many `states x nodes x anchors` entries.
const MIS_TABLE_LIMIT: usize = 1 << 22;

/// Multiple importance sampling recovery of `S = Z sum_j p_j / Z(theta_j)`.
pub fn mis_recover(
    gm: &GibbsModel,
    grid: &ThetaGrid,
    anchors: &[f64],
    weights: &[f64],
    n_samples: usize,
    replicates: usize,
    master_seed: u64,
) -> Result<NormalizerEnsemble> {
    check_counts(n_samples, replicates)?;
    check_mis_inputs(grid, anchors, weights)?;
    let thetas = grid.nodes().to_vec();
    let n = thetas.len();
    let g = gm.num_states();

    let samplers = anchors
        .iter()
        .map(|&a| GibbsSampler::new(gm, a))
        .collect::<Result<Vec<_>>>()?;
    let anchor_h = anchors
        .iter()
        .map(|&a| gm.h_column(a))
        .collect::<Result<Vec<_>>>()?;
    let node_h = thetas
        .iter()
        .map(|&t| gm.h_column(t))
        .collect::<Result<Vec<_>>>()?;

    // table[j][x * n + k] = p_j exp(h(x, theta_j) - h(x, theta_k))
    let tables: Option<Vec<Vec<f64>>> = (g * n * anchors.len() <= MIS_TABLE_LIMIT).then(|| {
        (0..anchors.len())
            .map(|j| {
                let mut t = Vec::with_capacity(g * n);
                for x in 0..g {
                    for k in 0..n {
                        t.push(weights[j] * (anchor_h[j][x] - node_h[k][x]).exp());
                    }
                }
                t
            })
            .collect()
    });

    let rows: Vec<Result<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|m| {
            let mut acc = vec![0.0; n];
            for (j, sampler) in samplers.iter().enumerate() {
                let mut rng = stream_rng(master_seed, DOMAIN_MIS, m as u64, j as u64);
                for _ in 0..n_samples {
                    let x = sampler.sample(&mut rng);
                    match &tables {
                        Some(t) => {
                            let row = &t[j][x * n..(x + 1) * n];
                            acc.iter_mut().zip(row).for_each(|(a, r)| *a += r);
                        }
                        None => {
                            for (k, a) in acc.iter_mut().enumerate() {
                                *a += weights[j] * (anchor_h[j][x] - node_h[k][x]).exp();
                            }
                        }
                    }
                }
            }
            let scale = 1.0 / n_samples as f64;
            let row: Vec<f64> = acc.into_iter().map(|a| a * scale).collect();
            if let Some((k, v)) = row.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::NonFinite(format!("MIS estimate {v} at node {k}")));
            }
            Ok(row)
        })
        .collect();

    let mut values = Vec::with_capacity(replicates * n);
    for row in rows {
        values.extend(row?);
    }
    Ok(NormalizerEnsemble {
        values,
        replicates,
        nodes: n,
        n_samples,
        master_seed,
        scheme: Scheme::Mis {
            anchors: anchors.to_vec(),
            weights: weights.to_vec(),
        },
        thetas,
    })
}

fn check_mis_inputs(grid: &ThetaGrid, anchors: &[f64], weights: &[f64]) -> Result<()> {
    if anchors.is_empty() || anchors.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "need matching nonempty anchors and weights, got {} and {}",
            anchors.len(),
            weights.len()
        )));
    }
    if let Some(a) = anchors.iter().find(|a| !(**a >= grid.lo() && **a <= grid.hi())) {
        return Err(Error::InvalidArgument(format!(
            "anchor {a} outside grid range [{}, {}]",
            grid.lo(),
            grid.hi()
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("anchor weights sum to {total}, not 1")));
    }
    if anchors.len() > 1 && weights.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::InvalidArgument("anchor weights must lie in (0, 1)".into()));
    }
    if anchors.len() == 1 && weights[0] != 1.0 {
        return Err(Error::InvalidArgument("single anchor needs weight 1".into()));
    }
    Ok(())
}

/// `S(theta_i) = Z(theta_i) sum_j p_j / Z(theta_j)`, the target of [`mis_recover`].
pub fn mis_target(gm: &GibbsModel, thetas: &[f64], anchors: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    let mix: f64 = anchors
        .iter()
        .zip(weights)
        .map(|(&a, p)| exact_partition(gm, a).map(|z| p / z))
        .sum::<Result<f64>>()?;
    thetas.iter().map(|&t| exact_partition(gm, t).map(|z| z * mix)).collect()
}

/// Empirical moments of `Q = Zt / truth` across replicates, per node.
#[derive(Debug, Clone, PartialEq)]
pub struct QMoments {
    pub replicates: usize,
    /// `E|1/Q - 1|`, i.e. `E|Z/Zt - 1|`
    pub m1: Vec<f64>,
    /// `E|Q - 1|^2`
    pub m2: Vec<f64>,
    /// `E[Q^-2]`
    pub inv2: Vec<f64>,
    /// `E|1/Q - 1|^2`
    pub rev2: Vec<f64>,
    /// `E[Q^-1]`
    pub inv1: Vec<f64>,
    /// Mean of `Zt`.
    pub mean: Vec<f64>,
    pub m1_se: Vec<f64>,
    pub m2_se: Vec<f64>,
    pub inv2_se: Vec<f64>,
    pub inv1_se: Vec<f64>,
    pub mean_se: Vec<f64>,
}

impl QMoments {
    /// Deterministic `Zt = truth`.
    pub fn exact(nodes: usize) -> Self {
        Self::from_constant(nodes, 0.0, 0.0, 1.0)
    }

    /// Constant per-node moments, without standard errors.
    pub fn from_constant(nodes: usize, m1: f64, m2: f64, inv2: f64) -> Self {
        Self {
            replicates: 0,
            m1: vec![m1; nodes],
            m2: vec![m2; nodes],
            inv2: vec![inv2; nodes],
            rev2: vec![m1 * m1; nodes],
            inv1: vec![inv2.sqrt(); nodes],
            mean: vec![0.0; nodes],
            m1_se: vec![0.0; nodes],
            m2_se: vec![0.0; nodes],
            inv2_se: vec![0.0; nodes],
            inv1_se: vec![0.0; nodes],
            mean_se: vec![0.0; nodes],
        }
    }
}

/// Mean and standard error with pairwise summation.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn q_moments(ensemble: &NormalizerEnsemble, truth: &[f64]) -> Result<QMoments> {
    let n = ensemble.nodes();
    if truth.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: truth.len(),
        });
    }
    if let Some(t) = truth.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::InvalidArgument(format!("truth must be positive, got {t}")));
    }
    let m = ensemble.replicates();
    let mut out = QMoments {
        replicates: m,
        m1: Vec::with_capacity(n),
        m2: Vec::with_capacity(n),
        inv2: Vec::with_capacity(n),
        rev2: Vec::with_capacity(n),
        inv1: Vec::with_capacity(n),
        mean: Vec::with_capacity(n),
        m1_se: Vec::with_capacity(n),
        m2_se: Vec::with_capacity(n),
        inv2_se: Vec::with_capacity(n),
        inv1_se: Vec::with_capacity(n),
        mean_se: Vec::with_capacity(n),
    };
    let mut q = vec![0.0; m];
    let mut buf = vec![0.0; m];
    for i in 0..n {
        for (r, row) in ensemble.rows().enumerate() {
            q[r] = row[i] / truth[i];
        }
        let mut stat = |f: &dyn Fn(f64) -> f64| {
            buf.iter_mut().zip(&q).for_each(|(b, q)| *b = f(*q));
            mean_se(&buf)
        };
        let (m1, m1_se) = stat(&|q| (1.0 / q - 1.0).abs());
        let (m2, m2_se) = stat(&|q| (q - 1.0) * (q - 1.0));
        let (inv2, inv2_se) = stat(&|q| 1.0 / (q * q));
        let (rev2, _) = stat(&|q| (1.0 / q - 1.0) * (1.0 / q - 1.0));
        let (inv1, inv1_se) = stat(&|q| 1.0 / q);
        let (mean, mean_se) = stat(&|q| q * truth[i]);
        out.m1.push(m1);
        out.m1_se.push(m1_se);
        out.m2.push(m2);
        out.m2_se.push(m2_se);
        out.inv2.push(inv2);
        out.inv2_se.push(inv2_se);
        out.rev2.push(rev2);
        out.inv1.push(inv1);
        out.inv1_se.push(inv1_se);
        out.mean.push(mean);
        out.mean_se.push(mean_se);
    }
    Ok(out)
}

/// Envelope inputs of the analytic moment bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeScheme {
    /// `ell <= rho <= u` on the grid.
    SimpleMc,
    /// `ell <= exp(-h) <= u` on the grid, plus the envelopes and weights at the anchors.
    Mis {
        anchor_envelope: EnvelopeSpec,
        weights: Vec<f64>,
    },
}

/// Analytic moment bounds and the integrated coefficients of the expected-distance bounds.
///
/// At information parameter `N` the expected TV is bounded by
/// `tv_coefficient / sqrt(N)` and the expected W1 by `w1_coefficient / sqrt(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeBounds {
    /// Bound on `E|Q_1 - 1|^2` per node.
    pub m2_bound: Vec<f64>,
    /// Bound on `E[Q_1^-2]` per node.
    pub inv2_bound: Vec<f64>,
    /// `(sum p_j^2 / ell(theta_j)^2)^(1/2) / sum p_k / u(theta_k)`; one for simple MC.
    pub mis_factor: f64,
    /// `||u/ell||_{pi_Z,1}`
    pub ratio_l1: f64,
    /// `||u/ell||_{pi_Z,2}`
    pub ratio_l2: f64,
    /// `R` with `|pi_Zt|^(1) <= R` for every realization.
    pub radius: f64,
    /// `|pi_Z|^(2)`
    pub moment2: f64,
    pub tv_coefficient: f64,
    pub w1_coefficient: f64,
}

impl EnvelopeBounds {
    pub fn tv_at(&self, n_samples: usize) -> f64 {
        self.tv_coefficient / (n_samples as f64).sqrt()
    }

    pub fn w1_at(&self, n_samples: usize) -> f64 {
        self.w1_coefficient / (n_samples as f64).sqrt()
    }
}

/// `spec` carries the true `Z` (for the posterior `pi_Z`); `truth` is the
/// estimator's target, `Z` for simple MC and `S` for MIS.
pub fn envelope_moment_bounds(
    env: &EnvelopeSpec,
    spec: &PosteriorSpec,
    truth: &[f64],
    scheme: &EnvelopeScheme,
) -> Result<EnvelopeBounds> {
    let grid = spec.grid();
    grid.check_len(env.len())?;
    grid.check_len(truth.len())?;
    let ell = env.ell();
    let u = env.u();

    let (mis_factor, sum_p_over_ell, sum_p_over_u, m2_scale, inv2_scale) = match scheme {
        EnvelopeScheme::SimpleMc => (1.0, 1.0, 1.0, 1.0, 1.0),
        EnvelopeScheme::Mis {
            anchor_envelope,
            weights,
        } => {
            if anchor_envelope.len() != weights.len() {
                return Err(Error::LengthMismatch {
                    expected: weights.len(),
                    got: anchor_envelope.len(),
                });
            }
            let sq: f64 = weights
                .iter()
                .zip(anchor_envelope.ell())
                .map(|(p, l)| (p / l).powi(2))
                .sum();
            let p_over_u: f64 = weights.iter().zip(anchor_envelope.u()).map(|(p, u)| p / u).sum();
            let p_over_l: f64 = weights.iter().zip(anchor_envelope.ell()).map(|(p, l)| p / l).sum();
            (sq.sqrt() / p_over_u, p_over_l, p_over_u, sq, p_over_u.powi(-2))
        }
    };

    let m2_bound = u
        .iter()
        .zip(truth)
        .map(|(u, t)| (u / t).powi(2) * m2_scale)
        .collect();
    let inv2_bound = ell
        .iter()
        .zip(truth)
        .map(|(l, t)| (t / l).powi(2) * inv2_scale)
        .collect();

    let pi_z = build_posterior(spec)?;
    let ratio: Vec<f64> = u.iter().zip(ell).map(|(u, l)| u / l).collect();
    let ratio_l1 = lp_norm(&ratio, pi_z.atoms(), Exponent::Finite(1.0))?;
    let ratio_l2 = lp_norm(&ratio, pi_z.atoms(), Exponent::Finite(2.0))?;
    let moment2 = moment_of_masses(grid, pi_z.atoms(), Exponent::Finite(2.0));

    // envelopes of the estimator itself
    let est_lo: Vec<f64> = ell.iter().map(|l| l * sum_p_over_u).collect();
    let est_hi: Vec<f64> = u.iter().map(|u| u * sum_p_over_ell).collect();
    let radius = crate::bounds::moment_radius_r(grid, spec.phi(), &est_lo, &est_hi)?;

    Ok(EnvelopeBounds {
        m2_bound,
        inv2_bound,
        mis_factor,
        ratio_l1,
        ratio_l2,
        radius,
        moment2,
        tv_coefficient: 2.0 * mis_factor * ratio_l1,
        w1_coefficient: (moment2 + radius) * mis_factor * ratio_l2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::build_ising;
    use crate::posterior::{Metric, WeightRule};

    fn grid(n: usize) -> ThetaGrid {
        ThetaGrid::build(0.5, 3.0, n, Metric::Euclidean, WeightRule::UniformTrapezoid).unwrap()
    }

    #[test]
    fn constant_rho_is_exact() {
        let e = simple_mc_recover(&ConstantRho { value: 2.5 }, &grid(5), 7, 4, 1, true).unwrap();
        assert!(e.values().iter().all(|v| *v == 2.5));
        let q = q_moments(&e, &[2.5; 5]).unwrap();
        assert!(q.m2.iter().all(|v| *v == 0.0));
        assert!(q.m1.iter().all(|v| *v == 0.0));
        assert!(q.inv2.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn counts_are_validated() {
        assert!(simple_mc_recover(&UniformTilt, &grid(3), 0, 1, 1, false).is_err());
        assert!(simple_mc_recover(&UniformTilt, &grid(3), 1, 0, 1, false).is_err());
    }

    struct Broken;
    impl SamplerFamily for Broken {
        type Draw = f64;
        fn draw<R: Rng + ?Sized>(&self, _t: f64, rng: &mut R) -> f64 {
            rng.random::<f64>()
        }
        fn rho(&self, x: &f64, _t: f64) -> f64 {
            2.0 * x
        }
        fn envelope(&self, _t: f64) -> Option<(f64, f64)> {
            Some((0.5, 1.0))
        }
    }

    #[test]
    fn envelope_violation_is_reported() {
        let r = simple_mc_recover(&Broken, &grid(3), 50, 2, 9, true);
        assert!(matches!(r, Err(Error::EnvelopeViolation { .. })));
        assert!(simple_mc_recover(&Broken, &grid(3), 50, 2, 9, false).is_ok());
    }

    #[test]
    fn ensembles_are_reproducible_and_parallel_invariant() {
        let g = grid(9);
        let a = simple_mc_recover(&UniformTilt, &g, 16, 40, 77, true).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simple_mc_recover(&UniformTilt, &g, 16, 40, 77, true).unwrap());
        assert_eq!(a.to_binary(), b.to_binary());
        let c = simple_mc_recover(&UniformTilt, &g, 16, 40, 78, true).unwrap();
        assert_ne!(a.values(), c.values());

        let gm = build_ising(2, 2, false).unwrap();
        let x = mis_recover(&gm, &g, &[1.0, 2.0], &[0.5, 0.5], 8, 30, 5).unwrap();
        let y = pool.install(|| mis_recover(&gm, &g, &[1.0, 2.0], &[0.5, 0.5], 8, 30, 5).unwrap());
        assert_eq!(x.values(), y.values());
    }

    #[test]
    fn stream_seeds_differ_across_indices() {
        let mut seen = std::collections::HashSet::new();
        for a in 0..50 {
            for b in 0..50 {
                assert!(seen.insert(stream_seed(1, DOMAIN_SIMPLE, a, b)));
            }
        }
        assert_ne!(stream_seed(1, DOMAIN_SIMPLE, 0, 0), stream_seed(1, DOMAIN_MIS, 0, 0));
    }

    #[test]
    fn mis_self_anchor_is_one() {
        let gm = build_ising(2, 2, false).unwrap();
        let g = ThetaGrid::counting(vec![0.7, 1.3], Metric::Euclidean).unwrap();
        let e = mis_recover(&gm, &g, &[0.7], &[1.0], 5, 3, 2).unwrap();
        for row in e.rows() {
            assert!((row[0] - 1.0).abs() < 1e-15);
        }
        let s = mis_target(&gm, &[0.7], &[0.7], &[1.0]).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mis_input_errors() {
        let gm = build_ising(1, 2, false).unwrap();
        let g = grid(5);
        assert!(mis_recover(&gm, &g, &[1.0, 2.0], &[0.5, 0.6], 2, 2, 0).is_err());
        assert!(mis_recover(&gm, &g, &[0.1], &[1.0], 2, 2, 0).is_err());
        assert!(mis_recover(&gm, &g, &[1.0, 2.0], &[1.0, 0.0], 2, 2, 0).is_err());
        assert!(mis_recover(&gm, &g, &[1.0], &[0.5], 2, 2, 0).is_err());
    }

    #[test]
    fn mis_table_and_direct_paths_agree() {
        // 2^10 states x 200 nodes x 3 anchors is below the table limit; compare
        // against the direct evaluation by building the same sums by hand
        let gm = build_ising(1, 3, false).unwrap();
        let g = grid(4);
        let anchors = [0.6, 1.5, 2.9];
        let w = [0.2, 0.3, 0.5];
        let e = mis_recover(&gm, &g, &anchors, &w, 6, 2, 123).unwrap();
        for m in 0..2 {
            let mut acc = [0.0; 4];
            for (j, &a) in anchors.iter().enumerate() {
                let s = GibbsSampler::new(&gm, a).unwrap();
                let mut rng = stream_rng(123, DOMAIN_MIS, m as u64, j as u64);
                for _ in 0..6 {
                    let x = s.sample(&mut rng);
                    for (k, &t) in g.nodes().iter().enumerate() {
                        acc[k] += w[j] * (-(gm.h(x, t).unwrap()) + gm.h(x, a).unwrap()).exp();
                    }
                }
            }
            for k in 0..4 {
                let v = acc[k] / 6.0;
                assert!((e.row(m)[k] - v).abs() <= 1e-13 * v);
            }
        }
    }

    #[test]
    fn binary_dump_roundtrip_and_layout() {
        let e = simple_mc_recover(&UniformTilt, &grid(3), 4, 2, 0xdead_beef, false).unwrap();
        let bytes = e.to_binary();
        assert_eq!(&bytes[..5], b"NSEN1");
        assert_eq!(u64::from_le_bytes(bytes[5..13].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[13..21].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[21..29].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(bytes[29..37].try_into().unwrap()), 0xdead_beef);
        assert_eq!(bytes.len(), 37 + 6 * 8);
        let d = read_binary(&bytes[..]).unwrap();
        assert_eq!(d.values, e.values());
        assert!(read_binary(&bytes[..30]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_binary(&bad[..]).is_err());
    }

    #[test]
    fn csv_export() {
        let e = simple_mc_recover(&ConstantRho { value: 1.0 }, &grid(2), 1, 2, 0, false).unwrap();
        let csv = e.to_csv();
        let lines: Vec<&str> = csv.trim_end().split("\r\n").collect();
        assert_eq!(lines[0], "replicate,node_index,theta,value");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4], "1,1,3.0000000000000000e0,1.0000000000000000e0");
    }

    #[test]
    fn envelope_bounds_collapse_for_constant_rho() {
        let g = grid(5);
        let z = vec![2.0; 5];
        let spec = PosteriorSpec::new(g, vec![0.0; 5], z.clone()).unwrap();
        let env = EnvelopeSpec::new(z.clone(), z.clone()).unwrap();
        let b = envelope_moment_bounds(&env, &spec, &z, &EnvelopeScheme::SimpleMc).unwrap();
        assert!(b.m2_bound.iter().all(|v| *v == 1.0));
        assert!(b.inv2_bound.iter().all(|v| *v == 1.0));
        assert_eq!(b.mis_factor, 1.0);
        assert!((b.ratio_l1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_norm_two_node() {
        let g = ThetaGrid::counting(vec![0.0, 1.0], Metric::Euclidean).unwrap();
        let spec = PosteriorSpec::new(g, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let env = EnvelopeSpec::new(vec![1.0, 1.0], vec![2.0, 2.0]).unwrap();
        let b = envelope_moment_bounds(&env, &spec, &[1.0, 1.0], &EnvelopeScheme::SimpleMc).unwrap();
        assert_eq!(b.ratio_l1, 2.0);
        assert_eq!(b.tv_at(4), 2.0);
    }

    #[test]
    fn envelope_spec_validation() {
        assert!(EnvelopeSpec::new(vec![1.0], vec![0.5]).is_err());
        assert!(EnvelopeSpec::new(vec![0.0], vec![0.5]).is_err());
        assert!(EnvelopeSpec::new(vec![1.0, 1.0], vec![2.0]).is_err());
    }

    #[test]
    fn uniform_tilt_closed_form() {
        // trapezoid quadrature of int_0^1 exp(-theta x) dx with many nodes
        for theta in [0.5, 1.0, 3.0] {
            let n = 20_001;
            let h = 1.0 / (n - 1) as f64;
            let mut s = 0.0;
            for k in 0..n {
                let w = if k == 0 || k == n - 1 { h / 2.0 } else { h };
                s += w * (-theta * k as f64 * h).exp();
            }
            assert!((UniformTilt.exact_z(theta).unwrap() - s).abs() < 1e-8);
        }
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|k| k as f64 * 0.25).collect();
        assert_eq!(pairwise_sum(&v), v.iter().sum::<f64>());
        assert_eq!(mean_se(&[3.0]), (3.0, 0.0));
    }
}
