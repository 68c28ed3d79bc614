//! Stability bounds for `pi_Z` against `pi_Zt`.
//!
//! Every function here evaluates the right-hand side of a stability
//! inequality on a pair of [`PosteriorSpec`]s that share grid and potential.
//! Conditional bounds return [`Bound::NotApplicable`] with the failed
//! hypothesis instead of an error, so a [`BoundReport`] can show which
//! assumptions held.
//!
//! Notation: `r = Z / Zt` node-wise, `||f||_{nu,p}` the weighted `L^p` norm,
//! `|nu|^(p)` the moment functional from [`crate::metrics::moment_of_masses`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::QMoments;
use crate::metrics::{self, moment_of_masses, TRANSPORT_MAX_NODES};
use crate::posterior::{build_posterior, lp_norm, Exponent, Metric, Posterior, PosteriorSpec, ThetaGrid};

/// Slack allowed when checking that a bound dominates a true distance.
pub const DOMINATION_TOLERANCE: f64 = 1e-9;

/// Value of a conditional bound.
#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    Value(f64),
    NotApplicable(String),
}

impl Bound {
    pub fn value(&self) -> Option<f64> {
        match self {
            Bound::Value(v) => Some(*v),
            Bound::NotApplicable(_) => None,
        }
    }

    pub fn is_applicable(&self) -> bool {
        matches!(self, Bound::Value(_))
    }

    fn na(reason: impl Into<String>) -> Self {
        Bound::NotApplicable(reason.into())
    }
}

/// Which distance a bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dominates {
    Tv,
    W1,
    ExpectedTv,
    ExpectedW1,
}

impl fmt::Display for Dominates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dominates::Tv => "tv",
            Dominates::W1 => "w1",
            Dominates::ExpectedTv => "expected-tv",
            Dominates::ExpectedW1 => "expected-w1",
        })
    }
}

/// Hypotheses of the Hölder-type bounds: `||exp(-phi)/Z||_{mu,p} <= K`,
/// optionally `Zt >= ell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderContext {
    /// Exponent `p`; `f64::INFINITY` is allowed (serialized as `"inf"`).
    #[serde(with = "exponent_serde")]
    pub p: Exponent,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(default)]
    pub ell: Option<f64>,
}

mod exponent_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::posterior::Exponent;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(p: &Exponent, s: S) -> Result<S::Ok, S::Error> {
        match p {
            Exponent::Infinity => s.serialize_str("inf"),
            Exponent::Finite(v) => s.serialize_f64(*v),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Exponent, D::Error> {
        let v = match Raw::deserialize(d)? {
            Raw::Num(v) => v,
            Raw::Str(s) if s == "inf" || s == "infinity" => f64::INFINITY,
            Raw::Str(s) => return Err(serde::de::Error::custom(format!("bad exponent {s:?}"))),
        };
        Exponent::new(v).map_err(serde::de::Error::custom)
    }
}

/// Shared preprocessing of a `(Z, Zt)` pair.
struct Pair {
    grid: ThetaGrid,
    pi_z: Posterior,
    pi_zt: Posterior,
    /// `Z / Zt`
    ratio: Vec<f64>,
}

impl Pair {
    fn new(spec_z: &PosteriorSpec, spec_zt: &PosteriorSpec) -> Result<Self> {
        if spec_z.grid() != spec_zt.grid() {
            return Err(Error::GridMismatch);
        }
        if spec_z.phi() != spec_zt.phi() {
            return Err(Error::InvalidArgument(
                "both specs must share the same potential".into(),
            ));
        }
        let ratio = spec_z.z().iter().zip(spec_zt.z()).map(|(z, zt)| z / zt).collect();
        Ok(Self {
            grid: spec_z.grid().clone(),
            pi_z: build_posterior(spec_z)?,
            pi_zt: build_posterior(spec_zt)?,
            ratio,
        })
    }

    fn ratio_minus_one(&self) -> Vec<f64> {
        self.ratio.iter().map(|r| r - 1.0).collect()
    }

    fn rel_norm(&self, p: f64) -> f64 {
        lp_norm(&self.ratio_minus_one(), self.pi_z.atoms(), Exponent::Finite(p))
            .expect("aligned by construction")
    }
}

/// `2 ||Z/Zt - 1||_{pi_Z,1}`
pub fn tv_bound_basic(spec_z: &PosteriorSpec, spec_zt: &PosteriorSpec) -> Result<f64> {
    let pair = Pair::new(spec_z, spec_zt)?;
    Ok(2.0 * pair.rel_norm(1.0))
}

/// Rescaling-invariant TV bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaledBound {
    /// `2 inf_a ||a Z/Zt - 1||_{pi_Z,1}`
    pub l1: f64,
    /// minimizing `a` for the `L1` form
    pub l1_scale: f64,
    /// `2 ||a* Z/Zt - 1||_{pi_Z,2}` with the closed-form minimizer `a*`
    pub l2: f64,
    /// `a* = ||Z/Zt||_{pi_Z,1} / ||Z/Zt||^2_{pi_Z,2}`
    pub l2_scale: f64,
}

/// Golden-section tolerance on `log a`.
const GOLDEN_TOL: f64 = 1e-10;
/// Half-width of the `log a` bracket around the `L2` optimum.
const GOLDEN_BRACKET: f64 = 5.0;

/// Optimizes the free scale `c` in `pi_Zt = pi_{c Zt}`.
///
/// The scale is parametrized as `a = 1/c` multiplying `Z/Zt`.
pub fn tv_bound_rescaled(spec_z: &PosteriorSpec, spec_zt: &PosteriorSpec) -> Result<RescaledBound> {
    let pair = Pair::new(spec_z, spec_zt)?;
    let m = pair.pi_z.atoms();
    let r = &pair.ratio;

    let r1: f64 = r.iter().zip(m).map(|(r, m)| r * m).sum();
    let r2: f64 = r.iter().zip(m).map(|(r, m)| r * r * m).sum();
    let a_star = r1 / r2;
    let l2 = 2.0
        * r.iter()
            .zip(m)
            .map(|(r, m)| (a_star * r - 1.0).powi(2) * m)
            .sum::<f64>()
            .sqrt();

    let l1_at = |a: f64| -> f64 { r.iter().zip(m).map(|(r, m)| (a * r - 1.0).abs() * m).sum() };

    // golden section over log a
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a_star.ln() - GOLDEN_BRACKET, a_star.ln() + GOLDEN_BRACKET);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (l1_at(x1.exp()), l1_at(x2.exp()));
    while hi - lo > GOLDEN_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = l1_at(x1.exp());
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = l1_at(x2.exp());
        }
    }
    let mut best_a = (0.5 * (lo + hi)).exp();
    let mut best = l1_at(best_a);
    // the objective is convex and piecewise linear in a with kinks at 1/r_i;
    // polishing on the kinks (and a = 1) makes the infimum exact
    for a in r.iter().filter(|r| **r > 0.0).map(|r| 1.0 / r).chain([1.0]) {
        let v = l1_at(a);
        if v < best {
            best = v;
            best_a = a;
        }
    }
    Ok(RescaledBound {
        l1: 2.0 * best,
        l1_scale: best_a,
        l2,
        l2_scale: a_star,
    })
}

/// `2 min(||Zt/Z - 1||_{pi_Zt,1}, ||Z/Zt - 1||_{pi_Z,1})`
pub fn tv_bound_symmetrized(spec_z: &PosteriorSpec, spec_zt: &PosteriorSpec) -> Result<f64> {
    let pair = Pair::new(spec_z, spec_zt)?;
    let forward = pair.rel_norm(1.0);
    let reversed: f64 = pair
        .ratio
        .iter()
        .zip(pair.pi_zt.atoms())
        .map(|(r, m)| (1.0 / r - 1.0).abs() * m)
        .sum();
    Ok(2.0 * forward.min(reversed))
}

/// `(2/ell) ||Zt - Z||_{pi_Z,1}`, applicable when `0 < ell <= min Zt`.
pub fn tv_bound_floor(spec_z: &PosteriorSpec, spec_zt: &PosteriorSpec, ell: f64) -> Result<Bound> {
    let pair = Pair::new(spec_z, spec_zt)?;
    if let Some(reason) = floor_violation(spec_zt, ell) {
        return Ok(Bound::na(reason));
    }
    let diff: Vec<f64> = spec_zt.z().iter().zip(spec_z.z()).map(|(a, b)| a - b).collect();
    let norm = lp_norm(&diff, pair.pi_z.atoms(), Exponent::Finite(1.0))?;
    Ok(Bound::Value(2.0 / ell * norm))
}

fn floor_violation(spec_zt: &PosteriorSpec, ell: f64) -> Option<String> {
    let min_zt = spec_zt.z().iter().copied().fold(f64::INFINITY, f64::min);
    if !(ell > 0.0 && ell.is_finite()) {
        Some(format!("ell = {ell} must be positive"))
    } else if ell > min_zt {
        Some(format!("ell = {ell} exceeds min Zt = {min_zt}"))
    } else {
        None
    }
}

/// Plain and `ell`-floored variants of a Hölder-type bound.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderBound {
    pub plain: Bound,
    /// `None` when no `ell` was supplied.
    pub floor: Option<Bound>,
}

fn holder_norm(spec: &PosteriorSpec, p: Exponent) -> f64 {
    lp_norm(&spec.boltzmann_over_z(), spec.grid().weights(), p).expect("aligned by construction")
}

fn check_k(spec: &PosteriorSpec, ctx: &HolderContext, label: &str) -> Option<String> {
    let actual = holder_norm(spec, ctx.p);
    if !(ctx.k.is_finite() && ctx.k > 0.0) {
        Some(format!("K = {} must be positive and finite", ctx.k))
    } else if ctx.k < actual * (1.0 - 1e-12) {
        Some(format!(
            "K = {} below ||exp(-phi)/{label}||_(mu,p) = {actual}",
            ctx.k
        ))
    } else {
        None
    }
}

/// TV bounds with the `pi_Z` weight traded for `mu` via Hölder:
/// `(2K/C_Z) ||Z/Zt - 1||_{mu,q}` and `(2K/(ell C_Z)) ||Z - Zt||_{mu,q}`, `q = p/(p-1)`.
pub fn tv_bound_holder(
    spec_z: &PosteriorSpec,
    spec_zt: &PosteriorSpec,
    ctx: &HolderContext,
) -> Result<HolderBound> {
    let pair = Pair::new(spec_z, spec_zt)?;
    if let Some(reason) = check_k(spec_z, ctx, "Z") {
        return Ok(HolderBound {
            plain: Bound::na(reason.clone()),
            floor: ctx.ell.map(|_| Bound::na(reason)),
        });
    }
    let q = ctx.p.conjugate();
    let c_z = pair.pi_z.normalizing_constant();
    let w = pair.grid.weights();
    let plain = 2.0 * ctx.k / c_z * lp_norm(&pair.ratio_minus_one(), w, q)?;
    let floor = ctx.ell.map(|ell| match floor_violation(spec_zt, ell) {
        Some(reason) => Bound::na(reason),
        None => {
            let diff: Vec<f64> = spec_z.z().iter().zip(spec_zt.z()).map(|(a, b)| a - b).collect();
            let norm = lp_norm(&diff, w, q).expect("aligned by construction");
            Bound::Value(2.0 * ctx.k / (ell * c_z) * norm)
        }
    });
    Ok(HolderBound {
        plain: Bound::Value(plain),
        floor,
    })
}

/// Components of the two-term Wasserstein bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoTermBound {
    /// `||r-1||_{pi_Z,1} |pi_Zt|^(1)`
    pub term1: f64,
    /// `||r-1||_{pi_Z,2} |pi_Z|^(2)`
    pub term2: f64,
    /// `term1 + term2`
    pub tight: f64,
    /// `||r-1||_{pi_Z,2} (|pi_Zt|^(1) + |pi_Z|^(2))`
    pub loose: f64,
}

pub fn w1_bound_two_term(spec_z: &PosteriorSpec, spec_zt: &PosteriorSpec) -> Result<TwoTermBound> {
    let pair = Pair::new(spec_z, spec_zt)?;
    let n1 = pair.rel_norm(1.0);
    let n2 = pair.rel_norm(2.0);
    let mom_zt_1 = moment_of_masses(&pair.grid, pair.pi_zt.atoms(), Exponent::Finite(1.0));
    let mom_z_2 = moment_of_masses(&pair.grid, pair.pi_z.atoms(), Exponent::Finite(2.0));
    let term1 = n1 * mom_zt_1;
    let term2 = n2 * mom_z_2;
    Ok(TwoTermBound {
        term1,
        term2,
        tight: term1 + term2,
        loose: n2 * (mom_zt_1 + mom_z_2),
    })
}

/// `(2/eps) |pi_Z|^(2) delta` with `delta = ||Z/Zt - 1||_{pi_Z,2}`, applicable when `delta < 1`.
///
/// `eps` defaults to the largest admissible value `1 - delta`; an override
/// is clamped to it.
pub fn w1_bound_eps(
    spec_z: &PosteriorSpec,
    spec_zt: &PosteriorSpec,
    eps_override: Option<f64>,
) -> Result<Bound> {
    let pair = Pair::new(spec_z, spec_zt)?;
    let delta = pair.rel_norm(2.0);
    if delta >= 1.0 {
        return Ok(Bound::na(format!("||Z/Zt - 1||_(pi_Z,2) = {delta} >= 1")));
    }
    let eps = match eps_override {
        Some(e) if !(e > 0.0) => {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {e}")))
        }
        Some(e) => e.min(1.0 - delta),
        None => 1.0 - delta,
    };
    let mom = moment_of_masses(&pair.grid, pair.pi_z.atoms(), Exponent::Finite(2.0));
    Ok(Bound::Value(2.0 / eps * mom * delta))
}

/// Wasserstein bounds with `mu`-norms:
/// `K |mu|^(2q) / sqrt(C_Z) (1/sqrt(C_Z) + 1/sqrt(C_Zt)) ||Z/Zt - 1||_{mu,2q}`
/// and the `ell` variant with `||Z - Zt||_{mu,2q} / ell`.
///
/// Requires `K` to dominate `||exp(-phi)/Z||_{mu,p}` and `||exp(-phi)/Zt||_{mu,p}`.
/// The prefactor follows from `||r-1||_{pi_Z,2} <= sqrt(K/C_Z) ||r-1||_{mu,2q}`
/// and `|pi_Z|^(2) <= sqrt(K/C_Z) |mu|^(2q)`; both sides are then invariant
/// under rescaling `mu`.
pub fn w1_bound_holder(
    spec_z: &PosteriorSpec,
    spec_zt: &PosteriorSpec,
    ctx: &HolderContext,
) -> Result<HolderBound> {
    let pair = Pair::new(spec_z, spec_zt)?;
    let reason = check_k(spec_z, ctx, "Z").or_else(|| check_k(spec_zt, ctx, "Zt"));
    if let Some(reason) = reason {
        return Ok(HolderBound {
            plain: Bound::na(reason.clone()),
            floor: ctx.ell.map(|_| Bound::na(reason)),
        });
    }
    let q2 = ctx.p.conjugate().scale(2.0);
    let w = pair.grid.weights();
    let mu_moment = moment_of_masses(&pair.grid, w, q2);
    if !mu_moment.is_finite() {
        let reason = "mu moment is infinite".to_string();
        return Ok(HolderBound {
            plain: Bound::na(reason.clone()),
            floor: ctx.ell.map(|_| Bound::na(reason)),
        });
    }
    let c_z = pair.pi_z.normalizing_constant();
    let c_zt = pair.pi_zt.normalizing_constant();
    let prefactor = ctx.k * mu_moment / c_z.sqrt() * (1.0 / c_z.sqrt() + 1.0 / c_zt.sqrt());
    let plain = prefactor * lp_norm(&pair.ratio_minus_one(), w, q2)?;
    let floor = ctx.ell.map(|ell| match floor_violation(spec_zt, ell) {
        Some(reason) => Bound::na(reason),
        None => {
            let diff: Vec<f64> = spec_z.z().iter().zip(spec_zt.z()).map(|(a, b)| a - b).collect();
            let norm = lp_norm(&diff, w, q2).expect("aligned by construction");
            Bound::Value(prefactor / ell * norm)
        }
    });
    Ok(HolderBound {
        plain: Bound::Value(plain),
        floor,
    })
}

/// Expected-TV bounds for a random `Zt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedTvBound {
    /// `2 int E|Z/Zt - 1| dpi_Z`
    pub first: f64,
    /// `2 int sqrt(E|Zt/Z - 1|^2) sqrt(E[(Z/Zt)^2]) dpi_Z`
    pub second: f64,
}

fn check_moments(moments: &QMoments, pi_z: &Posterior) -> Result<()> {
    let n = pi_z.grid().len();
    for arr in [&moments.m1, &moments.m2, &moments.inv2, &moments.rev2] {
        if arr.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: arr.len(),
            });
        }
        if let Some(v) = arr.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("negative moment {v}")));
        }
    }
    Ok(())
}

pub fn expected_tv_bound(moments: &QMoments, pi_z: &Posterior) -> Result<ExpectedTvBound> {
    check_moments(moments, pi_z)?;
    let m = pi_z.atoms();
    let first = 2.0 * moments.m1.iter().zip(m).map(|(a, w)| a * w).sum::<f64>();
    let second = 2.0
        * moments
            .m2
            .iter()
            .zip(&moments.inv2)
            .zip(m)
            .map(|((a, b), w)| (a * b).sqrt() * w)
            .sum::<f64>();
    Ok(ExpectedTvBound { first, second })
}

/// Expected-W1 bounds for a random `Zt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedW1Bound {
    /// `(|pi_Z|^(2) + R) (int E|Zt/Z - 1|^2 E[(Z/Zt)^2] dpi_Z)^(1/2)`
    pub form_i: Bound,
    /// `(2/eps) |pi_Z|^(2) (int E|Z/Zt - 1|^2 dpi_Z)^(1/2)`
    pub form_ii: Bound,
    /// `eps` used by `form_ii`, `1 - max_omega ||Z/Zt(omega) - 1||_{pi_Z,2}`.
    pub epsilon: Option<f64>,
}

/// `replicate_norms` are `||Z/Zt(omega) - 1||_{pi_Z,2}` for every replicate;
/// they certify the closeness hypothesis of `form_ii`.
pub fn expected_w1_bound(
    moments: &QMoments,
    pi_z: &Posterior,
    radius: Option<f64>,
    replicate_norms: Option<&[f64]>,
) -> Result<ExpectedW1Bound> {
    check_moments(moments, pi_z)?;
    let m = pi_z.atoms();
    let mom2 = moment_of_masses(pi_z.grid(), m, Exponent::Finite(2.0));
    let form_i = match radius {
        None => Bound::na("no radius R supplied"),
        Some(r) if !(r.is_finite() && r >= 0.0) => Bound::na(format!("R = {r} is not finite")),
        Some(r) => {
            let integral: f64 = moments
                .m2
                .iter()
                .zip(&moments.inv2)
                .zip(m)
                .map(|((a, b), w)| a * b * w)
                .sum();
            Bound::Value((mom2 + r) * integral.sqrt())
        }
    };
    let (form_ii, epsilon) = match replicate_norms {
        None => (Bound::na("no per-replicate closeness certificate"), None),
        Some([]) => (Bound::na("empty closeness certificate"), None),
        Some(norms) => {
            let worst = norms.iter().copied().fold(0.0, f64::max);
            let eps = 1.0 - worst;
            if !(eps > 0.0) || norms.iter().any(|v| v.is_nan()) {
                (
                    Bound::na(format!("max replicate ||Z/Zt - 1||_(pi_Z,2) = {worst} >= 1")),
                    None,
                )
            } else {
                let integral: f64 = moments.rev2.iter().zip(m).map(|(a, w)| a * w).sum();
                (Bound::Value(2.0 / eps * mom2 * integral.sqrt()), Some(eps))
            }
        }
    };
    Ok(ExpectedW1Bound {
        form_i,
        form_ii,
        epsilon,
    })
}

/// Radius `R` with `|pi_Zt|^(1) <= R` for every `Zt` between the envelopes:
///
/// ```text
/// R = inf_{theta_0} int d(theta_0, .) exp(-phi)/ell dmu  /  int exp(-phi)/u dmu
/// ```
pub fn moment_radius_r(grid: &ThetaGrid, phi: &[f64], ell_env: &[f64], u_env: &[f64]) -> Result<f64> {
    grid.check_len(phi.len())?;
    grid.check_len(ell_env.len())?;
    grid.check_len(u_env.len())?;
    for (i, (l, u)) in ell_env.iter().zip(u_env).enumerate() {
        if !(*l > 0.0 && l <= u && u.is_finite()) {
            return Err(Error::EnvelopeViolation {
                node: i,
                value: f64::NAN,
                lower: *l,
                upper: *u,
            });
        }
    }
    let shift = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let boltz: Vec<f64> = phi.iter().map(|p| (-(p - shift)).exp()).collect();
    let upper_masses: Vec<f64> = boltz
        .iter()
        .zip(ell_env)
        .zip(grid.weights())
        .map(|((b, l), w)| w * b / l)
        .collect();
    let numerator = moment_of_masses(grid, &upper_masses, Exponent::Finite(1.0));
    let denominator: f64 = boltz
        .iter()
        .zip(u_env)
        .zip(grid.weights())
        .map(|((b, u), w)| w * b / u)
        .sum();
    let r = numerator / denominator;
    if !r.is_finite() {
        return Err(Error::NonFinite("moment radius".into()));
    }
    Ok(r)
}

/// Named bound families, as selected in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    TvBasic,
    TvRescaled,
    TvSymmetrized,
    TvFloor,
    TvHolder,
    W1TwoTerm,
    W1Eps,
    W1Holder,
}

impl BoundKind {
    pub const ALL: [BoundKind; 8] = [
        BoundKind::TvBasic,
        BoundKind::TvRescaled,
        BoundKind::TvSymmetrized,
        BoundKind::TvFloor,
        BoundKind::TvHolder,
        BoundKind::W1TwoTerm,
        BoundKind::W1Eps,
        BoundKind::W1Holder,
    ];
}

/// One row of a [`BoundReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEntry {
    pub name: String,
    pub bound: Bound,
    pub dominates: Dominates,
}

impl BoundEntry {
    fn new(name: &str, bound: Bound, dominates: Dominates) -> Self {
        Self {
            name: name.to_string(),
            bound,
            dominates,
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.bound.value()
    }

    pub fn reason(&self) -> &str {
        match &self.bound {
            Bound::Value(_) => "",
            Bound::NotApplicable(r) => r,
        }
    }
}

/// Optional inputs of [`BoundReport::evaluate`].
#[derive(Debug, Clone, Default)]
pub struct BoundOptions {
    pub holder: Option<HolderContext>,
    pub ell: Option<f64>,
    pub eps: Option<f64>,
}

/// Evaluated bounds together with the true distances they should dominate.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub entries: Vec<BoundEntry>,
    pub true_tv: Option<f64>,
    pub true_w1: Option<f64>,
}

impl BoundReport {
    pub fn evaluate(
        spec_z: &PosteriorSpec,
        spec_zt: &PosteriorSpec,
        selection: &[BoundKind],
        opts: &BoundOptions,
    ) -> Result<Self> {
        let pi_z = build_posterior(spec_z)?;
        let pi_zt = build_posterior(spec_zt)?;
        let true_tv = Some(metrics::tv_distance(&pi_z, &pi_zt)?);
        let true_w1 = match spec_z.grid().metric() {
            Metric::Euclidean => Some(metrics::wasserstein_1d(&pi_z, &pi_zt)?),
            Metric::Truncated { .. } if spec_z.grid().len() <= TRANSPORT_MAX_NODES => {
                Some(metrics::wasserstein_transport(&pi_z, &pi_zt)?)
            }
            Metric::Truncated { .. } => None,
        };

        let mut entries = Vec::new();
        for kind in selection {
            match kind {
                BoundKind::TvBasic => entries.push(BoundEntry::new(
                    "tv_basic",
                    Bound::Value(tv_bound_basic(spec_z, spec_zt)?),
                    Dominates::Tv,
                )),
                BoundKind::TvRescaled => {
                    let r = tv_bound_rescaled(spec_z, spec_zt)?;
                    entries.push(BoundEntry::new("tv_rescaled_l1", Bound::Value(r.l1), Dominates::Tv));
                    entries.push(BoundEntry::new("tv_rescaled_l2", Bound::Value(r.l2), Dominates::Tv));
                }
                BoundKind::TvSymmetrized => entries.push(BoundEntry::new(
                    "tv_symmetrized",
                    Bound::Value(tv_bound_symmetrized(spec_z, spec_zt)?),
                    Dominates::Tv,
                )),
                BoundKind::TvFloor => {
                    let b = match opts.ell {
                        Some(ell) => tv_bound_floor(spec_z, spec_zt, ell)?,
                        None => Bound::na("no ell supplied"),
                    };
                    entries.push(BoundEntry::new("tv_floor", b, Dominates::Tv));
                }
                BoundKind::TvHolder => {
                    let (plain, floor) = match &opts.holder {
                        Some(ctx) => {
                            let h = tv_bound_holder(spec_z, spec_zt, ctx)?;
                            (h.plain, h.floor.unwrap_or_else(|| Bound::na("no ell in holder context")))
                        }
                        None => (
                            Bound::na("no holder context supplied"),
                            Bound::na("no holder context supplied"),
                        ),
                    };
                    entries.push(BoundEntry::new("tv_holder", plain, Dominates::Tv));
                    entries.push(BoundEntry::new("tv_holder_floor", floor, Dominates::Tv));
                }
                BoundKind::W1TwoTerm => {
                    let t = w1_bound_two_term(spec_z, spec_zt)?;
                    entries.push(BoundEntry::new("w1_two_term", Bound::Value(t.tight), Dominates::W1));
                    entries.push(BoundEntry::new(
                        "w1_two_term_loose",
                        Bound::Value(t.loose),
                        Dominates::W1,
                    ));
                }
                BoundKind::W1Eps => entries.push(BoundEntry::new(
                    "w1_eps",
                    w1_bound_eps(spec_z, spec_zt, opts.eps)?,
                    Dominates::W1,
                )),
                BoundKind::W1Holder => {
                    let (plain, floor) = match &opts.holder {
                        Some(ctx) => {
                            let h = w1_bound_holder(spec_z, spec_zt, ctx)?;
                            (h.plain, h.floor.unwrap_or_else(|| Bound::na("no ell in holder context")))
                        }
                        None => (
                            Bound::na("no holder context supplied"),
                            Bound::na("no holder context supplied"),
                        ),
                    };
                    entries.push(BoundEntry::new("w1_holder", plain, Dominates::W1));
                    entries.push(BoundEntry::new("w1_holder_floor", floor, Dominates::W1));
                }
            }
        }
        Ok(Self {
            entries,
            true_tv,
            true_w1,
        })
    }

    /// Applicable entries whose value falls below the true distance by more than `tol`.
    pub fn violations(&self, tol: f64) -> Vec<&BoundEntry> {
        self.entries
            .iter()
            .filter(|e| {
                let truth = match e.dominates {
                    Dominates::Tv => self.true_tv,
                    Dominates::W1 => self.true_w1,
                    _ => None,
                };
                matches!((e.value(), truth), (Some(v), Some(t)) if v < t - tol)
            })
            .collect()
    }

    pub fn entry(&self, name: &str) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// CSV with columns `name,value,applicable,reason,dominates,true_tv,true_w1`.
    pub fn to_csv(&self) -> String {
        let mut w = crate::csvfmt::writer();
        w.write_record(["name", "value", "applicable", "reason", "dominates", "true_tv", "true_w1"])
            .expect("in-memory write");
        let tv = crate::csvfmt::opt(self.true_tv);
        let w1 = crate::csvfmt::opt(self.true_w1);
        for e in &self.entries {
            w.write_record([
                e.name.as_str(),
                &crate::csvfmt::opt(e.value()),
                if e.bound.is_applicable() { "true" } else { "false" },
                e.reason(),
                &e.dominates.to_string(),
                &tv,
                &w1,
            ])
            .expect("in-memory write");
        }
        crate::csvfmt::finish(w)
    }
}
