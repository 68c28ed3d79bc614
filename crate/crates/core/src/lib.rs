//! Verification toolkit for the stability of doubly-intractable posteriors.
//!
//! Posteriors of the form `exp(-phi(theta)) / (Z(theta) C_Z)` are built exactly
//! on a discretized parameter line, so total-variation and 1-Wasserstein
//! distances between `pi_Z` and a perturbed `pi_Zt` can be computed exactly
//! and compared with the stability bounds in [`bounds`]. Monte Carlo
//! recoveries of `Z` live in [`estimators`], exact Gibbs/Ising ground truth in
//! [`gibbs`], and the batch experiment drivers in [`experiments`].
//!
//! Total variation uses the `sup_{|f| <= 1}` convention: values lie in `[0, 2]`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod csvfmt;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod gibbs;
pub mod metrics;
pub mod oracle;
pub mod posterior;
pub mod transport;

pub use error::{Error, Result};
pub use posterior::{
    build_posterior, lp_norm, normalizing_constant, Exponent, Metric, Posterior, PosteriorSpec,
    ThetaGrid, WeightRule,
};
