//! The smoothed batch objective that the gradient estimators differentiate.
//!
//! On a fixed mini batch the training objective is
//!
//! ```text
//!     L(x) = -(1/N) sum_i U(x_i) gamma(F_hat(x_i))
//!            + lambda * c + (mu / 2) * c^2,
//! ```
//!
//! where `F_hat` is the kernel CDF estimate of the batch itself ("smoothed
//! ranks" instead of the sort ranks of the plain empirical RDEU), and `c` is
//! the positive-part Wasserstein constraint error against the comonotonic
//! pairing with `x_phi`. Away from rank ties, distortion breakpoints, and the
//! ball boundary, the function is differentiable and its gradient is exactly
//! what [`super::inner_gradient`] / [`super::outer_gradient`] compute, which
//! is what the finite-difference suites verify.

use crate::density;
use crate::error::Result;
use crate::optim::{lagrangian_value, LagrangeState};
use crate::pg::EstimatorSpecs;
use crate::wasserstein;

#[derive(Debug, Clone, Copy)]
pub struct SmoothedLagrangian {
    /// Full objective value.
    pub total: f64,
    /// The smoothed-rank RDEU term alone.
    pub smoothed_rdeu: f64,
    pub distance: f64,
    pub constraint_error: f64,
}

/// Evaluate the smoothed batch objective at the given realizations.
///
/// When probing with finite differences, fix the bandwidth (`BandwidthRule::Fixed`)
/// at the base point's value: the estimators treat the bandwidth as a
/// constant, matching the convention that only kernel arguments carry
/// gradients.
pub fn smoothed_lagrangian(
    x_theta: &[f64],
    x_phi: &[f64],
    specs: &EstimatorSpecs,
    lstate: &LagrangeState,
) -> Result<SmoothedLagrangian> {
    let n = x_theta.len() as f64;
    let ranks = density::self_cdf(x_theta, &specs.kde)?;
    let mut rdeu = 0.0;
    for (x, u) in x_theta.iter().zip(ranks.iter()) {
        rdeu -= specs.utility.value(*x) * specs.distortion.gamma(*u)?;
    }
    rdeu /= n;

    let distance_pow = wasserstein::power_distance(x_theta, x_phi, &specs.wasserstein)?;
    let constraint_error = (distance_pow - specs.wasserstein.epsilon_pow()).max(0.0);
    Ok(SmoothedLagrangian {
        total: lagrangian_value(rdeu, constraint_error, lstate),
        smoothed_rdeu: rdeu,
        distance: distance_pow.powf(1.0 / specs.wasserstein.order),
        constraint_error,
    })
}
