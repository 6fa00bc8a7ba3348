//! Empirical one-dimensional p-Wasserstein distance via comonotonic pairing.
//!
//! In one dimension the optimal coupling of two equal-size samples matches
//! values rank by rank, so the mini-batch distance is
//!
//! ```text
//!     d_p(a, b) = ( (1/N) sum_i |a_(i) - b_(i)|^p )^(1/p)
//! ```
//!
//! over the sorted values. `constraint_error` is the positive part of
//! `d_p^p - epsilon^p` used by the augmented-Lagrangian penalty.

use crate::error::{Error, Result};
use crate::risk::argsort;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WassersteinSpec {
    /// Order `p >= 1`. Experiments use p = 1 or p = 2.
    pub order: f64,
    /// Ball radius, in outcome (monetary) units. May be infinite.
    pub epsilon: f64,
}

impl WassersteinSpec {
    pub fn new(order: f64, epsilon: f64) -> Result<Self> {
        if !(order >= 1.0) {
            return Err(Error::InvalidSpec {
                what: "Wasserstein order",
                why: format!("order must be >= 1, got {order}"),
            });
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidSpec {
                what: "Wasserstein radius",
                why: format!("epsilon must be >= 0, got {epsilon}"),
            });
        }
        Ok(Self { order, epsilon })
    }

    pub fn epsilon_pow(&self) -> f64 {
        pow_p(self.epsilon, self.order)
    }
}

/// `|x|^p` with fast paths for the orders used in practice.
#[inline]
pub(crate) fn pow_p(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

/// `|x|^(p-1) * sign(x)`, the derivative of `|x|^p / p`. For p = 1 this is
/// the sign, with the convention `0` at `x == 0`.
#[inline]
pub(crate) fn signed_pow_pm1(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let s = x.signum();
    if p == 1.0 {
        s
    } else if p == 2.0 {
        x.abs() * s
    } else {
        x.abs().powf(p - 1.0) * s
    }
}

fn check_pair(what: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::EmptySample(what));
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what,
            left: a.len(),
            right: b.len(),
        });
    }
    for (i, v) in a.iter().chain(b.iter()).enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what,
                index: i % a.len(),
            });
        }
    }
    Ok(())
}

/// Index map `sigma` such that `b[sigma[i]]` has the same rank among `b` as
/// `a[i]` has among `a`. Ties in either vector are broken by original index,
/// so the map is deterministic.
pub fn comonotonic_indices(a: &[f64], b: &[f64]) -> Result<Vec<usize>> {
    check_pair("comonotonic_indices", a, b)?;
    let order_a = argsort(a);
    let order_b = argsort(b);
    let mut sigma = vec![0usize; a.len()];
    for (rank, &ia) in order_a.iter().enumerate() {
        sigma[ia] = order_b[rank];
    }
    Ok(sigma)
}

/// Reorder `b` so that `(a, b')` is comonotonic: `rank(b'[i]) == rank(a[i])`.
pub fn comonotonic_pair(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let sigma = comonotonic_indices(a, b)?;
    Ok(sigma.iter().map(|&j| b[j]).collect())
}

/// Mean p-th power of the sorted differences, `(1/N) sum |a_(i) - b_(i)|^p`.
/// This equals `distance(a, b)^p`.
pub fn power_distance(a: &[f64], b: &[f64], spec: &WassersteinSpec) -> Result<f64> {
    check_pair("wasserstein::power_distance", a, b)?;
    let oa = argsort(a);
    let ob = argsort(b);
    let n = a.len();
    let mut acc = 0.0;
    for k in 0..n {
        acc += pow_p(a[oa[k]] - b[ob[k]], spec.order);
    }
    Ok(acc / n as f64)
}

/// Empirical p-Wasserstein distance between two equal-size samples.
pub fn distance(a: &[f64], b: &[f64], spec: &WassersteinSpec) -> Result<f64> {
    Ok(power_distance(a, b, spec)?.powf(1.0 / spec.order))
}

/// Constraint error `(d_p^p - epsilon^p)_+`.
pub fn constraint_error(a: &[f64], b: &[f64], spec: &WassersteinSpec) -> Result<f64> {
    Ok((power_distance(a, b, spec)? - spec.epsilon_pow()).max(0.0))
}
