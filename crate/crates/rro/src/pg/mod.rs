//! Policy-gradient estimators for the inner (adversary) and outer (policy)
//! problems, plus the alternating training drivers.
//!
//! Both problems optimize the augmented Lagrangian
//!
//! ```text
//!     L = rdeu(X_theta) + lambda * c + (mu / 2) * c^2,
//!     c = (d_p(X_theta, X_phi)^p - epsilon^p)_+ ,
//! ```
//!
//! on a mini batch. Tail-weighted distortions make the rank weights
//! discontinuous, so the batch objective replaces hard ranks with smoothed
//! ranks `u_i = F_hat(x_theta_i)` from a kernel CDF estimate; see
//! [`surrogate::smoothed_lagrangian`] for the exact scalar being
//! differentiated. The estimators here return its gradient:
//!
//! ```text
//!     grad L = -(1/N) sum_i [ U'(x_i) gamma(u_i)
//!                             - p Lambda |x_i - xc_i|^(p-1) sgn(x_i - xc_i) ]
//!              * (tape gradient of x_i),
//! ```
//!
//! with `xc` the comonotonic reorder of `x_phi` and
//! `Lambda = (lambda + mu c) 1{d_p > epsilon}`. The comonotonic permutation
//! and the smoothed-rank weights are recomputed each batch but not
//! differentiated through; away from ties both are locally constant, so the
//! estimator is the almost-everywhere exact gradient of the batch objective.
//! Optionally the tape term can be averaged under the normalized kernel
//! weights (the quantile-derivative ratio `grad F_hat / f_hat` evaluated at
//! the samples); this adds smoothing bias of order h^2, so the plain
//! per-sample form is the default.

mod driver;
mod randomized;
pub mod surrogate;

pub use driver::{
    solve_inner, solve_inner_sampled, solve_outer, BatchEval, BatchPullback, Direction,
    InnerConfig, InnerReport, MlpPushForward, OuterConfig, OuterReport, OuterTraceRecord,
    PolicyModel, PushForward, StoppingRule, TraceRecord,
};
pub use randomized::{randomized_cdf_gradient, randomized_cdf_gradient_weighted, ScoredPath};

use crate::density::{self, KdeSpec};
use crate::error::{Error, Result};
use crate::optim::LagrangeState;
use crate::risk::{DistortionSpec, EmpiricalDistribution, UtilitySpec};
use crate::wasserstein::{self, signed_pow_pm1, WassersteinSpec};

/// Everything the estimators need to know about the risk functional and the
/// ambiguity ball.
#[derive(Debug, Clone)]
pub struct EstimatorSpecs {
    pub distortion: DistortionSpec,
    pub utility: UtilitySpec,
    pub wasserstein: WassersteinSpec,
    pub kde: KdeSpec,
}

/// Penalty weight `Lambda = (lambda + mu c) 1{d_p > epsilon}`; exactly zero
/// whenever the batch distance is inside the ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaWeight {
    pub value: f64,
}

impl LambdaWeight {
    pub fn compute(state: &LagrangeState, distance_pow: f64, epsilon_pow: f64) -> Self {
        let constraint = (distance_pow - epsilon_pow).max(0.0);
        let value = if distance_pow > epsilon_pow {
            state.lambda + state.mu * constraint
        } else {
            0.0
        };
        Self { value }
    }
}

type ThetaPullbackFn = Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync + Send>;
type PhiPullbackFn = Box<dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Sync + Send>;

/// Paired mini-batch realizations of `(X_phi, X_theta)` with the gradient
/// tapes needed by the estimators.
///
/// `theta_pullback` maps per-sample cotangents on `x_theta` to the gradient
/// with respect to the adversary parameters. `phi_pullback` maps cotangent
/// pairs (on `x_theta` and on `x_phi`, both in original sample order) to the
/// gradient with respect to the policy parameters.
pub struct SampleBatch {
    x_phi: Vec<f64>,
    x_theta: Vec<f64>,
    theta_pullback: Option<ThetaPullbackFn>,
    phi_pullback: Option<PhiPullbackFn>,
}

impl SampleBatch {
    pub fn new(x_phi: Vec<f64>, x_theta: Vec<f64>) -> Result<Self> {
        if x_phi.len() < 2 {
            return Err(Error::EmptySample("SampleBatch needs N >= 2"));
        }
        if x_phi.len() != x_theta.len() {
            return Err(Error::LengthMismatch {
                what: "SampleBatch",
                left: x_phi.len(),
                right: x_theta.len(),
            });
        }
        if let Some(i) = x_phi.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "batch x_phi",
                index: i,
            });
        }
        if let Some(i) = x_theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "batch x_theta",
                index: i,
            });
        }
        Ok(Self {
            x_phi,
            x_theta,
            theta_pullback: None,
            phi_pullback: None,
        })
    }

    pub fn with_theta_pullback(
        mut self,
        f: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync + Send + 'static,
    ) -> Self {
        self.theta_pullback = Some(Box::new(f));
        self
    }

    pub fn with_phi_pullback(
        mut self,
        f: impl Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Sync + Send + 'static,
    ) -> Self {
        self.phi_pullback = Some(Box::new(f));
        self
    }

    pub fn len(&self) -> usize {
        self.x_theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_theta.is_empty()
    }

    pub fn x_phi(&self) -> &[f64] {
        &self.x_phi
    }

    pub fn x_theta(&self) -> &[f64] {
        &self.x_theta
    }
}

/// Whether the tape term uses the plain per-sample gradient (the exact
/// gradient of the batch objective) or the kernel-row average of tape
/// gradients (the quantile-derivative form; extra O(h^2) smoothing).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TapeSmoothing {
    #[default]
    Direct,
    KernelRow,
}

/// Batch-level quantities shared by the estimators and the drivers.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub distance: f64,
    pub constraint_error: f64,
    pub lambda: LambdaWeight,
    /// Rank-based empirical RDEU of `x_theta` (reporting quantity).
    pub rdeu: f64,
}

/// Per-sample coefficients of the two gradient terms, before any tape pull.
struct BatchCoefficients {
    /// `-U'(x_i) gamma(u_i) / N`: cotangent of the RDEU term on `x_theta`.
    rdeu_cot: Vec<f64>,
    /// `+p Lambda |x_i - xc_i|^(p-1) sgn(x_i - xc_i) / N`: cotangent of the
    /// penalty term on `x_theta`.
    penalty_cot: Vec<f64>,
    /// Comonotonic index map: `x_phi_c[i] = x_phi[sigma[i]]`.
    sigma: Vec<usize>,
    stats: BatchStats,
}

fn batch_coefficients(
    batch: &SampleBatch,
    specs: &EstimatorSpecs,
    lstate: &LagrangeState,
) -> Result<BatchCoefficients> {
    let n = batch.len();
    let nf = n as f64;
    let x_theta = batch.x_theta();
    let x_phi = batch.x_phi();

    let smoothed_ranks = density::self_cdf(x_theta, &specs.kde)?;
    let sigma = wasserstein::comonotonic_indices(x_theta, x_phi)?;

    let p = specs.wasserstein.order;
    let mut distance_pow = 0.0;
    for i in 0..n {
        distance_pow += wasserstein::pow_p(x_theta[i] - x_phi[sigma[i]], p);
    }
    distance_pow /= nf;
    let epsilon_pow = specs.wasserstein.epsilon_pow();
    let lambda = LambdaWeight::compute(lstate, distance_pow, epsilon_pow);
    let constraint_error = (distance_pow - epsilon_pow).max(0.0);

    let mut rdeu_cot = vec![0.0; n];
    let mut penalty_cot = vec![0.0; n];
    for i in 0..n {
        let gamma = specs.distortion.gamma(smoothed_ranks[i])?;
        rdeu_cot[i] = -specs.utility.derivative(x_theta[i]) * gamma / nf;
        if lambda.value != 0.0 {
            let iota = signed_pow_pm1(x_theta[i] - x_phi[sigma[i]], p);
            penalty_cot[i] = p * lambda.value * iota / nf;
        }
        if !rdeu_cot[i].is_finite() || !penalty_cot[i].is_finite() {
            return Err(Error::NonFinite {
                what: "gradient coefficient",
                index: i,
            });
        }
    }

    let rdeu =
        EmpiricalDistribution::new(x_theta.to_vec())?.rdeu(&specs.distortion, &specs.utility);
    Ok(BatchCoefficients {
        rdeu_cot,
        penalty_cot,
        sigma,
        stats: BatchStats {
            distance: distance_pow.powf(1.0 / p),
            constraint_error,
            lambda,
            rdeu,
        },
    })
}

/// Left-multiply the cotangent vector by the transpose of the normalized
/// kernel weight matrix of `points`: `out_j = sum_i w_ij cot_i`.
fn kernel_row_mix(points: &[f64], cot: &[f64], kde: &KdeSpec) -> Result<Vec<f64>> {
    let n = points.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        if cot[i] == 0.0 {
            continue;
        }
        let row = density::kernel_weights(points, i, kde)?;
        for j in 0..n {
            out[j] += row.weights[j] * cot[i];
        }
    }
    Ok(out)
}

/// Gradient of the batch objective with respect to the adversary parameters,
/// along with the batch statistics. The two terms are returned separately so
/// a maximizing driver can ascend the RDEU term while descending the penalty.
pub struct InnerGradient {
    pub rdeu_term: Vec<f64>,
    pub penalty_term: Vec<f64>,
    pub stats: BatchStats,
}

impl InnerGradient {
    /// `grad L`: the full gradient of the augmented Lagrangian.
    pub fn total(&self) -> Vec<f64> {
        self.rdeu_term
            .iter()
            .zip(self.penalty_term.iter())
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Direction for an ADAM descent step solving the given problem:
    /// minimizing descends `L` itself; maximizing descends
    /// `penalty - rdeu` so the risk rises while the ball constraint stays
    /// enforced.
    pub fn descent_direction(&self, direction: Direction) -> Vec<f64> {
        match direction {
            Direction::Minimize => self.total(),
            Direction::Maximize => self
                .rdeu_term
                .iter()
                .zip(self.penalty_term.iter())
                .map(|(a, b)| b - a)
                .collect(),
        }
    }
}

pub fn inner_gradient_pieces(
    batch: &SampleBatch,
    specs: &EstimatorSpecs,
    lstate: &LagrangeState,
    smoothing: TapeSmoothing,
) -> Result<InnerGradient> {
    let coeffs = batch_coefficients(batch, specs, lstate)?;
    let pullback = batch
        .theta_pullback
        .as_ref()
        .ok_or(Error::MissingTape("batch has no theta pullback"))?;
    let (rdeu_cot, penalty_cot) = match smoothing {
        TapeSmoothing::Direct => (coeffs.rdeu_cot, coeffs.penalty_cot),
        TapeSmoothing::KernelRow => (
            kernel_row_mix(batch.x_theta(), &coeffs.rdeu_cot, &specs.kde)?,
            kernel_row_mix(batch.x_theta(), &coeffs.penalty_cot, &specs.kde)?,
        ),
    };
    Ok(InnerGradient {
        rdeu_term: pullback(&rdeu_cot)?,
        penalty_term: pullback(&penalty_cot)?,
        stats: coeffs.stats,
    })
}

/// Gradient of the batch augmented Lagrangian with respect to the adversary
/// parameters. The adversary ascends the RDEU part of this objective; use
/// [`InnerGradient::descent_direction`] via [`inner_gradient_pieces`] when
/// driving an optimizer.
pub fn inner_gradient(
    batch: &SampleBatch,
    dist: &DistortionSpec,
    util: &UtilitySpec,
    wspec: &WassersteinSpec,
    lstate: &LagrangeState,
    kde: &KdeSpec,
) -> Result<Vec<f64>> {
    let specs = EstimatorSpecs {
        distortion: dist.clone(),
        utility: *util,
        wasserstein: *wspec,
        kde: *kde,
    };
    Ok(inner_gradient_pieces(batch, &specs, lstate, TapeSmoothing::Direct)?.total())
}

/// Outer gradient pieces: the RDEU term flows only through the `x_theta`
/// tapes, the penalty term through both `x_theta` and the comonotonic
/// reordering of `x_phi`.
pub struct OuterGradient {
    pub rdeu_term: Vec<f64>,
    pub penalty_term: Vec<f64>,
    pub stats: BatchStats,
}

impl OuterGradient {
    pub fn total(&self) -> Vec<f64> {
        self.rdeu_term
            .iter()
            .zip(self.penalty_term.iter())
            .map(|(a, b)| a + b)
            .collect()
    }
}

pub fn outer_gradient_pieces(
    batch: &SampleBatch,
    specs: &EstimatorSpecs,
    lstate: &LagrangeState,
    smoothing: TapeSmoothing,
) -> Result<OuterGradient> {
    let coeffs = batch_coefficients(batch, specs, lstate)?;
    let pullback = batch
        .phi_pullback
        .as_ref()
        .ok_or(Error::MissingTape("batch has no phi pullback"))?;
    let n = batch.len();

    // penalty cotangent on x_phi, in original order: the pairing term
    // |x_theta_i - x_phi_c_i|^p differentiates with the opposite sign on the
    // reordered side
    let mut phi_cot = vec![0.0; n];
    for i in 0..n {
        phi_cot[coeffs.sigma[i]] = -coeffs.penalty_cot[i];
    }

    let (rdeu_cot, penalty_cot, phi_cot) = match smoothing {
        TapeSmoothing::Direct => (coeffs.rdeu_cot, coeffs.penalty_cot, phi_cot),
        TapeSmoothing::KernelRow => {
            // the x_phi_c side mixes under the kernel rows of the reordered
            // sample, then maps back to original order
            let x_phi_c: Vec<f64> = coeffs.sigma.iter().map(|&j| batch.x_phi()[j]).collect();
            let cot_c: Vec<f64> = coeffs.penalty_cot.iter().map(|c| -c).collect();
            let mixed_c = kernel_row_mix(&x_phi_c, &cot_c, &specs.kde)?;
            let mut phi_mixed = vec![0.0; n];
            for i in 0..n {
                phi_mixed[coeffs.sigma[i]] = mixed_c[i];
            }
            (
                kernel_row_mix(batch.x_theta(), &coeffs.rdeu_cot, &specs.kde)?,
                kernel_row_mix(batch.x_theta(), &coeffs.penalty_cot, &specs.kde)?,
                phi_mixed,
            )
        }
    };

    let zeros = vec![0.0; n];
    Ok(OuterGradient {
        rdeu_term: pullback(&rdeu_cot, &zeros)?,
        penalty_term: pullback(&penalty_cot, &phi_cot)?,
        stats: coeffs.stats,
    })
}

/// Gradient of the batch augmented Lagrangian with respect to the policy
/// parameters, holding the adversary fixed. The policy driver descends this.
pub fn outer_gradient(
    batch: &SampleBatch,
    dist: &DistortionSpec,
    util: &UtilitySpec,
    wspec: &WassersteinSpec,
    lstate: &LagrangeState,
    kde: &KdeSpec,
) -> Result<Vec<f64>> {
    let specs = EstimatorSpecs {
        distortion: dist.clone(),
        utility: *util,
        wasserstein: *wspec,
        kde: *kde,
    };
    Ok(outer_gradient_pieces(batch, &specs, lstate, TapeSmoothing::Direct)?.total())
}
