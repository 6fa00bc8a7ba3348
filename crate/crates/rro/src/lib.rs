//! Robust risk-aware stochastic optimization.
//!
//! The library evaluates rank-dependent expected utility (RDEU) of controlled
//! outcome variables, trains an adversarial push-forward network that worsens
//! a policy's RDEU inside a p-Wasserstein ball (the inner problem), and trains
//! the policy against that adversary (the outer problem). Gradients flow
//! through kernel-density-smoothed ranks, so tail-weighted risk measures such
//! as CVaR stay differentiable, and the ball constraint is enforced with an
//! augmented-Lagrangian controller.
//!
//! Modules:
//! - [`risk`]: distortion functions, utilities, empirical RDEU.
//! - [`wasserstein`]: one-dimensional p-Wasserstein distance by rank pairing.
//! - [`density`]: kernel CDF estimates and normalized kernel weights.
//! - [`nn`]: minimal feed-forward networks with reverse-mode gradients.
//! - [`optim`]: ADAM and the Lagrange multiplier schedule.
//! - [`pg`]: the gradient estimators and the alternating training drivers.
//! - [`markets`]: scenario simulators for the three case studies.

pub mod density;
pub mod error;
pub mod markets;
pub mod nn;
pub mod optim;
pub mod pg;
pub mod risk;
pub mod seeds;
pub mod wasserstein;

pub use error::{Error, Result};
