//! Score-function gradient of the smoothed outcome distribution for
//! randomized policies.
//!
//! When actions are drawn from a parameterized density `pi(a | state)`, the
//! gradient of smoothed tail probabilities of the terminal outcome follows
//! the log-derivative trick: each sampled trajectory contributes its summed
//! score `sum_t grad log pi(a_t | x_t)` weighted by a kernel CDF of its
//! terminal value. Per grid point `x` the estimator is
//!
//! ```text
//!     (1/N) sum_m [ sum_t grad log pi(a_t | x_t) ] * Phi((x_m - x) / h),
//! ```
//!
//! the gradient of `E[Phi((X - x)/h)]`, the smoothed upper-tail probability
//! at level `x` (the smoothed CDF gradient is its negative, since scores have
//! zero mean).

use crate::density::{bandwidth, KdeSpec};
use crate::error::{Error, Result};

/// One sampled trajectory: the terminal outcome and the summed score
/// `sum_t grad_phi log pi(a_t | x_t)` along the path.
#[derive(Debug, Clone)]
pub struct ScoredPath {
    pub terminal: f64,
    pub score: Vec<f64>,
}

/// Uniformly weighted estimator over sampled paths; returns one gradient
/// vector per grid point.
pub fn randomized_cdf_gradient(
    paths: &[ScoredPath],
    x_grid: &[f64],
    kde: &KdeSpec,
) -> Result<Vec<Vec<f64>>> {
    let w = 1.0 / paths.len().max(1) as f64;
    let weights = vec![w; paths.len()];
    randomized_cdf_gradient_weighted(paths, &weights, x_grid, kde)
}

/// Weighted form: `weights[m]` replaces `1/N`, so exhaustive enumerations can
/// pass exact path probabilities.
pub fn randomized_cdf_gradient_weighted(
    paths: &[ScoredPath],
    weights: &[f64],
    x_grid: &[f64],
    kde: &KdeSpec,
) -> Result<Vec<Vec<f64>>> {
    if paths.is_empty() {
        return Err(Error::EmptySample("randomized_cdf_gradient"));
    }
    if paths.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "randomized_cdf_gradient weights",
            left: paths.len(),
            right: weights.len(),
        });
    }
    let dim = paths[0].score.len();
    if let Some(i) = paths.iter().position(|p| p.score.len() != dim) {
        return Err(Error::ShapeMismatch {
            what: "path score dimension",
            expected: dim,
            got: paths[i].score.len(),
        });
    }
    let terminals: Vec<f64> = paths.iter().map(|p| p.terminal).collect();
    let h = bandwidth(&terminals, &kde.bandwidth)?;

    let mut out = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let mut grad = vec![0.0; dim];
        for (path, &w) in paths.iter().zip(weights.iter()) {
            let k = w * kde.kernel.cdf((path.terminal - x) / h);
            if k != 0.0 {
                for (g, s) in grad.iter_mut().zip(path.score.iter()) {
                    *g += k * s;
                }
            }
        }
        out.push(grad);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Kernel;

    #[test]
    fn zero_scores_give_zero_gradient() {
        let paths: Vec<ScoredPath> = (0..50)
            .map(|k| ScoredPath {
                terminal: k as f64 * 0.1,
                score: vec![0.0, 0.0],
            })
            .collect();
        let kde = KdeSpec::gaussian_silverman();
        let grads = randomized_cdf_gradient(&paths, &[0.0, 2.0, 5.0], &kde).unwrap();
        for g in grads {
            assert_eq!(g, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn empty_paths_error() {
        let kde = KdeSpec::gaussian_silverman();
        assert!(randomized_cdf_gradient(&[], &[0.0], &kde).is_err());
    }

    #[test]
    fn weighted_matches_duplicated_uniform() {
        // a path with weight 2/3 equals the same path appearing twice in a
        // uniform 3-path sample
        let a = ScoredPath {
            terminal: 1.0,
            score: vec![0.5],
        };
        let b = ScoredPath {
            terminal: -1.0,
            score: vec![-0.25],
        };
        let kde = KdeSpec::fixed(Kernel::Gaussian, 0.7).unwrap();
        let grid = [-0.5, 0.0, 1.2];
        let uniform =
            randomized_cdf_gradient(&[a.clone(), a.clone(), b.clone()], &grid, &kde).unwrap();
        let weighted = randomized_cdf_gradient_weighted(
            &[a, b],
            &[2.0 / 3.0, 1.0 / 3.0],
            &grid,
            &kde,
        )
        .unwrap();
        for (u, w) in uniform.iter().zip(weighted.iter()) {
            assert!((u[0] - w[0]).abs() < 1e-15);
        }
    }
}
