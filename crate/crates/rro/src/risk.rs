//! Rank-dependent expected utility (RDEU) on empirical samples.
//!
//! The RDEU of an outcome variable `Y` is evaluated through its quantile
//! representation
//!
//! ```text
//!     R[Y] = -\int_0^1 U(F^{-1}(s)) gamma(s) ds,
//! ```
//!
//! where `gamma` is the density of a probability distortion and `U` a
//! non-decreasing utility. Lower RDEU means a better outcome; RDEU is a risk
//! to be minimized. For an empirical sample the quantile function is the
//! left-continuous step function over the cells `((i-1)/N, i/N]`, which makes
//! the gamma-cell integrals exact for piecewise-constant distortions.

use crate::error::{Error, Result};

/// Distortion weight `gamma` on (0, 1).
///
/// The alpha-beta family mixes a lower-tail (CVaR-style) weight with an
/// upper-tail weight:
///
/// ```text
///     gamma(u) = (p * 1{u <= alpha} + (1 - p) * 1{u > beta}) / eta,
///     eta      = p * alpha + (1 - p) * (1 - beta).
/// ```
///
/// `CVaR(alpha)` is the `p = 1` case, `Ute(beta)` the `p = 0` case, and
/// `Expectation` is the identity distortion with `gamma == 1`. Distortions
/// outside this family can be tabulated as a step function on a grid
/// ([`DistortionSpec::tabulated`]); cell integrals of the tabulation stay
/// exact, the tabulation itself approximates the smooth weight.
#[derive(Debug, Clone, PartialEq)]
pub enum DistortionSpec {
    AlphaBeta {
        alpha: f64,
        beta: f64,
        p_weight: f64,
    },
    CVaR {
        alpha: f64,
    },
    Ute {
        beta: f64,
    },
    Expectation,
    /// Piecewise-constant weight: `values[k]` on `(edges[k], edges[k+1]]`.
    Tabulated {
        edges: Vec<f64>,
        values: Vec<f64>,
    },
}

impl DistortionSpec {
    /// Validated alpha-beta distortion. Requires `0 < alpha <= beta < 1`,
    /// `0 <= p_weight <= 1` and a positive normalizer.
    pub fn alpha_beta(alpha: f64, beta: f64, p_weight: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= beta && beta < 1.0) {
            return Err(Error::InvalidSpec {
                what: "alpha-beta distortion",
                why: format!("need 0 < alpha <= beta < 1, got alpha={alpha}, beta={beta}"),
            });
        }
        if !(0.0..=1.0).contains(&p_weight) {
            return Err(Error::InvalidSpec {
                what: "alpha-beta distortion",
                why: format!("p_weight must lie in [0, 1], got {p_weight}"),
            });
        }
        let eta = p_weight * alpha + (1.0 - p_weight) * (1.0 - beta);
        if eta <= 0.0 {
            return Err(Error::InvalidSpec {
                what: "alpha-beta distortion",
                why: format!("normalizer eta = {eta} must be positive"),
            });
        }
        Ok(Self::AlphaBeta {
            alpha,
            beta,
            p_weight,
        })
    }

    pub fn cvar(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidSpec {
                what: "CVaR distortion",
                why: format!("alpha must lie in (0, 1), got {alpha}"),
            });
        }
        Ok(Self::CVaR { alpha })
    }

    pub fn ute(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidSpec {
                what: "UTE distortion",
                why: format!("beta must lie in (0, 1), got {beta}"),
            });
        }
        Ok(Self::Ute { beta })
    }

    /// Step-function weight on a grid: `edges` strictly increasing from 0 to
    /// 1, one nonnegative value per cell, integrating to one (1e-10).
    pub fn tabulated(edges: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let ok = edges.len() >= 2
            && edges.len() == values.len() + 1
            && edges[0] == 0.0
            && *edges.last().unwrap() == 1.0
            && edges.windows(2).all(|w| w[0] < w[1])
            && values.iter().all(|v| v.is_finite() && *v >= 0.0);
        if !ok {
            return Err(Error::InvalidSpec {
                what: "tabulated distortion",
                why: "edges must rise strictly from 0 to 1 with one nonnegative \
                      value per cell"
                    .to_string(),
            });
        }
        let total: f64 = values
            .iter()
            .zip(edges.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidSpec {
                what: "tabulated distortion",
                why: format!("gamma must integrate to 1, got {total}"),
            });
        }
        Ok(Self::Tabulated { edges, values })
    }

    /// Effective (alpha, beta, p_weight, eta) of the two-tail variants.
    fn tail_params(&self) -> Option<(f64, f64, f64, f64)> {
        match *self {
            Self::AlphaBeta {
                alpha,
                beta,
                p_weight,
            } => {
                let eta = p_weight * alpha + (1.0 - p_weight) * (1.0 - beta);
                Some((alpha, beta, p_weight, eta))
            }
            Self::CVaR { alpha } => Some((alpha, alpha, 1.0, alpha)),
            Self::Ute { beta } => Some((beta, beta, 0.0, 1.0 - beta)),
            Self::Expectation | Self::Tabulated { .. } => None,
        }
    }

    /// Point evaluation of `gamma(u)` for `u` in (0, 1).
    ///
    /// Ties: `u = alpha` belongs to the lower-tail branch, `u = beta` to the
    /// lower branch as well (the upper indicator is strict); tabulated cells
    /// are left-open, right-closed to match.
    pub fn gamma(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain {
                what: "distortion argument u",
                range: "(0, 1)",
                value: u,
            });
        }
        match self {
            Self::Expectation => Ok(1.0),
            Self::Tabulated { edges, values } => {
                // u in (edges[j-1], edges[j]]: first edge >= u closes the cell
                let j = edges.partition_point(|e| *e < u);
                Ok(values[j - 1])
            }
            _ => {
                let (alpha, beta, p, eta) = self.tail_params().expect("two-tail variant");
                let lower = if u <= alpha { p } else { 0.0 };
                let upper = if u > beta { 1.0 - p } else { 0.0 };
                Ok((lower + upper) / eta)
            }
        }
    }

    /// Exact integral of `gamma` over the interval `(lo, hi]`, `0 <= lo <= hi <= 1`.
    pub fn cell_mass(&self, lo: f64, hi: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&lo) && lo <= hi && hi <= 1.0);
        match self {
            Self::Expectation => hi - lo,
            Self::Tabulated { edges, values } => {
                let mut acc = 0.0;
                for (v, w) in values.iter().zip(edges.windows(2)) {
                    let overlap = hi.min(w[1]) - lo.max(w[0]);
                    if overlap > 0.0 {
                        acc += v * overlap;
                    }
                }
                acc
            }
            _ => {
                let (alpha, beta, p, eta) = self.tail_params().expect("two-tail variant");
                let lower = p * (hi.min(alpha) - lo.min(alpha));
                let upper = (1.0 - p) * (hi.max(beta) - lo.max(beta));
                (lower + upper) / eta
            }
        }
    }
}

/// Utility function with its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilitySpec {
    Linear,
    /// `u(x) = (1 - exp(-a x)) / a` with risk aversion `a > 0`.
    Exponential { risk_aversion: f64 },
    /// Odd power `u(x) = sign(x) |x|^e` with exponent `e` in (0, 1).
    /// The derivative diverges at 0; callers should keep outcomes away from it.
    Power { exponent: f64 },
}

impl UtilitySpec {
    pub fn exponential(risk_aversion: f64) -> Result<Self> {
        if risk_aversion <= 0.0 {
            return Err(Error::InvalidSpec {
                what: "exponential utility",
                why: format!("risk aversion must be positive, got {risk_aversion}"),
            });
        }
        Ok(Self::Exponential { risk_aversion })
    }

    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(Error::InvalidSpec {
                what: "power utility",
                why: format!("exponent must lie in (0, 1), got {exponent}"),
            });
        }
        Ok(Self::Power { exponent })
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Self::Linear => x,
            Self::Exponential { risk_aversion } => (1.0 - (-risk_aversion * x).exp()) / risk_aversion,
            Self::Power { exponent } => x.signum() * x.abs().powf(exponent),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Linear => 1.0,
            Self::Exponential { risk_aversion } => (-risk_aversion * x).exp(),
            Self::Power { exponent } => exponent * x.abs().powf(exponent - 1.0),
        }
    }
}

/// Empirical distribution: raw outcomes plus their ascending sort order.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
    /// `order[k]` is the index of the k-th smallest value (stable over ties).
    order: Vec<usize>,
}

impl EmpiricalDistribution {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample("EmpiricalDistribution::new"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "sample values",
                index: i,
            });
        }
        let order = argsort(&values);
        Ok(Self { values, order })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// k-th smallest value.
    pub fn sorted(&self, k: usize) -> f64 {
        self.values[self.order[k]]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// RDEU against the empirical quantile function:
    /// `-sum_i U(y_(i)) * integral of gamma over ((i-1)/N, i/N]`.
    pub fn rdeu(&self, dist: &DistortionSpec, util: &UtilitySpec) -> f64 {
        let n = self.len() as f64;
        let mut acc = 0.0;
        for k in 0..self.len() {
            let mass = dist.cell_mass(k as f64 / n, (k + 1) as f64 / n);
            if mass != 0.0 {
                acc += util.value(self.sorted(k)) * mass;
            }
        }
        -acc
    }

    /// The three statistics reported for every experiment: the mean of the
    /// worst `alpha`-tail of outcomes, the mean of the best `(1-beta)`-tail,
    /// and the plain mean. Tail means are reported on the outcome (wealth)
    /// scale, i.e. as `-rdeu` of the corresponding single-tail distortion.
    pub fn summary(&self, alpha: f64, beta: f64) -> Result<RiskSummary> {
        let cvar = -self.rdeu(&DistortionSpec::cvar(alpha)?, &UtilitySpec::Linear);
        let ute = -self.rdeu(&DistortionSpec::ute(beta)?, &UtilitySpec::Linear);
        Ok(RiskSummary {
            cvar_alpha: cvar,
            ute_beta: ute,
            mean: self.mean(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskSummary {
    pub cvar_alpha: f64,
    pub ute_beta: f64,
    pub mean: f64,
}

/// Convenience: RDEU of a raw slice.
pub fn rdeu(samples: &[f64], dist: &DistortionSpec, util: &UtilitySpec) -> Result<f64> {
    Ok(EmpiricalDistribution::new(samples.to_vec())?.rdeu(dist, util))
}

/// Convenience: tail summary of a raw slice.
pub fn rdeu_summary(samples: &[f64], alpha: f64, beta: f64) -> Result<RiskSummary> {
    EmpiricalDistribution::new(samples.to_vec())?.summary(alpha, beta)
}

/// Stable argsort by value (ties broken by original index).
pub(crate) fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn alpha_beta_default() -> DistortionSpec {
        DistortionSpec::alpha_beta(0.1, 0.9, 0.75).unwrap()
    }

    /// Independent quadrature of the quantile representation: midpoint rule
    /// within each piece of the piecewise-constant gamma, against the
    /// empirical step quantile.
    fn rdeu_quadrature(samples: &[f64], dist: &DistortionSpec, util: &UtilitySpec) -> f64 {
        let d = EmpiricalDistribution::new(samples.to_vec()).unwrap();
        let n = d.len();
        let quantile = |s: f64| -> f64 {
            // left-continuous step quantile over ((i-1)/N, i/N]
            let k = ((s * n as f64).ceil() as usize).clamp(1, n) - 1;
            d.sorted(k)
        };
        // split at every gamma breakpoint and every quantile cell edge
        let mut cuts = vec![0.0, 1.0];
        if let DistortionSpec::AlphaBeta { alpha, beta, .. } = dist {
            cuts.push(*alpha);
            cuts.push(*beta);
        }
        if let DistortionSpec::CVaR { alpha } = dist {
            cuts.push(*alpha);
        }
        if let DistortionSpec::Ute { beta } = dist {
            cuts.push(*beta);
        }
        for k in 1..n {
            cuts.push(k as f64 / n as f64);
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            acc += util.value(quantile(mid)) * dist.gamma(mid).unwrap() * (hi - lo);
        }
        -acc
    }

    #[test]
    fn gamma_examples() {
        let d = alpha_beta_default();
        assert!((d.gamma(0.05).unwrap() - 7.5).abs() < 1e-12);
        assert_eq!(d.gamma(0.5).unwrap(), 0.0);
        assert!((DistortionSpec::Expectation.gamma(0.3).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_tie_breaking() {
        let d = alpha_beta_default();
        // u = alpha keeps the lower-tail weight
        assert!((d.gamma(0.1).unwrap() - 7.5).abs() < 1e-12);
        // u = beta stays on the lower branch (upper indicator strict)
        assert_eq!(d.gamma(0.9).unwrap(), 0.0);
        assert!(d.gamma(0.9 + 1e-12).unwrap() > 0.0);
    }

    #[test]
    fn gamma_domain_errors() {
        let d = alpha_beta_default();
        assert!(d.gamma(0.0).is_err());
        assert!(d.gamma(1.0).is_err());
        assert!(d.gamma(-0.5).is_err());
        assert!(d.gamma(f64::NAN).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(DistortionSpec::alpha_beta(0.9, 0.1, 0.5).is_err());
        assert!(DistortionSpec::alpha_beta(0.0, 0.9, 0.5).is_err());
        assert!(DistortionSpec::alpha_beta(0.1, 1.0, 0.5).is_err());
        assert!(DistortionSpec::alpha_beta(0.1, 0.9, 1.5).is_err());
        assert!(DistortionSpec::cvar(0.0).is_err());
        assert!(DistortionSpec::ute(1.0).is_err());
        assert!(UtilitySpec::exponential(0.0).is_err());
        assert!(UtilitySpec::power(1.0).is_err());
    }

    #[test]
    fn gamma_integrates_to_one() {
        // piecewise quadrature respecting the breakpoints, 1e-10
        let specs = [
            alpha_beta_default(),
            DistortionSpec::cvar(0.1).unwrap(),
            DistortionSpec::ute(0.9).unwrap(),
            DistortionSpec::Expectation,
            DistortionSpec::alpha_beta(0.25, 0.25, 0.3).unwrap(),
        ];
        for d in specs {
            let mut cuts = vec![0.0, 1.0];
            if let Some((a, b, _, _)) = d.tail_params() {
                cuts.push(a);
                cuts.push(b);
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut total = 0.0;
            for w in cuts.windows(2) {
                let m = 200;
                let width = (w[1] - w[0]) / m as f64;
                for k in 0..m {
                    let mid = w[0] + (k as f64 + 0.5) * width;
                    total += d.gamma(mid).unwrap() * width;
                }
            }
            assert!((total - 1.0).abs() < 1e-10, "{d:?} integrates to {total}");
        }
    }

    #[test]
    fn rdeu_examples() {
        let one_to_ten: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let cvar = DistortionSpec::cvar(0.1).unwrap();
        let lin = UtilitySpec::Linear;

        let got = rdeu(&one_to_ten, &cvar, &lin).unwrap();
        let oracle = rdeu_quadrature(&one_to_ten, &cvar, &lin);
        assert!((got - oracle).abs() < 1e-9);
        assert!((got - (-1.0)).abs() < 1e-12);

        // constant sample reduces to -U(c) for any spec
        let c = 3.7;
        let constant = vec![c; 13];
        for d in [cvar, alpha_beta_default(), DistortionSpec::Expectation] {
            let u = UtilitySpec::exponential(0.5).unwrap();
            let got = rdeu(&constant, &d, &u).unwrap();
            assert!((got + u.value(c)).abs() < 1e-12, "{d:?}");
        }

        let got = rdeu(&one_to_ten, &DistortionSpec::Expectation, &lin).unwrap();
        assert!((got - (-5.5)).abs() < 1e-12);
    }

    #[test]
    fn rdeu_empty_sample_errors() {
        assert!(rdeu(&[], &DistortionSpec::Expectation, &UtilitySpec::Linear).is_err());
    }

    #[test]
    fn summary_examples() {
        let one_to_ten: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let s = rdeu_summary(&one_to_ten, 0.1, 0.9).unwrap();
        assert!((s.cvar_alpha - 1.0).abs() < 1e-12);
        assert!((s.ute_beta - 10.0).abs() < 1e-12);
        assert!((s.mean - 5.5).abs() < 1e-12);

        let s = rdeu_summary(&[2.5], 0.1, 0.9).unwrap();
        assert!((s.cvar_alpha - 2.5).abs() < 1e-12);
        assert!((s.ute_beta - 2.5).abs() < 1e-12);
        assert!((s.mean - 2.5).abs() < 1e-12);

        let s = rdeu_summary(&[-1.0, 1.0], 0.5, 0.5).unwrap();
        assert!((s.cvar_alpha - (-1.0)).abs() < 1e-12);
        assert!((s.ute_beta - 1.0).abs() < 1e-12);
        assert!(s.mean.abs() < 1e-12);
    }

    #[test]
    fn sort_order_is_bijection() {
        let d = EmpiricalDistribution::new(vec![3.0, 1.0, 2.0, 1.0, 3.0]).unwrap();
        let mut seen = vec![false; d.len()];
        for &i in d.order() {
            assert!(!seen[i]);
            seen[i] = true;
        }
        for k in 1..d.len() {
            assert!(d.sorted(k - 1) <= d.sorted(k));
        }
    }

    proptest! {
        #[test]
        fn translation_invariance(
            xs in prop::collection::vec(-50.0f64..50.0, 1..40),
            c in -20.0f64..20.0,
        ) {
            let d = alpha_beta_default();
            let lin = UtilitySpec::Linear;
            let base = rdeu(&xs, &d, &lin).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let got = rdeu(&shifted, &d, &lin).unwrap();
            prop_assert!((got - (base - c)).abs() < 1e-9);
        }

        #[test]
        fn monotonicity(
            xs in prop::collection::vec(-50.0f64..50.0, 1..40),
            bumps in prop::collection::vec(0.0f64..10.0, 40),
        ) {
            // dominate pointwise after sorting
            let d = alpha_beta_default();
            let lin = UtilitySpec::Linear;
            let a = EmpiricalDistribution::new(xs.clone()).unwrap();
            let better: Vec<f64> = (0..xs.len()).map(|k| a.sorted(k) + bumps[k]).collect();
            let ra = rdeu(&better, &d, &lin).unwrap();
            let rb = rdeu(&xs, &d, &lin).unwrap();
            prop_assert!(ra <= rb + 1e-12);
        }

        #[test]
        fn alpha_beta_with_full_weight_equals_cvar(
            xs in prop::collection::vec(-50.0f64..50.0, 1..40),
            alpha in 0.05f64..0.6,
        ) {
            let ab = DistortionSpec::alpha_beta(alpha, 0.9, 1.0).unwrap();
            let cv = DistortionSpec::cvar(alpha).unwrap();
            let lin = UtilitySpec::Linear;
            let ra = rdeu(&xs, &ab, &lin).unwrap();
            let rb = rdeu(&xs, &cv, &lin).unwrap();
            prop_assert_eq!(ra, rb);
        }

        #[test]
        fn quadrature_cross_check(
            xs in prop::collection::vec(-10.0f64..10.0, 1..25),
            alpha in 0.05f64..0.5,
            spread in 0.0f64..0.45,
            p in 0.0f64..1.0,
        ) {
            let beta = (alpha + spread).min(0.95);
            let d = DistortionSpec::alpha_beta(alpha, beta, p).unwrap();
            let lin = UtilitySpec::Linear;
            let exact = rdeu(&xs, &d, &lin).unwrap();
            let quad = rdeu_quadrature(&xs, &d, &lin);
            prop_assert!((exact - quad).abs() < 1e-9, "exact {} quad {}", exact, quad);
        }
    }
}
