//! Single-factor multi-asset return model.
//!
//! Asset `i` (1-based) returns `R_i = zeta + Z_i` with a shared systematic
//! factor `zeta ~ N(0, 0.02^2)` and independent idiosyncratic components
//! `Z_i ~ N(0.03 i, (0.025 i)^2)`. Higher-index assets earn more and risk
//! more, which is what makes the robustness/return trade-off visible.

use crate::error::{Error, Result};
use crate::nn::{Mlp, OutputActivation, Tape};
use crate::pg::{BatchEval, BatchPullback, PolicyModel};
use crate::seeds;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorMarketSpec {
    pub assets: usize,
    pub systematic_sd: f64,
    /// Idiosyncratic mean of asset i is `idio_mean_slope * i`.
    pub idio_mean_slope: f64,
    /// Idiosyncratic standard deviation of asset i is `idio_sd_slope * i`.
    pub idio_sd_slope: f64,
}

impl FactorMarketSpec {
    pub fn new(assets: usize) -> Result<Self> {
        if assets == 0 {
            return Err(Error::InvalidSpec {
                what: "factor market",
                why: "need at least one asset".to_string(),
            });
        }
        Ok(Self {
            assets,
            systematic_sd: 0.02,
            idio_mean_slope: 0.03,
            idio_sd_slope: 0.025,
        })
    }

    /// Draw `n` iid return rows.
    pub fn simulate_returns(&self, n: usize, seed: u64) -> ReturnsMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let d = self.assets;
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let shock: f64 = StandardNormal.sample(&mut rng);
            let zeta = self.systematic_sd * shock;
            for i in 1..=d {
                let shock: f64 = StandardNormal.sample(&mut rng);
                let z = self.idio_mean_slope * i as f64 + self.idio_sd_slope * i as f64 * shock;
                data.push(zeta + z);
            }
        }
        ReturnsMatrix { data, n, d }
    }
}

/// Row-major `n x d` matrix of simulated returns.
#[derive(Debug, Clone)]
pub struct ReturnsMatrix {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl ReturnsMatrix {
    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn assets(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Portfolio wealth per row under fixed weights.
    pub fn portfolio_wealth(&self, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.d {
            return Err(Error::ShapeMismatch {
                what: "portfolio weights",
                expected: self.d,
                got: weights.len(),
            });
        }
        Ok((0..self.n)
            .map(|i| self.row(i).iter().zip(weights).map(|(r, w)| r * w).sum())
            .collect())
    }
}

/// Static long-only allocation: a bias-only softmax head mapping a zero
/// input straight to the weight simplex. The learned parameters are the
/// softmax logits.
pub struct PortfolioPolicy {
    net: Mlp,
    pub market: FactorMarketSpec,
    pub batch: usize,
}

impl PortfolioPolicy {
    pub fn new(market: FactorMarketSpec, batch: usize, seed: u64) -> Result<Self> {
        let net = Mlp::init(&[1, market.assets], OutputActivation::Softmax, seed)?;
        Ok(Self { net, market, batch })
    }

    /// Current weight vector on the simplex.
    pub fn weights(&self) -> Vec<f64> {
        self.net.forward(&[0.0]).expect("fixed input")
    }
}

struct PortfolioTape {
    net: Mlp,
    tape: Tape,
    returns: ReturnsMatrix,
}

impl BatchPullback for PortfolioTape {
    fn params(&self, cotangent: &[f64]) -> Result<Vec<f64>> {
        if cotangent.len() != self.returns.rows() {
            return Err(Error::LengthMismatch {
                what: "portfolio pullback",
                left: cotangent.len(),
                right: self.returns.rows(),
            });
        }
        // wealth is linear in the weight vector, so the batch collapses to a
        // single head cotangent sum_i cot_i * R_i before one backward pass
        let d = self.returns.assets();
        let mut head_cot = vec![0.0; d];
        for (i, &c) in cotangent.iter().enumerate() {
            if c != 0.0 {
                for (h, r) in head_cot.iter_mut().zip(self.returns.row(i)) {
                    *h += c * r;
                }
            }
        }
        let mut grad = vec![0.0; self.net.param_count()];
        self.net.backward(&self.tape, &head_cot, &mut grad)?;
        Ok(grad)
    }
}

impl PolicyModel for PortfolioPolicy {
    fn param_count(&self) -> usize {
        self.net.param_count()
    }

    fn params(&self) -> Vec<f64> {
        self.net.params().to_vec()
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        self.net.set_params(p)
    }

    fn eval(&self, seed: u64) -> Result<BatchEval> {
        let returns = self.market.simulate_returns(self.batch, seeds::derive(seed, 0));
        let (weights, tape) = self.net.forward_tape(&[0.0])?;
        let values = returns.portfolio_wealth(&weights)?;
        Ok(BatchEval {
            values,
            tape: Box::new(PortfolioTape {
                net: self.net.clone(),
                tape,
                returns,
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let spec = FactorMarketSpec::new(4).unwrap();
        let a = spec.simulate_returns(100, 7);
        let b = spec.simulate_returns(100, 7);
        assert_eq!(a.data, b.data);
        let c = spec.simulate_returns(100, 8);
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn moments_match_model() {
        // lighter version of the acceptance check: 2e5 draws, 3 SE
        let spec = FactorMarketSpec::new(3).unwrap();
        let n = 200_000usize;
        let r = spec.simulate_returns(n, 42);
        let nf = n as f64;
        for i in 1..=3usize {
            let col: Vec<f64> = (0..n).map(|k| r.row(k)[i - 1]).collect();
            let mean = col.iter().sum::<f64>() / nf;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
            let true_mean = 0.03 * i as f64;
            let true_var = 0.02f64.powi(2) + (0.025 * i as f64).powi(2);
            let se_mean = true_var.sqrt() / nf.sqrt();
            assert!(
                (mean - true_mean).abs() < 3.0 * se_mean,
                "asset {i} mean {mean} vs {true_mean}"
            );
            let se_var = true_var * (2.0 / nf).sqrt();
            assert!(
                (var - true_var).abs() < 3.0 * se_var,
                "asset {i} var {var} vs {true_var}"
            );
        }
        // shared factor drives the off-diagonal covariance
        let c01: f64 = (0..n).map(|k| r.row(k)[0] * r.row(k)[1]).sum::<f64>() / nf
            - (0..n).map(|k| r.row(k)[0]).sum::<f64>() / nf
                * ((0..n).map(|k| r.row(k)[1]).sum::<f64>() / nf);
        let se_cov = 0.001; // loose 3-SE scale for this n
        assert!((c01 - 0.0004).abs() < 3.0 * se_cov, "cov {c01}");
    }

    #[test]
    fn policy_gradient_matches_finite_differences() {
        let spec = FactorMarketSpec::new(3).unwrap();
        let mut policy = PortfolioPolicy::new(spec, 64, 5).unwrap();
        let eval = policy.eval(11).unwrap();
        let cot: Vec<f64> = (0..64).map(|k| ((k * 13 % 7) as f64 - 3.0) * 0.1).collect();
        let grad = eval.tape.params(&cot).unwrap();

        let d = 1e-6;
        let base_params = policy.params();
        for k in 0..policy.param_count() {
            let scalar = |pol: &PortfolioPolicy| -> f64 {
                let e = pol.eval(11).unwrap();
                e.values.iter().zip(cot.iter()).map(|(v, c)| v * c).sum()
            };
            let mut p = base_params.clone();
            p[k] += d;
            policy.set_params(&p).unwrap();
            let up = scalar(&policy);
            p[k] -= 2.0 * d;
            policy.set_params(&p).unwrap();
            let dn = scalar(&policy);
            policy.set_params(&base_params).unwrap();
            let fd = (up - dn) / (2.0 * d);
            assert!(
                (fd - grad[k]).abs() < 1e-5 * fd.abs().max(1.0),
                "param {k}: fd {fd} vs {g}",
                g = grad[k]
            );
        }
    }

    #[test]
    fn weights_stay_on_simplex() {
        let spec = FactorMarketSpec::new(5).unwrap();
        let policy = PortfolioPolicy::new(spec, 8, 3).unwrap();
        let w = policy.weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&x| x > 0.0));
    }
}
