//! Ornstein-Uhlenbeck statistical arbitrage with price impact.
//!
//! The mid price follows an Euler-discretized OU process whose drift is
//! perturbed by the trader's own order flow:
//!
//! ```text
//!     S_{t+1} = S_t + ( kappa (b - S_t) + c sgn(trade_t) sqrt(|trade_t|) ) dt
//!               + sigma sqrt(dt) xi_t .
//! ```
//!
//! The policy network maps the features `(t / T, S_t, q_{t-1})` to a target
//! inventory `q_t` bounded by a scaled-tanh head; the executed trade is
//! `q_t - q_{t-1}` and terminal wealth telescopes as
//! `sum_t q_t (S_{t+1} - S_t)`. Gradients run backward through the whole
//! simulation, including the impact feedback into future prices and the
//! inventory feature recursion.

use crate::error::{Error, Result};
use crate::nn::{Mlp, Tape};
use crate::pg::{BatchEval, BatchPullback, PolicyModel};
use crate::seeds;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuStatArbSpec {
    pub kappa: f64,
    pub mean_level: f64,
    pub sigma: f64,
    /// Impact coefficient `c` in the drift term.
    pub impact: f64,
    pub steps: usize,
    pub dt: f64,
    pub inventory_bound: f64,
    pub s0: f64,
    /// The square-root impact has an unbounded derivative at zero trade;
    /// the backward pass floors `|trade|` at this value to keep gradients
    /// bounded. Forward simulation is unaffected.
    pub impact_grad_floor: f64,
}

impl Default for OuStatArbSpec {
    fn default() -> Self {
        Self {
            kappa: 5.0,
            mean_level: 1.0,
            sigma: 0.8,
            impact: 0.1,
            steps: 252,
            dt: 1.0 / 252.0,
            inventory_bound: 5.0,
            s0: 1.0,
            impact_grad_floor: 1e-2,
        }
    }
}

impl OuStatArbSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa > 0.0
            && self.sigma > 0.0
            && self.impact >= 0.0
            && self.steps > 0
            && self.dt > 0.0
            && self.inventory_bound > 0.0;
        if !ok {
            return Err(Error::InvalidSpec {
                what: "OU stat-arb market",
                why: format!("{self:?}"),
            });
        }
        Ok(())
    }

    fn impact_drift(&self, trade: f64) -> f64 {
        self.impact * trade.signum() * trade.abs().sqrt()
    }

    /// Derivative of the impact drift in the trade; the square root blows up
    /// at zero, so the argument is floored for a bounded backward pass.
    fn impact_drift_derivative(&self, trade: f64) -> f64 {
        0.5 * self.impact / trade.abs().max(self.impact_grad_floor).sqrt()
    }
}

/// One simulated path.
#[derive(Debug, Clone)]
pub struct StatArbPath {
    /// Prices `S_0..S_T` (length steps + 1).
    pub prices: Vec<f64>,
    /// Target inventory per step (length steps).
    pub inventory: Vec<f64>,
    pub wealth: f64,
}

struct PathRecord {
    path: StatArbPath,
    trades: Vec<f64>,
    tapes: Vec<Tape>,
}

fn simulate_record(spec: &OuStatArbSpec, policy: &Mlp, seed: u64) -> Result<PathRecord> {
    let t_max = spec.steps;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut prices = Vec::with_capacity(t_max + 1);
    let mut inventory = Vec::with_capacity(t_max);
    let mut trades = Vec::with_capacity(t_max);
    let mut tapes = Vec::with_capacity(t_max);
    prices.push(spec.s0);
    let mut q_prev = 0.0;
    let mut wealth = 0.0;
    let sq_dt = spec.dt.sqrt();
    for t in 0..t_max {
        let s = prices[t];
        if !s.is_finite() {
            return Err(Error::NonFinite {
                what: "stat-arb price",
                index: t,
            });
        }
        let features = [t as f64 / t_max as f64, s, q_prev];
        let (out, tape) = policy.forward_tape(&features)?;
        let q = out[0];
        assert!(
            q.abs() <= spec.inventory_bound,
            "inventory bound violated: |{q}| > {}",
            spec.inventory_bound
        );
        let trade = q - q_prev;
        let noise: f64 = StandardNormal.sample(&mut rng);
        let drift = spec.kappa * (spec.mean_level - s) + spec.impact_drift(trade);
        let next = s + drift * spec.dt + spec.sigma * sq_dt * noise;
        wealth += q * (next - s);
        prices.push(next);
        inventory.push(q);
        trades.push(trade);
        tapes.push(tape);
        q_prev = q;
    }
    Ok(PathRecord {
        path: StatArbPath {
            prices,
            inventory,
            wealth,
        },
        trades,
        tapes,
    })
}

/// Simulate one path under the given policy.
pub fn simulate_statarb_path(spec: &OuStatArbSpec, policy: &Mlp, seed: u64) -> Result<StatArbPath> {
    spec.validate()?;
    Ok(simulate_record(spec, policy, seed)?.path)
}

/// Reverse pass: accumulate `wealth_cot * d wealth / d params` into `grad`.
fn backward_path(
    spec: &OuStatArbSpec,
    policy: &Mlp,
    rec: &PathRecord,
    wealth_cot: f64,
    grad: &mut [f64],
) -> Result<()> {
    let t_max = spec.steps;
    let prices = &rec.path.prices;
    let q = &rec.path.inventory;
    let mut s_bar = vec![0.0; t_max + 1];
    let mut q_bar = vec![0.0; t_max];
    for t in 0..t_max {
        q_bar[t] += wealth_cot * (prices[t + 1] - prices[t]);
        s_bar[t + 1] += wealth_cot * q[t];
        s_bar[t] -= wealth_cot * q[t];
    }
    for t in (0..t_max).rev() {
        // price dynamics
        s_bar[t] += s_bar[t + 1] * (1.0 - spec.kappa * spec.dt);
        let trade_bar = s_bar[t + 1] * spec.impact_drift_derivative(rec.trades[t]) * spec.dt;
        // trade = q_t - q_{t-1}
        q_bar[t] += trade_bar;
        if t > 0 {
            q_bar[t - 1] -= trade_bar;
        }
        // q_t = policy(t/T, S_t, q_{t-1})
        let in_cot = policy.backward(&rec.tapes[t], &[q_bar[t]], grad)?;
        s_bar[t] += in_cot[1];
        if t > 0 {
            q_bar[t - 1] += in_cot[2];
        }
    }
    Ok(())
}

/// Dynamic trading policy over the OU market.
pub struct StatArbPolicy {
    pub net: Mlp,
    pub market: OuStatArbSpec,
    pub batch: usize,
}

impl StatArbPolicy {
    pub fn new(net: Mlp, market: OuStatArbSpec, batch: usize) -> Result<Self> {
        market.validate()?;
        if net.input_dim() != 3 || net.output_dim() != 1 {
            return Err(Error::ShapeMismatch {
                what: "stat-arb policy shape",
                expected: 3,
                got: net.input_dim(),
            });
        }
        Ok(Self { net, market, batch })
    }

    /// Trade surface on a `(inventory, price)` grid at time fraction
    /// `t_frac`: entries are `policy(t, S, q) - q`.
    pub fn trade_grid(
        &self,
        t_frac: f64,
        inventories: &[f64],
        prices: &[f64],
    ) -> Result<Vec<(f64, f64, f64)>> {
        let mut out = Vec::with_capacity(inventories.len() * prices.len());
        for &q in inventories {
            for &s in prices {
                let target = self.net.forward(&[t_frac, s, q])?[0];
                out.push((q, s, target - q));
            }
        }
        Ok(out)
    }
}

struct StatArbBatchTape {
    net: Mlp,
    market: OuStatArbSpec,
    records: Vec<PathRecord>,
}

impl BatchPullback for StatArbBatchTape {
    fn params(&self, cotangent: &[f64]) -> Result<Vec<f64>> {
        if cotangent.len() != self.records.len() {
            return Err(Error::LengthMismatch {
                what: "stat-arb pullback",
                left: cotangent.len(),
                right: self.records.len(),
            });
        }
        const CHUNK: usize = 64;
        let partials: Vec<Vec<f64>> = self
            .records
            .par_chunks(CHUNK)
            .zip(cotangent.par_chunks(CHUNK))
            .map(|(recs, cots)| {
                let mut grad = vec![0.0; self.net.param_count()];
                for (rec, &c) in recs.iter().zip(cots.iter()) {
                    if c != 0.0 {
                        backward_path(&self.market, &self.net, rec, c, &mut grad)?;
                    }
                }
                Ok(grad)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![0.0; self.net.param_count()];
        for p in partials {
            for (g, v) in grad.iter_mut().zip(p.iter()) {
                *g += v;
            }
        }
        Ok(grad)
    }
}

impl PolicyModel for StatArbPolicy {
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
        let records: Vec<PathRecord> = (0..self.batch)
            .into_par_iter()
            .map(|k| simulate_record(&self.market, &self.net, seeds::derive(seed, k as u64)))
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = records.iter().map(|r| r.path.wealth).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "stat-arb wealth",
                index: i,
            });
        }
        Ok(BatchEval {
            values,
            tape: Box::new(StatArbBatchTape {
                net: self.net.clone(),
                market: self.market,
                records,
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OutputActivation;

    fn desk_spec() -> OuStatArbSpec {
        OuStatArbSpec {
            steps: 64,
            ..OuStatArbSpec::default()
        }
    }

    /// Policy pinned to a constant inventory via a zero-weight net with a
    /// bias chosen so the tanh head emits exactly the target.
    fn constant_policy(q: f64, bound: f64) -> Mlp {
        let mut net = Mlp::init(&[3, 2, 1], OutputActivation::ScaledTanh(bound), 0).unwrap();
        net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        // last layer: weights [2], bias [1]; set bias to atanh(q / bound)
        let pc = net.param_count();
        net.params_mut()[pc - 1] = (q / bound).atanh();
        net
    }

    #[test]
    fn zero_policy_means_zero_wealth_and_pure_ou() {
        let spec = desk_spec();
        let policy = constant_policy(0.0, spec.inventory_bound);
        let path = simulate_statarb_path(&spec, &policy, 9).unwrap();
        assert_eq!(path.wealth, 0.0);
        assert!(path.inventory.iter().all(|&q| q == 0.0));

        // with no trading the price must match the no-impact OU recursion
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let mut s = spec.s0;
        let sq_dt = spec.dt.sqrt();
        for t in 0..spec.steps {
            let noise: f64 = StandardNormal.sample(&mut rng);
            s = s + spec.kappa * (spec.mean_level - s) * spec.dt + spec.sigma * sq_dt * noise;
            assert_eq!(path.prices[t + 1], s);
        }
    }

    #[test]
    fn constant_inventory_without_impact_telescopes() {
        let spec = OuStatArbSpec {
            impact: 0.0,
            ..desk_spec()
        };
        let policy = constant_policy(1.0, spec.inventory_bound);
        let path = simulate_statarb_path(&spec, &policy, 21).unwrap();
        let expected = path.prices.last().unwrap() - path.prices[0];
        assert!((path.wealth - expected).abs() < 1e-12);
    }

    #[test]
    fn wealth_identity_holds_pathwise() {
        // sum q_t dS_t == -sum trade_t S_t + q_last S_T
        let spec = desk_spec();
        let policy = Mlp::init(&[3, 8, 1], OutputActivation::ScaledTanh(5.0), 33).unwrap();
        for seed in 0..20 {
            let rec = simulate_record(&spec, &policy, seed).unwrap();
            let p = &rec.path;
            let lhs = p.wealth;
            let mut rhs = 0.0;
            for t in 0..spec.steps {
                rhs -= rec.trades[t] * p.prices[t];
            }
            rhs += p.inventory.last().unwrap() * p.prices[spec.steps];
            assert!((lhs - rhs).abs() < 1e-10, "seed {seed}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn inventory_bound_never_violated() {
        let spec = desk_spec();
        let policy = Mlp::init(&[3, 16, 1], OutputActivation::ScaledTanh(5.0), 44).unwrap();
        for seed in 0..10 {
            let path = simulate_statarb_path(&spec, &policy, seed).unwrap();
            assert!(path.inventory.iter().all(|q| q.abs() <= 5.0));
        }
    }

    #[test]
    fn determinism() {
        let spec = desk_spec();
        let policy = Mlp::init(&[3, 8, 1], OutputActivation::ScaledTanh(5.0), 1).unwrap();
        let a = simulate_statarb_path(&spec, &policy, 5).unwrap();
        let b = simulate_statarb_path(&spec, &policy, 5).unwrap();
        assert_eq!(a.prices, b.prices);
        assert_eq!(a.wealth, b.wealth);
    }

    #[test]
    fn ou_transition_moments() {
        // moderate-size version of the acceptance check: start off the mean
        // so the decay term matters
        let spec = OuStatArbSpec {
            s0: 2.0,
            ..OuStatArbSpec::default()
        };
        let policy = constant_policy(0.0, spec.inventory_bound);
        let n = 20_000usize;
        let finals: Vec<f64> = (0..n)
            .map(|k| {
                *simulate_statarb_path(&spec, &policy, 100 + k as u64)
                    .unwrap()
                    .prices
                    .last()
                    .unwrap()
            })
            .collect();
        let nf = n as f64;
        let t_total = spec.steps as f64 * spec.dt;
        let decay = (-spec.kappa * t_total).exp();
        let true_mean = decay * spec.s0 + (1.0 - decay) * spec.mean_level;
        let true_var = spec.sigma * spec.sigma * (1.0 - (-2.0 * spec.kappa * t_total).exp())
            / (2.0 * spec.kappa);
        let mean = finals.iter().sum::<f64>() / nf;
        let var = finals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
        let se_mean = true_var.sqrt() / nf.sqrt();
        assert!(
            (mean - true_mean).abs() < 3.0 * se_mean,
            "mean {mean} vs {true_mean}"
        );
        let se_var = true_var * (2.0 / nf).sqrt();
        // Euler at dt = 1/252 biases the variance by about 1%, inside 3 SE at this n
        assert!(
            (var - true_var).abs() < 3.0 * se_var + 0.012 * true_var,
            "var {var} vs {true_var}"
        );
    }

    #[test]
    fn bptt_matches_finite_differences() {
        // disable the derivative floor so the backward pass is the exact
        // derivative of the simulated wealth at this configuration
        let spec = OuStatArbSpec {
            steps: 16,
            impact_grad_floor: 1e-12,
            ..OuStatArbSpec::default()
        };
        let net = Mlp::init(&[3, 6, 1], OutputActivation::ScaledTanh(5.0), 70).unwrap();
        let mut policy = StatArbPolicy::new(net, spec, 8).unwrap();
        let eval = policy.eval(3).unwrap();
        let cot: Vec<f64> = (0..8).map(|k| 0.2 + 0.1 * k as f64).collect();
        let grad = eval.tape.params(&cot).unwrap();

        let base = policy.params();
        let d = 1e-6;
        let scalar = |pol: &StatArbPolicy| -> f64 {
            let e = pol.eval(3).unwrap();
            e.values.iter().zip(cot.iter()).map(|(v, c)| v * c).sum()
        };
        let mut worst: f64 = 0.0;
        for k in 0..policy.param_count() {
            let mut p = base.clone();
            p[k] += d;
            policy.set_params(&p).unwrap();
            let up = scalar(&policy);
            p[k] -= 2.0 * d;
            policy.set_params(&p).unwrap();
            let dn = scalar(&policy);
            policy.set_params(&base).unwrap();
            let fd = (up - dn) / (2.0 * d);
            let err = (fd - grad[k]).abs() / fd.abs().max(1.0);
            worst = worst.max(err);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }
}
