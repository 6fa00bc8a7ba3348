//! Multi-asset market for the benchmark-improvement study.
//!
//! A configurable stand-in: correlated geometric Brownian assets plus a
//! short rate (constant or mean-reverting). Wealth follows the self-financing
//! recursion
//!
//! ```text
//!     X_{t+1} = X_t ( 1 + pi_t . ret_t + (1 - sum(pi_t)) r_t dt ),
//! ```
//!
//! where `pi_t` are the fractions of wealth in each risky asset (the
//! remainder earns the short rate). The benchmark is a constant-proportion
//! strategy; the dynamic policy maps `(t / T, S_t, X_t)` to unconstrained
//! weights so it may short and leverage.

use crate::error::{Error, Result};
use crate::nn::{Mlp, Tape};
use crate::pg::{BatchEval, BatchPullback, PushForward};
use crate::seeds;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateModel {
    Constant(f64),
    /// Mean-reverting short rate `dr = kappa (theta - r) dt + sigma dW`.
    Vasicek {
        r0: f64,
        kappa: f64,
        theta: f64,
        sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkMarketSpec {
    pub drifts: Vec<f64>,
    pub vols: Vec<f64>,
    /// Equicorrelation between asset log returns.
    pub correlation: f64,
    pub rate: RateModel,
    pub steps: usize,
    pub dt: f64,
    pub s0: f64,
    pub x0: f64,
    /// Constant-proportion benchmark weights; must sum to one.
    pub benchmark_weights: Vec<f64>,
}

impl BenchmarkMarketSpec {
    /// Desk-scale default: three assets over 60 daily steps.
    pub fn standard(steps: usize) -> Self {
        Self {
            drifts: vec![0.05, 0.07, 0.09],
            vols: vec![0.15, 0.20, 0.25],
            correlation: 0.3,
            rate: RateModel::Constant(0.02),
            steps,
            dt: 1.0 / 252.0,
            s0: 1.0,
            x0: 1.0,
            benchmark_weights: vec![1.0 / 3.0; 3],
        }
    }

    pub fn assets(&self) -> usize {
        self.drifts.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.drifts.len();
        let ok = d > 0
            && self.vols.len() == d
            && self.benchmark_weights.len() == d
            && self.vols.iter().all(|v| *v > 0.0)
            && self.steps > 0
            && self.dt > 0.0
            && self.x0 > 0.0;
        if !ok {
            return Err(Error::InvalidSpec {
                what: "benchmark market",
                why: format!("{self:?}"),
            });
        }
        // equicorrelation is positive semidefinite on [-1/(d-1), 1]
        let lo = if d > 1 { -1.0 / (d as f64 - 1.0) } else { -1.0 };
        if self.correlation > 1.0 || self.correlation < lo {
            return Err(Error::InvalidSpec {
                what: "benchmark market",
                why: format!("correlation {} outside PSD range [{} , 1]", self.correlation, lo),
            });
        }
        let total: f64 = self.benchmark_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec {
                what: "benchmark market",
                why: format!("benchmark weights sum to {total}, need 1"),
            });
        }
        Ok(())
    }

    /// Correlated standard normals via the equicorrelation decomposition
    /// `z_i = sqrt(rho) z_common + sqrt(1 - rho) z_i`.
    fn correlated_normals(&self, rng: &mut ChaCha12Rng, out: &mut [f64]) {
        let rho = self.correlation.max(0.0);
        let common: f64 = StandardNormal.sample(rng);
        for o in out.iter_mut() {
            let own: f64 = StandardNormal.sample(rng);
            *o = rho.sqrt() * common + (1.0 - rho).sqrt() * own;
        }
    }

    /// Per-period simple returns and rate path for one scenario.
    fn simulate_scenario(&self, seed: u64) -> Scenario {
        let d = self.assets();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut returns = Vec::with_capacity(self.steps * d);
        let mut rates = Vec::with_capacity(self.steps);
        let mut z = vec![0.0; d];
        let sq_dt = self.dt.sqrt();
        let mut rate = match self.rate {
            RateModel::Constant(r) => r,
            RateModel::Vasicek { r0, .. } => r0,
        };
        for _ in 0..self.steps {
            rates.push(rate);
            self.correlated_normals(&mut rng, &mut z);
            for i in 0..d {
                let growth =
                    (self.drifts[i] - 0.5 * self.vols[i] * self.vols[i]) * self.dt
                        + self.vols[i] * sq_dt * z[i];
                returns.push(growth.exp() - 1.0);
            }
            if let RateModel::Vasicek {
                kappa,
                theta,
                sigma,
                ..
            } = self.rate
            {
                let shock: f64 = StandardNormal.sample(&mut rng);
                rate += kappa * (theta - rate) * self.dt + sigma * sq_dt * shock;
            }
        }
        Scenario {
            returns,
            rates,
            assets: d,
        }
    }

    /// Terminal wealth of a constant-proportion strategy on fresh scenarios.
    pub fn simulate_constant_mix(&self, weights: &[f64], n_paths: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        if weights.len() != self.assets() {
            return Err(Error::ShapeMismatch {
                what: "mix weights",
                expected: self.assets(),
                got: weights.len(),
            });
        }
        Ok((0..n_paths)
            .map(|k| {
                let sc = self.simulate_scenario(seeds::derive(seed, k as u64));
                sc.constant_mix_wealth(self, weights)
            })
            .collect())
    }
}

/// One market scenario: per-period simple returns (row-major steps x assets)
/// and the short-rate path.
struct Scenario {
    returns: Vec<f64>,
    rates: Vec<f64>,
    assets: usize,
}

impl Scenario {
    fn row(&self, t: usize) -> &[f64] {
        &self.returns[t * self.assets..(t + 1) * self.assets]
    }

    fn constant_mix_wealth(&self, spec: &BenchmarkMarketSpec, weights: &[f64]) -> f64 {
        let mut x = spec.x0;
        let cash = 1.0 - weights.iter().sum::<f64>();
        for t in 0..spec.steps {
            let risky: f64 = self.row(t).iter().zip(weights).map(|(r, w)| r * w).sum();
            x *= 1.0 + risky + cash * self.rates[t] * spec.dt;
        }
        x
    }
}

/// Record of one policy-driven wealth path for the reverse pass.
struct WealthRecord {
    wealth: Vec<f64>,
    growth: Vec<f64>,
    tapes: Vec<Tape>,
    scenario: Scenario,
}

/// Dynamic self-financing strategy trained as the inner model of the
/// benchmark study: it holds two frozen scenario sets (train, validation)
/// and replays whichever matches the reference batch it is handed.
pub struct BenchmarkPolicyModel {
    pub net: Mlp,
    pub spec: BenchmarkMarketSpec,
    train: Vec<Scenario>,
    validation: Vec<Scenario>,
    train_benchmark: Vec<f64>,
    validation_benchmark: Vec<f64>,
}

impl BenchmarkPolicyModel {
    pub fn new(net: Mlp, spec: BenchmarkMarketSpec, n_paths: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        if net.input_dim() != 2 + spec.assets() || net.output_dim() != spec.assets() {
            return Err(Error::ShapeMismatch {
                what: "benchmark policy shape",
                expected: 2 + spec.assets(),
                got: net.input_dim(),
            });
        }
        let train: Vec<Scenario> = (0..n_paths)
            .map(|k| spec.simulate_scenario(seeds::derive(seed, k as u64)))
            .collect();
        let validation: Vec<Scenario> = (0..n_paths)
            .map(|k| spec.simulate_scenario(seeds::derive(seed, 1_000_000 + k as u64)))
            .collect();
        let train_benchmark = train
            .iter()
            .map(|sc| sc.constant_mix_wealth(&spec, &spec.benchmark_weights))
            .collect();
        let validation_benchmark = validation
            .iter()
            .map(|sc| sc.constant_mix_wealth(&spec, &spec.benchmark_weights))
            .collect();
        Ok(Self {
            net,
            spec,
            train,
            validation,
            train_benchmark,
            validation_benchmark,
        })
    }

    /// Benchmark terminal wealth on the frozen training scenarios.
    pub fn train_benchmark_wealth(&self) -> &[f64] {
        &self.train_benchmark
    }

    /// Benchmark terminal wealth on the frozen validation scenarios.
    pub fn validation_benchmark_wealth(&self) -> &[f64] {
        &self.validation_benchmark
    }

    fn run_policy(&self, scenario_set: &[Scenario]) -> Result<Vec<WealthRecord>> {
        scenario_set
            .par_iter()
            .map(|sc| {
                let t_max = self.spec.steps;
                let d = self.spec.assets();
                let mut wealth = Vec::with_capacity(t_max + 1);
                let mut growth = Vec::with_capacity(t_max);
                let mut tapes = Vec::with_capacity(t_max);
                wealth.push(self.spec.x0);
                let mut prices = vec![self.spec.s0; d];
                let mut features = vec![0.0; 2 + d];
                for t in 0..t_max {
                    features[0] = t as f64 / t_max as f64;
                    features[1..1 + d].copy_from_slice(&prices);
                    features[1 + d] = wealth[t];
                    let (pi, tape) = self.net.forward_tape(&features)?;
                    let ret = sc.row(t);
                    let risky: f64 = pi.iter().zip(ret).map(|(p, r)| p * r).sum();
                    let g = 1.0 + risky + (1.0 - pi.iter().sum::<f64>()) * sc.rates[t] * self.spec.dt;
                    wealth.push(wealth[t] * g);
                    growth.push(g);
                    tapes.push(tape);
                    for (p, r) in prices.iter_mut().zip(ret) {
                        *p *= 1.0 + r;
                    }
                }
                if !wealth[t_max].is_finite() {
                    return Err(Error::NonFinite {
                        what: "benchmark policy wealth",
                        index: t_max,
                    });
                }
                Ok(WealthRecord {
                    wealth,
                    growth,
                    tapes,
                    scenario: Scenario {
                        returns: sc.returns.clone(),
                        rates: sc.rates.clone(),
                        assets: sc.assets,
                    },
                })
            })
            .collect()
    }
}

struct BenchmarkBatchTape {
    net: Mlp,
    spec: BenchmarkMarketSpec,
    records: Vec<WealthRecord>,
}

impl BatchPullback for BenchmarkBatchTape {
    fn params(&self, cotangent: &[f64]) -> Result<Vec<f64>> {
        if cotangent.len() != self.records.len() {
            return Err(Error::LengthMismatch {
                what: "benchmark pullback",
                left: cotangent.len(),
                right: self.records.len(),
            });
        }
        const CHUNK: usize = 64;
        let d = self.spec.assets();
        let partials: Vec<Vec<f64>> = self
            .records
            .par_chunks(CHUNK)
            .zip(cotangent.par_chunks(CHUNK))
            .map(|(recs, cots)| {
                let mut grad = vec![0.0; self.net.param_count()];
                for (rec, &c) in recs.iter().zip(cots.iter()) {
                    if c == 0.0 {
                        continue;
                    }
                    let t_max = self.spec.steps;
                    let mut x_bar = c;
                    for t in (0..t_max).rev() {
                        // X_{t+1} = X_t * g_t(pi_t, X_t-feature)
                        let ret = rec.scenario.row(t);
                        let r_dt = rec.scenario.rates[t] * self.spec.dt;
                        let pi_bar: Vec<f64> = ret
                            .iter()
                            .map(|r| x_bar * rec.wealth[t] * (r - r_dt))
                            .collect();
                        let in_cot = self.net.backward(&rec.tapes[t], &pi_bar, &mut grad)?;
                        x_bar = x_bar * rec.growth[t] + in_cot[1 + d];
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

impl PushForward for BenchmarkPolicyModel {
    fn param_count(&self) -> usize {
        self.net.param_count()
    }

    fn params(&self) -> Vec<f64> {
        self.net.params().to_vec()
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        self.net.set_params(p)
    }

    fn eval(&self, x_phi: &[f64], _noise_seed: u64) -> Result<BatchEval> {
        // dispatch on which frozen benchmark batch this reference is
        let set = if x_phi == self.train_benchmark.as_slice() {
            &self.train
        } else if x_phi == self.validation_benchmark.as_slice() {
            &self.validation
        } else {
            return Err(Error::MissingTape(
                "benchmark model only evaluates against its own train/validation batches",
            ));
        };
        let records = self.run_policy(set)?;
        let values: Vec<f64> = records.iter().map(|r| *r.wealth.last().unwrap()).collect();
        Ok(BatchEval {
            values,
            tape: Box::new(BenchmarkBatchTape {
                net: self.net.clone(),
                spec: self.spec.clone(),
                records,
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OutputActivation;

    #[test]
    fn all_cash_compounds_at_the_rate() {
        let spec = BenchmarkMarketSpec::standard(40);
        let w = vec![0.0; 3];
        // weights must sum to 1 only for the benchmark itself; the mix
        // simulator takes any weights
        let x = spec.simulate_constant_mix(&w, 5, 3).unwrap();
        let expected = spec.x0 * (1.0 + 0.02 * spec.dt).powi(40);
        for v in x {
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn single_asset_full_investment_compounds_returns() {
        let mut spec = BenchmarkMarketSpec::standard(30);
        spec.drifts = vec![0.08];
        spec.vols = vec![0.2];
        spec.benchmark_weights = vec![1.0];
        spec.rate = RateModel::Constant(0.0);
        spec.validate().unwrap();
        let sc = spec.simulate_scenario(17);
        let direct = sc.constant_mix_wealth(&spec, &[1.0]);
        let mut product = spec.x0;
        for t in 0..spec.steps {
            product *= 1.0 + sc.row(t)[0];
        }
        assert!((direct - product).abs() < 1e-12);
    }

    #[test]
    fn gbm_terminal_mean() {
        let mut spec = BenchmarkMarketSpec::standard(60);
        spec.drifts = vec![0.08];
        spec.vols = vec![0.2];
        spec.benchmark_weights = vec![1.0];
        spec.rate = RateModel::Constant(0.0);
        let n = 40_000usize;
        let x = spec.simulate_constant_mix(&[1.0], n, 11).unwrap();
        let t_total = spec.steps as f64 * spec.dt;
        let expected = spec.x0 * (0.08f64 * t_total).exp();
        let mean = x.iter().sum::<f64>() / n as f64;
        let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean} vs {expected} (se {se})"
        );
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = BenchmarkMarketSpec::standard(10);
        spec.correlation = 1.5;
        assert!(spec.validate().is_err());
        let mut spec = BenchmarkMarketSpec::standard(10);
        spec.benchmark_weights = vec![0.5, 0.5, 0.5];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn policy_bptt_matches_finite_differences() {
        let spec = BenchmarkMarketSpec {
            steps: 10,
            ..BenchmarkMarketSpec::standard(10)
        };
        let net = Mlp::init(&[5, 6, 3], OutputActivation::Identity, 91).unwrap();
        let mut model = BenchmarkPolicyModel::new(net, spec, 6, 5).unwrap();
        let x_phi = model.train_benchmark_wealth().to_vec();
        let eval = model.eval(&x_phi, 0).unwrap();
        let cot: Vec<f64> = (0..6).map(|k| 0.3 - 0.1 * k as f64).collect();
        let grad = eval.tape.params(&cot).unwrap();

        let base = model.params();
        let d = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..model.param_count() {
            let mut p = base.clone();
            p[k] += d;
            model.set_params(&p).unwrap();
            let up: f64 = model
                .eval(&x_phi, 0)
                .unwrap()
                .values
                .iter()
                .zip(cot.iter())
                .map(|(v, c)| v * c)
                .sum();
            p[k] -= 2.0 * d;
            model.set_params(&p).unwrap();
            let dn: f64 = model
                .eval(&x_phi, 0)
                .unwrap()
                .values
                .iter()
                .zip(cot.iter())
                .map(|(v, c)| v * c)
                .sum();
            model.set_params(&base).unwrap();
            let fd = (up - dn) / (2.0 * d);
            worst = worst.max((fd - grad[k]).abs() / fd.abs().max(1.0));
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn vasicek_rate_changes_wealth() {
        let mut spec = BenchmarkMarketSpec::standard(40);
        spec.rate = RateModel::Vasicek {
            r0: 0.02,
            kappa: 1.0,
            theta: 0.05,
            sigma: 0.01,
        };
        let a = spec.simulate_constant_mix(&[0.0, 0.0, 0.0], 3, 9).unwrap();
        let flat = BenchmarkMarketSpec::standard(40)
            .simulate_constant_mix(&[0.0, 0.0, 0.0], 3, 9)
            .unwrap();
        assert_ne!(a, flat);
    }
}
