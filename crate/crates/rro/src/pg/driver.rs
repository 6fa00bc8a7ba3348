//! Alternating optimization drivers.
//!
//! The inner driver trains the adversary push-forward against a fixed
//! reference batch: simulate `X_theta`, step ADAM along the estimator
//! direction, and update the Lagrange multipliers every `update_period`
//! iterations. The outer driver alternates: freeze the policy, solve the
//! inner problem to an approximate worst case, verify that the ball
//! constraint holds on a fresh validation batch, then take one descent step
//! on the policy with the penalty weight forced to zero (the constraint is
//! binding at the inner optimum, so only the RDEU term carries gradient).

use crate::error::{Error, Result};
use crate::nn::{Mlp, Tape};
use crate::optim::{AdamParams, AdamState, LagrangeState};
use crate::pg::{inner_gradient_pieces, outer_gradient_pieces, EstimatorSpecs, SampleBatch, TapeSmoothing};
use crate::seeds;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Inner problem sense: the adversary maximizes the risk; the
/// benchmark-improvement variant minimizes it instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Convergence rules for the training loops.
///
/// `PercentWindow` stops once consecutive window averages of the objective
/// move by less than `tol` relative; `NoImprove` stops once the best value
/// has not improved for `window` iterations. Either way the constraint must
/// hold on the training batch before an inner loop may stop, and `cap`
/// bounds the iteration count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    PercentWindow { tol: f64, window: usize, cap: usize },
    NoImprove { window: usize, cap: usize },
}

impl StoppingRule {
    pub fn cap(&self) -> usize {
        match self {
            StoppingRule::PercentWindow { cap, .. } => *cap,
            StoppingRule::NoImprove { cap, .. } => *cap,
        }
    }

    /// Inner default: 1% window rule with a 5000-iteration cap.
    pub fn inner_default() -> Self {
        StoppingRule::PercentWindow {
            tol: 0.01,
            window: 50,
            cap: 5000,
        }
    }

    /// Outer default: 1% window rule with a 500-iteration cap.
    pub fn outer_default() -> Self {
        StoppingRule::PercentWindow {
            tol: 0.01,
            window: 10,
            cap: 500,
        }
    }

    fn should_stop(&self, history: &[f64], direction: Direction) -> bool {
        match *self {
            StoppingRule::PercentWindow { tol, window, .. } => {
                if history.len() < 2 * window {
                    return false;
                }
                let j = history.len();
                let cur: f64 = history[j - window..].iter().sum::<f64>() / window as f64;
                let prev: f64 =
                    history[j - 2 * window..j - window].iter().sum::<f64>() / window as f64;
                let scale = cur.abs().max(prev.abs()).max(1e-8);
                (cur - prev).abs() <= tol * scale
            }
            StoppingRule::NoImprove { window, .. } => {
                if history.len() <= window {
                    return false;
                }
                let split = history.len() - window;
                let best_before = fold_best(&history[..split], direction);
                let best_after = fold_best(&history[split..], direction);
                match direction {
                    Direction::Maximize => best_after <= best_before,
                    Direction::Minimize => best_after >= best_before,
                }
            }
        }
    }
}

fn fold_best(xs: &[f64], direction: Direction) -> f64 {
    match direction {
        Direction::Maximize => xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        Direction::Minimize => xs.iter().cloned().fold(f64::INFINITY, f64::min),
    }
}

fn improves(candidate: f64, best: f64, direction: Direction) -> bool {
    match direction {
        Direction::Maximize => candidate > best,
        Direction::Minimize => candidate < best,
    }
}

/// Per-sample tape of one simulated batch.
pub trait BatchPullback: Sync + Send {
    /// Parameter gradient `sum_i cot[i] d x_i / d params`.
    fn params(&self, cotangent: &[f64]) -> Result<Vec<f64>>;

    /// Per-sample input cotangents (for chaining through an upstream model).
    /// Only meaningful for models with a scalar per-sample input.
    fn inputs(&self, _cotangent: &[f64]) -> Result<Vec<f64>> {
        Err(Error::MissingTape("input pullback not available"))
    }

    /// Both pullbacks from one backward pass where the model supports it.
    fn params_and_inputs(&self, cotangent: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.params(cotangent)?, self.inputs(cotangent)?))
    }
}

/// A simulated batch: per-sample values plus their gradient tape.
pub struct BatchEval {
    pub values: Vec<f64>,
    pub tape: Box<dyn BatchPullback>,
}

/// The adversary side: a parameterized push-forward mapping each reference
/// realization (plus optional exogenous noise) to a distorted realization.
pub trait PushForward {
    fn param_count(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]) -> Result<()>;
    /// Simulate `x_theta` for the given reference batch. `noise_seed` feeds
    /// any exogenous randomness; deterministic push-forwards ignore it.
    fn eval(&self, x_phi: &[f64], noise_seed: u64) -> Result<BatchEval>;
}

/// The policy side: simulates a fresh reference batch `X_phi` with tapes
/// with respect to the policy parameters.
pub trait PolicyModel {
    fn param_count(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]) -> Result<()>;
    fn eval(&self, seed: u64) -> Result<BatchEval>;
}

/// Feed-forward push-forward `x_theta = H(x_phi, y)` with `y` a vector of
/// standard normal noise (possibly empty). In residual form the network
/// parameterizes the displacement, `H(x, y) = x + net(x, y)`; combined with
/// [`Mlp::zero_output_layer`] the push-forward starts at the identity, i.e.
/// inside every Wasserstein ball.
pub struct MlpPushForward {
    pub net: Mlp,
    pub noise_dim: usize,
    pub residual: bool,
}

impl MlpPushForward {
    pub fn new(net: Mlp, noise_dim: usize) -> Result<Self> {
        Self::build(net, noise_dim, false)
    }

    /// Residual push-forward with the output layer zeroed: `H = id` at start.
    pub fn new_residual_identity(mut net: Mlp, noise_dim: usize) -> Result<Self> {
        net.zero_output_layer();
        Self::build(net, noise_dim, true)
    }

    fn build(net: Mlp, noise_dim: usize, residual: bool) -> Result<Self> {
        if net.input_dim() != 1 + noise_dim {
            return Err(Error::ShapeMismatch {
                what: "push-forward input dimension",
                expected: 1 + noise_dim,
                got: net.input_dim(),
            });
        }
        if net.output_dim() != 1 {
            return Err(Error::ShapeMismatch {
                what: "push-forward output dimension",
                expected: 1,
                got: net.output_dim(),
            });
        }
        Ok(Self {
            net,
            noise_dim,
            residual,
        })
    }
}

struct MlpBatchTape {
    net: Mlp,
    tapes: Vec<Tape>,
    residual: bool,
}

impl BatchPullback for MlpBatchTape {
    fn params(&self, cotangent: &[f64]) -> Result<Vec<f64>> {
        Ok(self.net.pullback_scalar_batch(&self.tapes, cotangent)?.0)
    }

    fn inputs(&self, cotangent: &[f64]) -> Result<Vec<f64>> {
        Ok(self.params_and_inputs(cotangent)?.1)
    }

    fn params_and_inputs(&self, cotangent: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (grad, input_cots) = self.net.pullback_scalar_batch(&self.tapes, cotangent)?;
        let skip = if self.residual { 1.0 } else { 0.0 };
        let inputs = input_cots
            .iter()
            .zip(cotangent.iter())
            .map(|(c, &cot)| c[0] + skip * cot)
            .collect();
        Ok((grad, inputs))
    }
}

impl PushForward for MlpPushForward {
    fn param_count(&self) -> usize {
        self.net.param_count()
    }

    fn params(&self) -> Vec<f64> {
        self.net.params().to_vec()
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        self.net.set_params(p)
    }

    fn eval(&self, x_phi: &[f64], noise_seed: u64) -> Result<BatchEval> {
        let mut rng = ChaCha12Rng::seed_from_u64(noise_seed);
        let inputs: Vec<Vec<f64>> = x_phi
            .iter()
            .map(|&x| {
                let mut input = Vec::with_capacity(1 + self.noise_dim);
                input.push(x);
                for _ in 0..self.noise_dim {
                    input.push(StandardNormal.sample(&mut rng));
                }
                input
            })
            .collect();
        let fwd = self.net.forward_batch(&inputs)?;
        let mut values = Vec::with_capacity(fwd.len());
        let mut tapes = Vec::with_capacity(fwd.len());
        for (k, (out, tape)) in fwd.into_iter().enumerate() {
            let base = if self.residual { x_phi[k] } else { 0.0 };
            values.push(base + out[0]);
            tapes.push(tape);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "push-forward output",
                index: i,
            });
        }
        Ok(BatchEval {
            values,
            tape: Box::new(MlpBatchTape {
                net: self.net.clone(),
                tapes,
                residual: self.residual,
            }),
        })
    }
}

/// One line of the inner training trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceRecord {
    pub iteration: usize,
    pub rdeu: f64,
    pub distance: f64,
    pub lambda: f64,
    pub mu: f64,
    pub constraint_error: f64,
}

#[derive(Debug, Clone)]
pub struct InnerConfig {
    pub adam: AdamParams,
    pub lagrange: LagrangeState,
    pub stopping: StoppingRule,
    pub direction: Direction,
    pub smoothing: TapeSmoothing,
    pub master_seed: u64,
    /// Relative slack on `d^p <= eps^p` when judging constraint satisfaction
    /// (the optimum sits on the ball boundary, so exact checks flicker).
    pub constraint_slack: f64,
    /// Ceiling on the penalty weight: the update rule grows `mu`
    /// geometrically every window, which must not run away when multipliers
    /// are carried across many warm-started solves.
    pub mu_cap: f64,
    /// Record every trace line (else every multiplier window).
    pub full_trace: bool,
}

impl InnerConfig {
    pub fn new(direction: Direction, master_seed: u64) -> Self {
        Self {
            adam: AdamParams::default(),
            lagrange: LagrangeState::standard(),
            stopping: StoppingRule::inner_default(),
            direction,
            smoothing: TapeSmoothing::Direct,
            master_seed,
            // the inner optimum hovers on the ball boundary, so the check
            // tolerates step-size-scale excursions
            constraint_slack: 0.25,
            mu_cap: 1e9,
            full_trace: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InnerReport {
    pub iterations: usize,
    /// Whether a stopping rule fired before the iteration cap.
    pub converged: bool,
    /// Ball constraint satisfied on the fresh validation batch.
    pub constraint_ok: bool,
    /// Rank-based RDEU of the trained push-forward on the validation batch.
    pub rdeu_validation: f64,
    pub distance_validation: f64,
    /// Best training-batch RDEU among constraint-feasible iterates.
    pub rdeu_best: f64,
    /// Multiplier state at exit, so alternating drivers can carry it over.
    pub lagrange: LagrangeState,
    pub trace: Vec<TraceRecord>,
}

fn constraint_holds(distance_pow: f64, epsilon_pow: f64, slack: f64) -> bool {
    if epsilon_pow.is_infinite() {
        return true;
    }
    distance_pow <= epsilon_pow * (1.0 + slack) + 1e-12
}

/// Train the adversary against a fixed reference batch; the validation batch
/// only enters the final constraint check and reported risk.
pub fn solve_inner(
    x_phi: &[f64],
    x_phi_validation: &[f64],
    adversary: &mut dyn PushForward,
    specs: &EstimatorSpecs,
    config: &InnerConfig,
) -> Result<InnerReport> {
    let cap = config.stopping.cap();
    let mut lagrange = config.lagrange;
    let mut adam = AdamState::new(config.adam, adversary.param_count());
    let mut params = adversary.params();
    let mut history: Vec<f64> = Vec::with_capacity(cap);
    let mut trace = Vec::new();
    let mut best_rdeu = match config.direction {
        Direction::Maximize => f64::NEG_INFINITY,
        Direction::Minimize => f64::INFINITY,
    };
    let mut best_params: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut iterations = 0;
    let epsilon_pow = specs.wasserstein.epsilon_pow();

    for j in 0..cap {
        iterations = j + 1;
        let eval = adversary.eval(x_phi, seeds::derive(config.master_seed, 1_000 + j as u64))?;
        let batch = {
            let tape = eval.tape;
            SampleBatch::new(x_phi.to_vec(), eval.values)?
                .with_theta_pullback(move |cot| tape.params(cot))
        };
        let grad = inner_gradient_pieces(&batch, specs, &lagrange, config.smoothing)?;
        let stats = &grad.stats;
        // stopping and best-iterate tracking demand the training batch
        // strictly inside the ball; the validation check below is slackened
        let feasible = constraint_holds(
            crate::wasserstein::pow_p(stats.distance, specs.wasserstein.order),
            epsilon_pow,
            1e-9,
        );
        if feasible && improves(stats.rdeu, best_rdeu, config.direction) {
            best_rdeu = stats.rdeu;
            best_params = Some(params.clone());
        }
        if config.full_trace || (j + 1) % lagrange.update_period == 0 || j == 0 {
            trace.push(TraceRecord {
                iteration: j,
                rdeu: stats.rdeu,
                distance: stats.distance,
                lambda: lagrange.lambda,
                mu: lagrange.mu,
                constraint_error: stats.constraint_error,
            });
        }
        history.push(stats.rdeu);

        let direction_vec = grad.descent_direction(config.direction);
        adam.step(&mut params, &direction_vec)?;
        adversary.set_params(&params)?;

        if (j + 1) % lagrange.update_period == 0 {
            lagrange.update(stats.constraint_error);
            lagrange.mu = lagrange.mu.min(config.mu_cap);
        }
        if feasible && config.stopping.should_stop(&history, config.direction) {
            converged = true;
            break;
        }
    }

    // ship the best feasible iterate when we saw one
    if let Some(bp) = best_params {
        adversary.set_params(&bp)?;
        params = bp;
    }
    let _ = params;

    let val_eval = adversary.eval(
        x_phi_validation,
        seeds::derive(config.master_seed, 999),
    )?;
    let val_batch = SampleBatch::new(x_phi_validation.to_vec(), val_eval.values)?;
    let distance_pow = crate::wasserstein::power_distance(
        val_batch.x_theta(),
        val_batch.x_phi(),
        &specs.wasserstein,
    )?;
    let rdeu_validation = crate::risk::EmpiricalDistribution::new(val_batch.x_theta().to_vec())?
        .rdeu(&specs.distortion, &specs.utility);
    let constraint_ok = constraint_holds(distance_pow, epsilon_pow, config.constraint_slack);

    Ok(InnerReport {
        iterations,
        converged,
        constraint_ok,
        rdeu_validation,
        distance_validation: distance_pow.powf(1.0 / specs.wasserstein.order),
        rdeu_best: best_rdeu,
        lagrange,
        trace,
    })
}

/// Sampler-driven variant: draws the training and validation batches from
/// the supplied closure (seeded deterministically from the config seed).
pub fn solve_inner_sampled(
    x_phi_sampler: &dyn Fn(u64) -> Result<Vec<f64>>,
    adversary: &mut dyn PushForward,
    specs: &EstimatorSpecs,
    config: &InnerConfig,
) -> Result<InnerReport> {
    let train = x_phi_sampler(seeds::derive(config.master_seed, 1))?;
    let validation = x_phi_sampler(seeds::derive(config.master_seed, 2))?;
    solve_inner(&train, &validation, adversary, specs, config)
}

/// One line of the outer training trace.
#[derive(Debug, Clone, Copy)]
pub struct OuterTraceRecord {
    pub iteration: usize,
    /// Rank-based RDEU of the policy's own batch.
    pub policy_rdeu: f64,
    /// Worst-case RDEU reported by the inner solve (validation batch).
    pub worst_case_rdeu: f64,
    pub distance: f64,
    pub lambda: f64,
    pub mu: f64,
    pub constraint_error: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    pub step_skipped: bool,
}

#[derive(Debug, Clone)]
pub struct OuterConfig {
    pub adam: AdamParams,
    pub stopping: StoppingRule,
    pub inner: InnerConfig,
    /// Cheaper stopping rule for warm-started inner re-solves after the first.
    pub inner_refresh: Option<StoppingRule>,
    /// How many times to re-run a constraint-violating inner solve with an
    /// escalated penalty before skipping the outer step.
    pub constraint_retries: usize,
    pub master_seed: u64,
}

impl OuterConfig {
    pub fn new(master_seed: u64) -> Self {
        Self {
            adam: AdamParams::default(),
            stopping: StoppingRule::outer_default(),
            inner: InnerConfig::new(Direction::Maximize, seeds::derive(master_seed, 77)),
            inner_refresh: None,
            constraint_retries: 2,
            master_seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OuterReport {
    pub iterations: usize,
    pub converged: bool,
    pub skipped_steps: usize,
    pub trace: Vec<OuterTraceRecord>,
}

/// Alternating driver: train the policy against the adversarial worst case.
///
/// The adversary warm-starts across outer iterations. If an inner solve ends
/// with the validation constraint violated, the solve is re-run with the
/// penalty weight escalated; if it still fails, the outer step is skipped and
/// recorded.
pub fn solve_outer(
    policy: &mut dyn PolicyModel,
    adversary: &mut dyn PushForward,
    specs: &EstimatorSpecs,
    config: &OuterConfig,
) -> Result<OuterReport> {
    let cap = config.stopping.cap();
    let mut adam = AdamState::new(config.adam, policy.param_count());
    let mut params = policy.params();
    let mut history: Vec<f64> = Vec::with_capacity(cap);
    let mut trace = Vec::new();
    let mut skipped_steps = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    // multipliers initialize once and persist across outer iterations, so
    // warm-started inner refreshes stay clamped to the ball
    let mut carried_lagrange = config.inner.lagrange;

    for i in 0..cap {
        iterations = i + 1;
        let phi_eval = policy.eval(seeds::derive(config.master_seed, 2_000_000 + i as u64))?;
        let phi_val = policy.eval(seeds::derive(config.master_seed, 3_000_000 + i as u64))?;

        let mut inner_cfg = config.inner.clone();
        inner_cfg.lagrange = carried_lagrange;
        inner_cfg.master_seed = seeds::derive(config.master_seed, 4_000_000 + i as u64);
        inner_cfg.full_trace = false;
        if i > 0 {
            if let Some(rule) = config.inner_refresh {
                inner_cfg.stopping = rule;
            }
        }
        let mut report = solve_inner(&phi_eval.values, &phi_val.values, adversary, specs, &inner_cfg)?;
        let mut retries = 0;
        while !report.constraint_ok && retries < config.constraint_retries {
            retries += 1;
            inner_cfg.lagrange = report.lagrange;
            inner_cfg.lagrange.mu =
                (inner_cfg.lagrange.mu * inner_cfg.lagrange.growth * inner_cfg.lagrange.growth)
                    .min(config.inner.mu_cap);
            inner_cfg.master_seed = seeds::derive(config.master_seed, 5_000_000 + (i * 16 + retries) as u64);
            report = solve_inner(&phi_eval.values, &phi_val.values, adversary, specs, &inner_cfg)?;
        }
        carried_lagrange = report.lagrange;

        let policy_rdeu = crate::risk::EmpiricalDistribution::new(phi_eval.values.clone())?
            .rdeu(&specs.distortion, &specs.utility);

        if !report.constraint_ok {
            // inner problem could not be pushed back inside the ball: skip
            // the policy step, log, and move on with fresh batches
            skipped_steps += 1;
            trace.push(OuterTraceRecord {
                iteration: i,
                policy_rdeu,
                worst_case_rdeu: report.rdeu_validation,
                distance: report.distance_validation,
                lambda: inner_cfg.lagrange.lambda,
                mu: inner_cfg.lagrange.mu,
                constraint_error: 0.0,
                inner_iterations: report.iterations,
                inner_converged: report.converged,
                step_skipped: true,
            });
            continue;
        }

        // policy step at Lambda = 0: the constraint binds at the inner
        // optimum, so only the RDEU term carries gradient
        let adv_eval = adversary.eval(
            &phi_eval.values,
            seeds::derive(config.master_seed, 6_000_000 + i as u64),
        )?;
        let adv_tape = adv_eval.tape;
        let phi_tape = phi_eval.tape;
        let batch = SampleBatch::new(phi_eval.values.clone(), adv_eval.values)?
            .with_phi_pullback(move |cot_theta, cot_phi| {
                let through = adv_tape.inputs(cot_theta)?;
                let combined: Vec<f64> = through
                    .iter()
                    .zip(cot_phi.iter())
                    .map(|(a, b)| a + b)
                    .collect();
                phi_tape.params(&combined)
            });
        let free = LagrangeState {
            lambda: 0.0,
            ..config.inner.lagrange
        };
        let grad = outer_gradient_pieces(&batch, specs, &free, config.inner.smoothing)?;

        adam.step(&mut params, &grad.rdeu_term)?;
        policy.set_params(&params)?;

        let worst = report.rdeu_validation;
        history.push(worst);
        trace.push(OuterTraceRecord {
            iteration: i,
            policy_rdeu,
            worst_case_rdeu: worst,
            distance: grad.stats.distance,
            lambda: 0.0,
            mu: inner_cfg.lagrange.mu,
            constraint_error: grad.stats.constraint_error,
            inner_iterations: report.iterations,
            inner_converged: report.converged,
            step_skipped: false,
        });

        if config.stopping.should_stop(&history, Direction::Minimize) {
            converged = true;
            break;
        }
    }

    Ok(OuterReport {
        iterations,
        converged,
        skipped_steps,
        trace,
    })
}
