//! The four experiment runners.

mod benchmark;
mod inner_only;
mod portfolio;
mod statarb;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::emit;
use rro::density::KdeSpec;
use rro::nn::{Mlp, OutputActivation};
use rro::optim::{AdamParams, LagrangeState};
use rro::pg::{Direction, EstimatorSpecs, InnerConfig, MlpPushForward, OuterConfig, StoppingRule};
use rro::seeds;
use rro::wasserstein::WassersteinSpec;
use rro::Result;

pub struct RunOutcome {
    pub converged: bool,
}

/// Execute the configured experiment, writing artifacts into the output dir.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    emit::write_metadata(&cfg.output_dir, cfg)?;
    match cfg.kind {
        ExperimentKind::Portfolio => portfolio::run(cfg),
        ExperimentKind::Benchmark => benchmark::run(cfg),
        ExperimentKind::StatArb => statarb::run(cfg),
        ExperimentKind::InnerOnly => inner_only::run(cfg),
    }
}

fn estimator_specs(cfg: &ExperimentConfig) -> Result<EstimatorSpecs> {
    Ok(EstimatorSpecs {
        distortion: cfg.risk.distortion()?,
        utility: cfg.risk.utility,
        wasserstein: WassersteinSpec::new(cfg.order, cfg.epsilon)?,
        kde: KdeSpec {
            kernel: cfg.kernel,
            bandwidth: cfg.bandwidth,
        },
    })
}

fn lagrange(cfg: &ExperimentConfig) -> Result<LagrangeState> {
    LagrangeState::new(
        cfg.training.lambda0,
        cfg.training.mu0,
        cfg.training.growth,
        cfg.training.n_lagrange,
    )
}

fn inner_config(cfg: &ExperimentConfig, direction: Direction, seed_tag: u64) -> Result<InnerConfig> {
    Ok(InnerConfig {
        adam: AdamParams::with_learning_rate(cfg.training.inner_lr),
        lagrange: lagrange(cfg)?,
        stopping: StoppingRule::PercentWindow {
            tol: 0.01,
            window: cfg.training.inner_window,
            cap: cfg.training.inner_cap,
        },
        ..InnerConfig::new(direction, seeds::derive(cfg.seed, seed_tag))
    })
}

fn outer_config(cfg: &ExperimentConfig) -> Result<OuterConfig> {
    Ok(OuterConfig {
        adam: AdamParams::with_learning_rate(cfg.training.outer_lr),
        stopping: StoppingRule::PercentWindow {
            tol: 0.01,
            window: cfg.training.outer_window,
            cap: cfg.training.outer_cap,
        },
        inner: inner_config(cfg, Direction::Maximize, 77)?,
        inner_refresh: Some(StoppingRule::PercentWindow {
            tol: 0.01,
            window: cfg.training.inner_window,
            cap: cfg.training.inner_refresh_cap,
        }),
        constraint_retries: 2,
        master_seed: seeds::derive(cfg.seed, 1),
    })
}

/// Residual push-forward adversary starting at the identity.
fn build_adversary(cfg: &ExperimentConfig, seed_tag: u64) -> Result<MlpPushForward> {
    let mut sizes = vec![1 + cfg.training.adversary_noise_dim];
    sizes.extend(&cfg.training.adversary_hidden);
    sizes.push(1);
    let net = Mlp::init(
        &sizes,
        OutputActivation::Identity,
        seeds::derive(cfg.seed, seed_tag),
    )?;
    MlpPushForward::new_residual_identity(net, cfg.training.adversary_noise_dim)
}
