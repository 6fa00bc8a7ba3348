//! Beating a constant-proportion benchmark: the inner problem flipped to
//! minimization over dynamic self-financing strategies.

use super::RunOutcome;
use crate::config::{ExperimentConfig, MarketBlock};
use crate::emit;
use rro::markets::BenchmarkPolicyModel;
use rro::nn::{Mlp, OutputActivation};
use rro::pg::{solve_inner, Direction, PushForward};
use rro::risk::EmpiricalDistribution;
use rro::seeds;
use rro::{Error, Result};

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let MarketBlock::Benchmark(spec) = &cfg.market else {
        return Err(Error::InvalidSpec {
            what: "benchmark experiment",
            why: "market block is not a benchmark market".to_string(),
        });
    };
    let specs = super::estimator_specs(cfg)?;
    let d = spec.assets();
    let mut sizes = vec![2 + d];
    sizes.extend(&cfg.training.policy_hidden);
    sizes.push(d);
    let mut net = Mlp::init(&sizes, OutputActivation::Identity, seeds::derive(cfg.seed, 10))?;
    // start near all-cash (exactly zero would degenerate the wealth batch
    // and with it the Silverman bandwidth)
    net.scale_output_layer(0.05);
    let mut model = BenchmarkPolicyModel::new(
        net,
        spec.clone(),
        cfg.training.batch,
        seeds::derive(cfg.seed, 11),
    )?;
    let config = super::inner_config(cfg, Direction::Minimize, 21)?;

    let x_train = model.train_benchmark_wealth().to_vec();
    let x_val = model.validation_benchmark_wealth().to_vec();
    let report = solve_inner(&x_train, &x_val, &mut model, &specs, &config)?;

    let x_trained = model.eval(&x_val, 0)?.values;

    let dir = &cfg.output_dir;
    emit::write_trace(dir, &report.trace)?;
    emit::write_samples(dir, "wealth_policy.csv", &x_val)?;
    emit::write_samples(dir, "wealth_worstcase.csv", &x_trained)?;
    emit::write_pairs(dir, "wealth_pairs.csv", &x_val, &x_trained)?;

    let stats_bench = EmpiricalDistribution::new(x_val)?.summary(cfg.risk.alpha, cfg.risk.beta)?;
    let stats_opt = EmpiricalDistribution::new(x_trained)?.summary(cfg.risk.alpha, cfg.risk.beta)?;
    emit::write_summary(
        dir,
        cfg,
        &[
            emit::SummaryRow {
                label: "benchmark".to_string(),
                stats: stats_bench,
                iterations: report.iterations,
                converged: report.converged,
            },
            emit::SummaryRow {
                label: "benchmark-optimal".to_string(),
                stats: stats_opt,
                iterations: report.iterations,
                converged: report.converged,
            },
        ],
    )?;
    Ok(RunOutcome {
        converged: report.converged,
    })
}
