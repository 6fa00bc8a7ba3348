//! Robust statistical arbitrage on the OU market with price impact.

use super::RunOutcome;
use crate::config::{ExperimentConfig, MarketBlock};
use crate::emit;
use rro::markets::StatArbPolicy;
use rro::nn::{Mlp, OutputActivation};
use rro::pg::{solve_outer, PolicyModel, PushForward, TraceRecord};
use rro::risk::EmpiricalDistribution;
use rro::seeds;
use rro::{Error, Result};

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let MarketBlock::StatArb(spec) = &cfg.market else {
        return Err(Error::InvalidSpec {
            what: "statarb experiment",
            why: "market block is not an OU market".to_string(),
        });
    };
    let specs = super::estimator_specs(cfg)?;
    let mut sizes = vec![3usize];
    sizes.extend(&cfg.training.policy_hidden);
    sizes.push(1);
    let mut net = Mlp::init(
        &sizes,
        OutputActivation::ScaledTanh(spec.inventory_bound),
        seeds::derive(cfg.seed, 10),
    )?;
    // keep the bounded head away from saturation at the start
    net.scale_output_layer(0.1);
    let mut policy = StatArbPolicy::new(net, *spec, cfg.training.batch)?;
    let mut adversary = super::build_adversary(cfg, 11)?;
    let outer_cfg = super::outer_config(cfg)?;

    let report = solve_outer(&mut policy, &mut adversary, &specs, &outer_cfg)?;

    let eval = policy.eval(seeds::derive(cfg.seed, 12))?;
    let x_policy = eval.values;
    let x_worst = adversary
        .eval(&x_policy, seeds::derive(cfg.seed, 13))?
        .values;

    // trade surface at t = 0.75 T over (inventory, price)
    let stationary_sd = spec.sigma / (2.0 * spec.kappa).sqrt();
    let grid_n = 21usize;
    let inventories: Vec<f64> = (0..grid_n)
        .map(|k| -spec.inventory_bound + 2.0 * spec.inventory_bound * k as f64 / (grid_n - 1) as f64)
        .collect();
    let prices: Vec<f64> = (0..grid_n)
        .map(|k| {
            spec.mean_level - 3.0 * stationary_sd
                + 6.0 * stationary_sd * k as f64 / (grid_n - 1) as f64
        })
        .collect();
    let grid = policy.trade_grid(0.75, &inventories, &prices)?;

    let dir = &cfg.output_dir;
    emit::write_outer_trace(dir, &report.trace)?;
    let trace: Vec<TraceRecord> = report
        .trace
        .iter()
        .map(|t| TraceRecord {
            iteration: t.iteration,
            rdeu: t.worst_case_rdeu,
            distance: t.distance,
            lambda: t.lambda,
            mu: t.mu,
            constraint_error: t.constraint_error,
        })
        .collect();
    emit::write_trace(dir, &trace)?;
    emit::write_samples(dir, "wealth_policy.csv", &x_policy)?;
    emit::write_samples(dir, "wealth_worstcase.csv", &x_worst)?;
    emit::write_heatmap(dir, &grid)?;

    let stats_policy = EmpiricalDistribution::new(x_policy)?.summary(cfg.risk.alpha, cfg.risk.beta)?;
    let stats_worst = EmpiricalDistribution::new(x_worst)?.summary(cfg.risk.alpha, cfg.risk.beta)?;
    emit::write_summary(
        dir,
        cfg,
        &[
            emit::SummaryRow {
                label: "statarb".to_string(),
                stats: stats_policy,
                iterations: report.iterations,
                converged: report.converged,
            },
            emit::SummaryRow {
                label: "statarb-worstcase".to_string(),
                stats: stats_worst,
                iterations: report.iterations,
                converged: report.converged,
            },
        ],
    )?;
    Ok(RunOutcome {
        converged: report.converged,
    })
}
