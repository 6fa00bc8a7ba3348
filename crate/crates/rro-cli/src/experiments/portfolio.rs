//! Robust static portfolio allocation on the factor market.

use super::RunOutcome;
use crate::config::{ExperimentConfig, MarketBlock};
use crate::emit;
use rro::markets::PortfolioPolicy;
use rro::pg::{solve_outer, PushForward, TraceRecord};
use rro::risk::EmpiricalDistribution;
use rro::seeds;
use rro::{Error, Result};

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let MarketBlock::Factor { spec, .. } = &cfg.market else {
        return Err(Error::InvalidSpec {
            what: "portfolio experiment",
            why: "market block is not a factor market".to_string(),
        });
    };
    let specs = super::estimator_specs(cfg)?;
    let mut policy = PortfolioPolicy::new(*spec, cfg.training.batch, seeds::derive(cfg.seed, 10))?;
    let mut adversary = super::build_adversary(cfg, 11)?;
    let outer_cfg = super::outer_config(cfg)?;

    let report = solve_outer(&mut policy, &mut adversary, &specs, &outer_cfg)?;

    // out-of-sample evaluation of the trained allocation and its worst case
    let weights = policy.weights();
    let returns = spec.simulate_returns(cfg.training.batch, seeds::derive(cfg.seed, 12));
    let x_policy = returns.portfolio_wealth(&weights)?;
    let x_worst = adversary
        .eval(&x_policy, seeds::derive(cfg.seed, 13))?
        .values;

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
    emit::write_weights(dir, &weights)?;

    let stats_policy = EmpiricalDistribution::new(x_policy)?.summary(cfg.risk.alpha, cfg.risk.beta)?;
    let stats_worst = EmpiricalDistribution::new(x_worst)?.summary(cfg.risk.alpha, cfg.risk.beta)?;
    emit::write_summary(
        dir,
        cfg,
        &[
            emit::SummaryRow {
                label: "portfolio".to_string(),
                stats: stats_policy,
                iterations: report.iterations,
                converged: report.converged,
            },
            emit::SummaryRow {
                label: "portfolio-worstcase".to_string(),
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
