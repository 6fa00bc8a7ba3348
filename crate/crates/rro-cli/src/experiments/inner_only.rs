//! Inner-problem stress test: worst case around a fixed reference portfolio.

use super::RunOutcome;
use crate::config::{ExperimentConfig, MarketBlock};
use crate::emit;
use rro::pg::{solve_inner, Direction, PushForward};
use rro::risk::EmpiricalDistribution;
use rro::seeds;
use rro::{Error, Result};

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let MarketBlock::Factor { spec, weights } = &cfg.market else {
        return Err(Error::InvalidSpec {
            what: "inner-only experiment",
            why: "market block is not a factor market".to_string(),
        });
    };
    let weights = weights
        .clone()
        .unwrap_or_else(|| vec![1.0 / spec.assets as f64; spec.assets]);
    let specs = super::estimator_specs(cfg)?;
    let mut adversary = super::build_adversary(cfg, 11)?;
    let config = super::inner_config(cfg, Direction::Maximize, 21)?;

    let sample = |tag: u64| -> Result<Vec<f64>> {
        spec.simulate_returns(cfg.training.batch, seeds::derive(cfg.seed, tag))
            .portfolio_wealth(&weights)
    };
    let x_train = sample(31)?;
    let x_val = sample(32)?;

    let report = solve_inner(&x_train, &x_val, &mut adversary, &specs, &config)?;
    let x_worst = adversary.eval(&x_val, seeds::derive(cfg.seed, 33))?.values;

    let dir = &cfg.output_dir;
    emit::write_trace(dir, &report.trace)?;
    emit::write_samples(dir, "wealth_policy.csv", &x_val)?;
    emit::write_samples(dir, "wealth_worstcase.csv", &x_worst)?;

    let stats_ref = EmpiricalDistribution::new(x_val)?.summary(cfg.risk.alpha, cfg.risk.beta)?;
    let stats_worst = EmpiricalDistribution::new(x_worst)?.summary(cfg.risk.alpha, cfg.risk.beta)?;
    emit::write_summary(
        dir,
        cfg,
        &[
            emit::SummaryRow {
                label: "inner-only".to_string(),
                stats: stats_ref,
                iterations: report.iterations,
                converged: report.converged,
            },
            emit::SummaryRow {
                label: "inner-only-worstcase".to_string(),
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
