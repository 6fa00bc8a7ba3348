//! CSV artifact writers. Floats use Rust's shortest round-trip formatting,
//! so identical runs produce byte-identical files; wall-clock data is
//! confined to `metadata.txt`.

use crate::config::ExperimentConfig;
use rro::pg::{OuterTraceRecord, TraceRecord};
use rro::risk::RiskSummary;
use rro::Result;
use std::fs;
use std::io::Write;
use std::path::Path;

pub fn write_metadata(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut f = fs::File::create(dir.join("metadata.txt"))?;
    writeln!(f, "unix_time = {now}")?;
    writeln!(f, "experiment = {}", cfg.kind.name())?;
    writeln!(f, "seed = {}", cfg.seed)?;
    writeln!(f, "paper_scale = {}", cfg.paper_scale)?;
    writeln!(f, "config = {cfg:?}")?;
    Ok(())
}

/// `trace.csv`: iteration, RDEU, Wasserstein distance, multipliers, error.
pub fn write_trace(dir: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut f = fs::File::create(dir.join("trace.csv"))?;
    writeln!(f, "iteration,rdeu,wasserstein,lambda,mu,constraint_error")?;
    for t in trace {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            t.iteration, t.rdeu, t.distance, t.lambda, t.mu, t.constraint_error
        )?;
    }
    Ok(())
}

/// `outer_trace.csv`: per outer iteration, including the inner solve summary.
pub fn write_outer_trace(dir: &Path, trace: &[OuterTraceRecord]) -> Result<()> {
    let mut f = fs::File::create(dir.join("outer_trace.csv"))?;
    writeln!(
        f,
        "iteration,policy_rdeu,worst_case_rdeu,wasserstein,lambda,mu,constraint_error,inner_iterations,inner_converged,step_skipped"
    )?;
    for t in trace {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{}",
            t.iteration,
            t.policy_rdeu,
            t.worst_case_rdeu,
            t.distance,
            t.lambda,
            t.mu,
            t.constraint_error,
            t.inner_iterations,
            t.inner_converged,
            t.step_skipped
        )?;
    }
    Ok(())
}

/// Single-column sample file.
pub fn write_samples(dir: &Path, name: &str, values: &[f64]) -> Result<()> {
    let mut f = fs::File::create(dir.join(name))?;
    writeln!(f, "wealth")?;
    for v in values {
        writeln!(f, "{v}")?;
    }
    Ok(())
}

pub struct SummaryRow {
    pub label: String,
    pub stats: RiskSummary,
    pub iterations: usize,
    pub converged: bool,
}

/// `summary.csv` with one row per reported distribution.
pub fn write_summary(dir: &Path, cfg: &ExperimentConfig, rows: &[SummaryRow]) -> Result<()> {
    let mut f = fs::File::create(dir.join("summary.csv"))?;
    writeln!(
        f,
        "experiment,epsilon,p_weight,cvar_alpha,ute_beta,mean,wasserstein_p,iterations,converged"
    )?;
    for row in rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            row.label,
            cfg.epsilon,
            cfg.risk.p_weight,
            row.stats.cvar_alpha,
            row.stats.ute_beta,
            row.stats.mean,
            cfg.order,
            row.iterations,
            row.converged
        )?;
    }
    Ok(())
}

/// `weights.csv`: final portfolio allocation.
pub fn write_weights(dir: &Path, weights: &[f64]) -> Result<()> {
    let mut f = fs::File::create(dir.join("weights.csv"))?;
    writeln!(f, "asset,weight")?;
    for (i, w) in weights.iter().enumerate() {
        writeln!(f, "{},{}", i + 1, w)?;
    }
    Ok(())
}

/// `heatmap.csv`: trade as a function of inventory and price.
pub fn write_heatmap(dir: &Path, grid: &[(f64, f64, f64)]) -> Result<()> {
    let mut f = fs::File::create(dir.join("heatmap.csv"))?;
    writeln!(f, "inventory,price,trade")?;
    for (q, s, trade) in grid {
        writeln!(f, "{q},{s},{trade}")?;
    }
    Ok(())
}

/// `wealth_pairs.csv`: per-path joint outcomes of two strategies.
pub fn write_pairs(dir: &Path, name: &str, a: &[f64], b: &[f64]) -> Result<()> {
    let mut f = fs::File::create(dir.join(name))?;
    writeln!(f, "reference,trained")?;
    for (x, y) in a.iter().zip(b.iter()) {
        writeln!(f, "{x},{y}")?;
    }
    Ok(())
}
