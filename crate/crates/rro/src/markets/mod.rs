//! Scenario simulators for the three case studies.

mod benchmark;
mod factor;
mod statarb;

pub use benchmark::{BenchmarkMarketSpec, BenchmarkPolicyModel, RateModel};
pub use factor::{FactorMarketSpec, PortfolioPolicy, ReturnsMatrix};
pub use statarb::{simulate_statarb_path, OuStatArbSpec, StatArbPath, StatArbPolicy};
