//! Experiment configuration: a strict `key = value` file with `[sections]`.
//!
//! Unknown sections or keys are rejected with their full path, and every
//! value is re-validated through the library constructors at load time.
//! Command-line flags override file values, which override the per-experiment
//! defaults (desk scale, or full scale under `--paper-scale`).

use rro::density::{BandwidthRule, Kernel};
use rro::markets::{BenchmarkMarketSpec, FactorMarketSpec, OuStatArbSpec, RateModel};
use rro::risk::{DistortionSpec, UtilitySpec};
use rro::wasserstein::WassersteinSpec;
use rro::Error;
use std::collections::BTreeMap;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

fn cfg_err(path: &str, why: impl Into<String>) -> Error {
    Error::Parse {
        what: format!("config key `{path}`"),
        why: why.into(),
    }
}

/// Parsed `key = value` sections, consumed key by key so leftovers can be
/// reported as unknown.
#[derive(Debug, Default)]
pub struct Ini {
    entries: BTreeMap<String, String>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    what: format!("config line {}", lineno + 1),
                    why: format!("expected `key = value`, got `{line}`"),
                });
            };
            let path = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            if entries.insert(path.clone(), value.trim().to_string()).is_some() {
                return Err(cfg_err(&path, "duplicate key"));
            }
        }
        Ok(Self { entries })
    }

    pub fn take(&mut self, path: &str) -> Option<String> {
        self.entries.remove(path)
    }

    fn take_parse<T: std::str::FromStr>(&mut self, path: &str) -> Result<Option<T>> {
        match self.take(path) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| cfg_err(path, format!("cannot parse `{v}`"))),
        }
    }

    /// Error out if any key was not consumed.
    pub fn finish(self) -> Result<()> {
        if let Some((path, _)) = self.entries.into_iter().next() {
            return Err(cfg_err(&path, "unknown key"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Portfolio,
    Benchmark,
    StatArb,
    InnerOnly,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "portfolio" => Ok(Self::Portfolio),
            "benchmark" => Ok(Self::Benchmark),
            "statarb" => Ok(Self::StatArb),
            "inner-only" => Ok(Self::InnerOnly),
            other => Err(cfg_err(
                "experiment.kind",
                format!("unknown experiment `{other}` (portfolio | benchmark | statarb | inner-only)"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Portfolio => "portfolio",
            Self::Benchmark => "benchmark",
            Self::StatArb => "statarb",
            Self::InnerOnly => "inner-only",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RiskBlock {
    pub alpha: f64,
    pub beta: f64,
    pub p_weight: f64,
    pub utility: UtilitySpec,
}

impl RiskBlock {
    pub fn distortion(&self) -> Result<DistortionSpec> {
        DistortionSpec::alpha_beta(self.alpha, self.beta, self.p_weight)
    }
}

#[derive(Debug, Clone)]
pub struct TrainingBlock {
    pub batch: usize,
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub inner_cap: usize,
    pub outer_cap: usize,
    pub inner_window: usize,
    pub outer_window: usize,
    /// Iteration cap for warm-started inner re-solves inside the outer loop.
    pub inner_refresh_cap: usize,
    pub lambda0: f64,
    pub mu0: f64,
    pub growth: f64,
    pub n_lagrange: usize,
    pub adversary_hidden: Vec<usize>,
    pub policy_hidden: Vec<usize>,
    pub adversary_noise_dim: usize,
}

#[derive(Debug, Clone)]
pub enum MarketBlock {
    Factor {
        spec: FactorMarketSpec,
        /// Reference weights for the inner-only stress test.
        weights: Option<Vec<f64>>,
    },
    StatArb(OuStatArbSpec),
    Benchmark(BenchmarkMarketSpec),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub paper_scale: bool,
    pub risk: RiskBlock,
    pub epsilon: f64,
    pub order: f64,
    pub kernel: Kernel,
    pub bandwidth: BandwidthRule,
    pub training: TrainingBlock,
    pub market: MarketBlock,
}

impl ExperimentConfig {
    /// Per-experiment defaults. Desk scale is sized for a laptop core; the
    /// full scale mirrors the published experiments.
    pub fn defaults(kind: ExperimentKind, paper_scale: bool) -> Self {
        let (batch, inner_cap, outer_cap, hidden): (usize, usize, usize, Vec<usize>) =
            if paper_scale {
                (4096, 5000, 500, vec![50, 50, 50])
            } else {
                (2048, 2000, 200, vec![32, 32])
            };
        // the dynamic-trading policy sits near a bounded activation and
        // needs gentler steps than the static allocation problems
        let (outer_lr, outer_window) = match kind {
            ExperimentKind::StatArb => (5e-3, 25),
            _ => (1e-2, 10),
        };
        let order = match kind {
            ExperimentKind::Portfolio | ExperimentKind::InnerOnly => 1.0,
            _ => 2.0,
        };
        let epsilon = match kind {
            ExperimentKind::Portfolio | ExperimentKind::InnerOnly => 0.01,
            ExperimentKind::Benchmark => 0.5,
            ExperimentKind::StatArb => 0.01,
        };
        let market = match kind {
            ExperimentKind::Portfolio | ExperimentKind::InnerOnly => MarketBlock::Factor {
                spec: FactorMarketSpec::new(10).expect("positive asset count"),
                weights: None,
            },
            ExperimentKind::StatArb => MarketBlock::StatArb(OuStatArbSpec {
                steps: if paper_scale { 252 } else { 64 },
                ..OuStatArbSpec::default()
            }),
            ExperimentKind::Benchmark => {
                MarketBlock::Benchmark(BenchmarkMarketSpec::standard(if paper_scale {
                    1260
                } else {
                    60
                }))
            }
        };
        Self {
            kind,
            seed: 0,
            output_dir: PathBuf::from(format!("out/{}", kind.name())),
            paper_scale,
            risk: RiskBlock {
                alpha: 0.1,
                beta: 0.9,
                p_weight: 0.75,
                utility: UtilitySpec::Linear,
            },
            epsilon,
            order,
            kernel: if paper_scale {
                Kernel::Gaussian
            } else {
                Kernel::Epanechnikov
            },
            bandwidth: BandwidthRule::Silverman,
            training: TrainingBlock {
                batch,
                inner_lr: 1e-3,
                outer_lr,
                inner_cap,
                outer_cap,
                inner_window: if paper_scale { 50 } else { 30 },
                outer_window,
                inner_refresh_cap: if paper_scale { 500 } else { 150 },
                lambda0: 1.0,
                mu0: 10.0,
                growth: 1.5,
                n_lagrange: 50,
                adversary_hidden: hidden.clone(),
                policy_hidden: hidden,
                adversary_noise_dim: 0,
            },
            market,
        }
    }

    /// Fold the parsed file into this config, consuming every recognized key.
    pub fn apply_ini(&mut self, ini: &mut Ini) -> Result<()> {
        // [experiment]
        let _ = ini.take("experiment.kind"); // already used to pick defaults
        if let Some(seed) = ini.take_parse::<u64>("experiment.seed")? {
            self.seed = seed;
        }
        if let Some(dir) = ini.take("experiment.output_dir") {
            self.output_dir = PathBuf::from(dir);
        }

        // [risk]
        if let Some(v) = ini.take_parse("risk.alpha")? {
            self.risk.alpha = v;
        }
        if let Some(v) = ini.take_parse("risk.beta")? {
            self.risk.beta = v;
        }
        if let Some(v) = ini.take_parse("risk.p_weight")? {
            self.risk.p_weight = v;
        }
        if let Some(v) = ini.take("risk.utility") {
            self.risk.utility = parse_utility(&v)?;
        }

        // [wasserstein]
        if let Some(v) = ini.take_parse("wasserstein.order")? {
            self.order = v;
        }
        if let Some(v) = ini.take("wasserstein.epsilon") {
            self.epsilon = parse_epsilon(&v)?;
        }

        // [kde]
        if let Some(v) = ini.take("kde.kernel") {
            self.kernel = match v.as_str() {
                "gaussian" => Kernel::Gaussian,
                "epanechnikov" => Kernel::Epanechnikov,
                other => return Err(cfg_err("kde.kernel", format!("unknown kernel `{other}`"))),
            };
        }
        if let Some(v) = ini.take("kde.bandwidth") {
            self.bandwidth = if v == "silverman" {
                BandwidthRule::Silverman
            } else if let Some(h) = v.strip_prefix("fixed:") {
                BandwidthRule::Fixed(
                    h.parse()
                        .map_err(|_| cfg_err("kde.bandwidth", "bad fixed bandwidth"))?,
                )
            } else {
                return Err(cfg_err("kde.bandwidth", format!("unknown rule `{v}`")));
            };
        }

        // [training]
        let t = &mut self.training;
        macro_rules! take_into {
            ($field:ident, $key:literal) => {
                if let Some(v) = ini.take_parse($key)? {
                    t.$field = v;
                }
            };
        }
        take_into!(batch, "training.batch");
        take_into!(inner_lr, "training.inner_lr");
        take_into!(outer_lr, "training.outer_lr");
        take_into!(inner_cap, "training.inner_cap");
        take_into!(outer_cap, "training.outer_cap");
        take_into!(inner_window, "training.inner_window");
        take_into!(outer_window, "training.outer_window");
        take_into!(inner_refresh_cap, "training.inner_refresh_cap");
        take_into!(lambda0, "training.lambda0");
        take_into!(mu0, "training.mu0");
        take_into!(growth, "training.growth");
        take_into!(n_lagrange, "training.n_lagrange");
        take_into!(adversary_noise_dim, "training.adversary_noise_dim");
        if let Some(v) = ini.take("training.adversary_hidden") {
            t.adversary_hidden = parse_usize_list(&v, "training.adversary_hidden")?;
        }
        if let Some(v) = ini.take("training.policy_hidden") {
            t.policy_hidden = parse_usize_list(&v, "training.policy_hidden")?;
        }

        // [market]
        match &mut self.market {
            MarketBlock::Factor { spec, weights } => {
                if let Some(v) = ini.take_parse("market.assets")? {
                    *spec = FactorMarketSpec::new(v)?;
                }
                if let Some(v) = ini.take("market.weights") {
                    *weights = Some(if v == "equal" {
                        vec![1.0 / spec.assets as f64; spec.assets]
                    } else {
                        parse_f64_list(&v, "market.weights")?
                    });
                }
            }
            MarketBlock::StatArb(spec) => {
                macro_rules! take_market {
                    ($field:ident, $key:literal) => {
                        if let Some(v) = ini.take_parse($key)? {
                            spec.$field = v;
                        }
                    };
                }
                take_market!(kappa, "market.kappa");
                take_market!(mean_level, "market.mean_level");
                take_market!(sigma, "market.sigma");
                take_market!(impact, "market.impact");
                take_market!(steps, "market.steps");
                take_market!(dt, "market.dt");
                take_market!(inventory_bound, "market.inventory_bound");
                take_market!(s0, "market.s0");
                take_market!(impact_grad_floor, "market.impact_grad_floor");
            }
            MarketBlock::Benchmark(spec) => {
                if let Some(v) = ini.take("market.drifts") {
                    spec.drifts = parse_f64_list(&v, "market.drifts")?;
                }
                if let Some(v) = ini.take("market.vols") {
                    spec.vols = parse_f64_list(&v, "market.vols")?;
                }
                if let Some(v) = ini.take_parse("market.correlation")? {
                    spec.correlation = v;
                }
                if let Some(v) = ini.take_parse("market.steps")? {
                    spec.steps = v;
                }
                if let Some(v) = ini.take("market.benchmark_weights") {
                    spec.benchmark_weights = parse_f64_list(&v, "market.benchmark_weights")?;
                }
                if let Some(v) = ini.take("market.rate") {
                    spec.rate = parse_rate(&v)?;
                }
            }
        }
        Ok(())
    }

    /// Re-validate every module invariant reachable from this config.
    pub fn validate(&self) -> Result<()> {
        self.risk.distortion()?;
        WassersteinSpec::new(self.order, self.epsilon)?;
        if let BandwidthRule::Fixed(h) = self.bandwidth {
            if !(h > 0.0) {
                return Err(cfg_err("kde.bandwidth", "fixed bandwidth must be positive"));
            }
        }
        rro::optim::LagrangeState::new(
            self.training.lambda0,
            self.training.mu0,
            self.training.growth,
            self.training.n_lagrange,
        )?;
        if self.training.batch < 2 {
            return Err(cfg_err("training.batch", "need at least 2 samples"));
        }
        if self.training.inner_cap == 0 || self.training.outer_cap == 0 {
            return Err(cfg_err("training.inner_cap", "caps must be positive"));
        }
        match &self.market {
            MarketBlock::Factor { spec, weights } => {
                if let Some(w) = weights {
                    if w.len() != spec.assets {
                        return Err(cfg_err(
                            "market.weights",
                            format!("expected {} weights, got {}", spec.assets, w.len()),
                        ));
                    }
                }
            }
            MarketBlock::StatArb(spec) => spec.validate()?,
            MarketBlock::Benchmark(spec) => spec.validate()?,
        }
        Ok(())
    }
}

fn parse_utility(v: &str) -> Result<UtilitySpec> {
    if v == "linear" {
        return Ok(UtilitySpec::Linear);
    }
    if let Some(a) = v.strip_prefix("exponential:") {
        return UtilitySpec::exponential(
            a.parse()
                .map_err(|_| cfg_err("risk.utility", "bad risk aversion"))?,
        );
    }
    if let Some(e) = v.strip_prefix("power:") {
        return UtilitySpec::power(
            e.parse()
                .map_err(|_| cfg_err("risk.utility", "bad exponent"))?,
        );
    }
    Err(cfg_err("risk.utility", format!("unknown utility `{v}`")))
}

pub fn parse_epsilon(v: &str) -> Result<f64> {
    if v == "inf" || v == "infinity" {
        return Ok(f64::INFINITY);
    }
    v.parse()
        .map_err(|_| cfg_err("wasserstein.epsilon", format!("cannot parse `{v}`")))
}

fn parse_rate(v: &str) -> Result<RateModel> {
    if let Some(r) = v.strip_prefix("constant:") {
        return Ok(RateModel::Constant(
            r.parse().map_err(|_| cfg_err("market.rate", "bad rate"))?,
        ));
    }
    if let Some(rest) = v.strip_prefix("vasicek:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 4 {
            return Err(cfg_err("market.rate", "vasicek needs r0,kappa,theta,sigma"));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| cfg_err("market.rate", "bad vasicek parameter"))?;
        return Ok(RateModel::Vasicek {
            r0: nums[0],
            kappa: nums[1],
            theta: nums[2],
            sigma: nums[3],
        });
    }
    Err(cfg_err("market.rate", format!("unknown rate model `{v}`")))
}

fn parse_f64_list(v: &str, path: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|p| p.trim().parse().map_err(|_| cfg_err(path, "bad number")))
        .collect()
}

fn parse_usize_list(v: &str, path: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|p| p.trim().parse().map_err(|_| cfg_err(path, "bad size")))
        .collect()
}

/// Command-line flags that override file values.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub paper_scale: bool,
    pub experiment: Option<String>,
    pub epsilon: Option<f64>,
    pub p_weight: Option<f64>,
}

/// Load a config file and apply overrides.
pub fn load(path: &std::path::Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut ini = Ini::parse(&text)?;
    let kind_str = match &overrides.experiment {
        Some(k) => k.clone(),
        None => ini
            .take("experiment.kind")
            .ok_or_else(|| cfg_err("experiment.kind", "missing (or pass --experiment)"))?,
    };
    let kind = ExperimentKind::parse(&kind_str)?;
    let mut cfg = ExperimentConfig::defaults(kind, overrides.paper_scale);
    cfg.apply_ini(&mut ini)?;
    ini.finish()?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &overrides.out {
        cfg.output_dir = out.clone();
    }
    if let Some(eps) = overrides.epsilon {
        cfg.epsilon = eps;
    }
    if let Some(p) = overrides.p_weight {
        cfg.risk.p_weight = p;
    }
    cfg.validate()?;
    Ok(cfg)
}
