//! Flat `key = value` experiment configuration.
//!
//! Lines starting with `#` are comments; list values are comma separated.
//! Every key is optional and defaults depend on the experiment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chaosamp::design::Criterion;
use chaosamp::{CandidatePool, PolyFamily, Strategy};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Recovery,
    Duffing,
    Battery,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Recovery => "recovery",
            ExperimentKind::Duffing => "duffing",
            ExperimentKind::Battery => "battery",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "recovery" => Ok(ExperimentKind::Recovery),
            "duffing" => Ok(ExperimentKind::Duffing),
            "battery" => Ok(ExperimentKind::Battery),
            other => Err(BenchError::Config(format!("unknown experiment `{other}`"))),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Input family of the recovery experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyChoice {
    Legendre,
    Hermite,
}

impl FamilyChoice {
    pub fn family(&self) -> PolyFamily<f64> {
        match self {
            FamilyChoice::Legendre => PolyFamily::Legendre,
            FamilyChoice::Hermite => PolyFamily::HermiteProbabilists,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            FamilyChoice::Legendre => "legendre",
            FamilyChoice::Hermite => "hermite",
        }
    }
}

/// Sample sizes: multiples of `P` or explicit counts.
#[derive(Debug, Clone, PartialEq)]
pub enum SizeGrid {
    Ratios(Vec<f64>),
    Counts(Vec<usize>),
}

impl SizeGrid {
    /// Sample counts for a basis of `p` functions; ratios round up.
    pub fn counts(&self, p: usize) -> Vec<usize> {
        match self {
            SizeGrid::Ratios(r) => r.iter().map(|x| (x * p as f64 - 1e-9).ceil() as usize).collect(),
            SizeGrid::Counts(c) => c.clone(),
        }
    }
}

/// Candidate-pool size for alphabetic designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateRule {
    /// `4 N`.
    FourN,
    /// `floor(1.5 P ln P)`.
    PLogP,
    Fixed(usize),
}

impl CandidateRule {
    pub fn count(&self, n: usize, p: usize) -> usize {
        match self {
            CandidateRule::FourN => 4 * n,
            CandidateRule::PLogP => chaosamp::design::default_candidate_count(p).max(n),
            CandidateRule::Fixed(k) => (*k).max(n),
        }
    }

    fn name(&self) -> String {
        match self {
            CandidateRule::FourN => "4n".into(),
            CandidateRule::PLogP => "plogp".into(),
            CandidateRule::Fixed(k) => k.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DuffingMode {
    /// Strategy comparison at fixed order.
    Design,
    /// Standard sampling at `factor * P` points across several orders.
    OrderSweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub family: FamilyChoice,
    pub dim: usize,
    pub order: usize,
    pub strategies: Vec<Strategy>,
    pub sizes: SizeGrid,
    pub candidates: CandidateRule,
    pub replications: usize,
    pub validation: usize,
    pub seed: u64,
    pub workers: usize,
    pub output: Option<PathBuf>,
    pub aggregate: bool,
    pub restarts: usize,
    pub burn_in: usize,
    // recovery
    pub noise_rel: f64,
    pub threshold: f64,
    // duffing / battery
    /// Duffing evaluation instants or battery prediction times, seconds.
    pub times: Vec<f64>,
    pub dt: f64,
    pub mode: DuffingMode,
    pub sweep_orders: Vec<usize>,
    pub sweep_factor: f64,
    // battery
    pub current_low: f64,
    pub current_high: f64,
    pub horizon: f64,
    pub state_cov: f64,
    pub zero_state_sd: f64,
    pub noise_sd: [f64; 3],
    pub pdf: bool,
    pub pdf_samples: usize,
    pub pdf_bins: usize,
    pub pdf_strategy: Strategy,
}

const D_COH_OPT: Strategy = Strategy::Alphabetic {
    criterion: Criterion::D,
    pool: CandidatePool::CoherenceOptimal,
};

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let base = Self {
            experiment,
            family: FamilyChoice::Legendre,
            dim: 2,
            order: 15,
            strategies: vec![Strategy::Standard, Strategy::CoherenceOptimal, D_COH_OPT],
            sizes: SizeGrid::Ratios(vec![1.25, 1.5, 2.0, 3.0, 5.0, 10.0]),
            candidates: CandidateRule::FourN,
            replications: 60,
            validation: 10_000,
            seed: 1,
            workers: 1,
            output: None,
            aggregate: false,
            restarts: 1,
            burn_in: 1000,
            noise_rel: 0.03,
            threshold: 0.02,
            times: Vec::new(),
            dt: chaosamp::models::DUFFING_DT,
            mode: DuffingMode::Design,
            sweep_orders: vec![2, 4, 6, 8, 10, 12],
            sweep_factor: 20.0,
            current_low: 0.0,
            current_high: 40.0,
            horizon: 1e5,
            state_cov: 0.1,
            zero_state_sd: 0.1,
            noise_sd: [0.1f64.sqrt(), 1e-2, 1e-3],
            pdf: false,
            pdf_samples: 100_000,
            pdf_bins: 60,
            pdf_strategy: D_COH_OPT,
        };
        match experiment {
            ExperimentKind::Recovery => base,
            ExperimentKind::Duffing => Self {
                dim: 3,
                order: 9,
                strategies: vec![
                    Strategy::Standard,
                    Strategy::Lhs,
                    Strategy::CoherenceOptimal,
                    D_COH_OPT,
                    Strategy::Alphabetic {
                        criterion: Criterion::A,
                        pool: CandidatePool::CoherenceOptimal,
                    },
                ],
                sizes: SizeGrid::Counts(vec![242, 440, 660]),
                candidates: CandidateRule::PLogP,
                times: vec![1.0, 2.0, 3.0, 4.0],
                ..base
            },
            ExperimentKind::Battery => Self {
                dim: 7,
                order: 3,
                strategies: vec![Strategy::Standard, Strategy::Lhs, Strategy::CoherenceOptimal, D_COH_OPT],
                sizes: SizeGrid::Ratios(Vec::new()),
                candidates: CandidateRule::PLogP,
                times: vec![0.0, 200.0, 400.0, 600.0],
                dt: 0.5,
                ..base
            },
        }
    }

    /// Sample counts for a basis of `p` functions. An empty battery grid means `P + 1`.
    pub fn sample_counts(&self, p: usize) -> Vec<usize> {
        match &self.sizes {
            SizeGrid::Ratios(r) if r.is_empty() => vec![p + 1],
            g => g.counts(p),
        }
    }

    /// Parses a configuration for `experiment`. An `experiment` key, if
    /// present, must agree.
    pub fn parse(experiment: ExperimentKind, text: &str) -> Result<Self, BenchError> {
        let mut cfg = Self::defaults(experiment);
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            if seen.insert(key.clone(), lineno + 1).is_some() {
                return Err(BenchError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            cfg.set(&key, value)
                .map_err(|e| BenchError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "experiment" => {
                let kind: ExperimentKind = v.parse().map_err(|e: BenchError| e.to_string())?;
                if kind != self.experiment {
                    return Err(format!("config is for `{kind}`, not `{}`", self.experiment));
                }
            }
            "family" => {
                self.family = match v.to_ascii_lowercase().as_str() {
                    "legendre" | "uniform" => FamilyChoice::Legendre,
                    "hermite" | "normal" | "gaussian" => FamilyChoice::Hermite,
                    other => return Err(format!("unknown family `{other}`")),
                }
            }
            "d" | "dim" => self.dim = num(v)?,
            "p" | "order" => self.order = num(v)?,
            "strategies" => {
                self.strategies = list(v)
                    .iter()
                    .map(|s| Strategy::parse(s).ok_or_else(|| format!("unknown strategy `{s}`")))
                    .collect::<Result<_, _>>()?
            }
            "ratios" => self.sizes = SizeGrid::Ratios(list(v).iter().map(|s| num(s)).collect::<Result<_, _>>()?),
            "n" => self.sizes = SizeGrid::Counts(list(v).iter().map(|s| num(s)).collect::<Result<_, _>>()?),
            "candidates" => {
                self.candidates = match v.to_ascii_lowercase().as_str() {
                    "4n" => CandidateRule::FourN,
                    "plogp" => CandidateRule::PLogP,
                    other => CandidateRule::Fixed(num(other)?),
                }
            }
            "replications" => self.replications = num(v)?,
            "validation" => self.validation = num(v)?,
            "seed" => self.seed = num(v)?,
            "workers" => self.workers = num(v)?,
            "output" => self.output = Some(PathBuf::from(v)),
            "aggregate" => self.aggregate = flag(v)?,
            "restarts" => self.restarts = num(v)?,
            "burn_in" => self.burn_in = num(v)?,
            "noise_rel" => self.noise_rel = num(v)?,
            "threshold" => self.threshold = num(v)?,
            "times" => self.times = list(v).iter().map(|s| num(s)).collect::<Result<_, _>>()?,
            "dt" => self.dt = num(v)?,
            "mode" => {
                self.mode = match v.to_ascii_lowercase().as_str() {
                    "design" => DuffingMode::Design,
                    "order-sweep" | "psweep" => DuffingMode::OrderSweep,
                    other => return Err(format!("unknown mode `{other}`")),
                }
            }
            "sweep_orders" => self.sweep_orders = list(v).iter().map(|s| num(s)).collect::<Result<_, _>>()?,
            "sweep_factor" => self.sweep_factor = num(v)?,
            "current_low" => self.current_low = num(v)?,
            "current_high" => self.current_high = num(v)?,
            "horizon" => self.horizon = num(v)?,
            "state_cov" => self.state_cov = num(v)?,
            "zero_state_sd" => self.zero_state_sd = num(v)?,
            "noise_sd" => {
                let xs: Vec<f64> = list(v).iter().map(|s| num(s)).collect::<Result<_, _>>()?;
                self.noise_sd = xs
                    .try_into()
                    .map_err(|_| "noise_sd needs exactly three values".to_string())?;
            }
            "pdf" => self.pdf = flag(v)?,
            "pdf_samples" => self.pdf_samples = num(v)?,
            "pdf_bins" => self.pdf_bins = num(v)?,
            "pdf_strategy" => {
                self.pdf_strategy = Strategy::parse(v).ok_or_else(|| format!("unknown strategy `{v}`"))?
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.validation == 0 {
            return bad("validation must be at least 1");
        }
        if self.dim == 0 {
            return bad("d must be at least 1");
        }
        if self.strategies.is_empty() {
            return bad("strategies must not be empty");
        }
        match &self.sizes {
            SizeGrid::Ratios(r) if r.iter().any(|x| !(*x > 0.0) || !x.is_finite()) => {
                return bad("ratios must be positive")
            }
            SizeGrid::Counts(c) if c.is_empty() || c.contains(&0) => return bad("n values must be positive"),
            _ => {}
        }
        if matches!(self.candidates, CandidateRule::Fixed(0)) {
            return bad("candidates must be positive");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return bad("times must be finite and nonnegative");
        }
        if !(self.noise_rel >= 0.0) || !(self.threshold > 0.0) {
            return bad("noise_rel must be >= 0 and threshold > 0");
        }
        if self.sweep_orders.is_empty() || !(self.sweep_factor > 0.0) {
            return bad("order sweep needs orders and a positive factor");
        }
        match self.experiment {
            ExperimentKind::Duffing if self.dim != 3 => return bad("the Duffing model has d = 3"),
            ExperimentKind::Battery if self.dim != 7 => return bad("the battery model has d = 7"),
            ExperimentKind::Duffing | ExperimentKind::Battery if self.times.is_empty() => {
                return bad("times must not be empty")
            }
            _ => {}
        }
        if self.experiment == ExperimentKind::Battery {
            if self.current_high < self.current_low {
                return bad("current_high must be >= current_low");
            }
            if !(self.horizon > 0.0) || self.pdf_bins == 0 || self.pdf_samples == 0 {
                return bad("horizon, pdf_bins and pdf_samples must be positive");
            }
        }
        Ok(())
    }

    /// `key = value` lines describing the configuration, for output headers.
    pub fn echo(&self) -> Vec<(String, String)> {
        let join = |xs: Vec<String>| xs.join(",");
        let sizes = match &self.sizes {
            SizeGrid::Ratios(r) if r.is_empty() => ("n".to_string(), "p+1".to_string()),
            SizeGrid::Ratios(r) => ("ratios".into(), join(r.iter().map(|x| x.to_string()).collect())),
            SizeGrid::Counts(c) => ("n".into(), join(c.iter().map(|x| x.to_string()).collect())),
        };
        let mut out = vec![
            ("experiment".to_string(), self.experiment.to_string()),
            ("d".into(), self.dim.to_string()),
            ("p".into(), self.order.to_string()),
            ("strategies".into(), join(self.strategies.iter().map(|s| s.name()).collect())),
            sizes,
            ("candidates".into(), self.candidates.name()),
            ("replications".into(), self.replications.to_string()),
            ("validation".into(), self.validation.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("restarts".into(), self.restarts.to_string()),
            ("burn_in".into(), self.burn_in.to_string()),
        ];
        match self.experiment {
            ExperimentKind::Recovery => {
                out.push(("family".into(), self.family.name().into()));
                out.push(("noise_rel".into(), self.noise_rel.to_string()));
                out.push(("threshold".into(), self.threshold.to_string()));
            }
            ExperimentKind::Duffing => {
                out.push(("times".into(), join(self.times.iter().map(|x| x.to_string()).collect())));
                out.push(("dt".into(), self.dt.to_string()));
                if self.mode == DuffingMode::OrderSweep {
                    out.push(("mode".into(), "order-sweep".into()));
                    out.push(("sweep_orders".into(), join(self.sweep_orders.iter().map(|x| x.to_string()).collect())));
                    out.push(("sweep_factor".into(), self.sweep_factor.to_string()));
                }
            }
            ExperimentKind::Battery => {
                out.push(("times".into(), join(self.times.iter().map(|x| x.to_string()).collect())));
                out.push(("dt".into(), self.dt.to_string()));
                out.push(("current_low".into(), self.current_low.to_string()));
                out.push(("current_high".into(), self.current_high.to_string()));
                out.push(("horizon".into(), self.horizon.to_string()));
                out.push(("state_cov".into(), self.state_cov.to_string()));
                out.push(("zero_state_sd".into(), self.zero_state_sd.to_string()));
                out.push(("noise_sd".into(), join(self.noise_sd.iter().map(|x| x.to_string()).collect())));
            }
        }
        out
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn num<F: FromStr>(v: &str) -> Result<F, String>
where
    F::Err: fmt::Display,
{
    v.trim().parse::<F>().map_err(|e| format!("bad value `{v}`: {e}"))
}

fn flag(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(format!("expected a boolean, got `{other}`")),
    }
}
