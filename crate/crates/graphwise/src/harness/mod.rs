//! Monte Carlo size and power sweeps for the witness tests.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::estimation::{cv_select_lambda, lambda_grid, ClimeConfig, DEFAULT_GRID_MULTIPLIERS};
use crate::graphs::{Edge, Graph};
use crate::inference::{BootstrapConfig, BootstrapScale};
use crate::model::PrecisionModel;
use crate::seeds;
use crate::witness::{run_witness_test, SplitMode, WitnessProperty, WitnessTestSpec};

/// Signal strengths of the reference size tables.
pub const THETA_GRID: [f64; 7] = [0.25, 0.28, 0.32, 0.35, 0.38, 0.42, 0.45];
pub const CSV_HEADER: &str = "property,n,d,theta,alpha,lambda,reps,size,size_se,power,power_se,risk,seed";
/// Largest chord endpoint drawn by [`Scenario::ChainChord`].
pub const MAX_CHORD_END: usize = 10;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("building thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error("choosing lambda by cross-validation: {0}")]
    Lambda(String),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Random graph generators for the two arms of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scenario {
    /// No edges.
    Empty,
    /// Path `1 - 2 - ... - d`.
    Chain,
    /// Chains on `1..=M` and `M+1..=d` with `M` uniform on `1..d`.
    SplitChain,
    /// Chain plus the chord `(1, M)`, `M` uniform on `3..=min(10, d)`.
    ChainChord,
}

impl Scenario {
    pub fn id(self) -> &'static str {
        match self {
            Scenario::Empty => "empty",
            Scenario::Chain => "chain",
            Scenario::SplitChain => "split_chain",
            Scenario::ChainChord => "chain_chord",
        }
    }

    pub fn draw<R: Rng>(self, d: usize, rng: &mut R) -> Graph {
        match self {
            Scenario::Empty => Graph::empty(d),
            Scenario::Chain => Graph::chain(d),
            Scenario::SplitChain => {
                let cut = rng.random_range(1..d);
                let mut g = Graph::chain(d);
                g.remove_edge(Edge::new(cut, cut + 1).expect("distinct"));
                g
            }
            Scenario::ChainChord => {
                let end = rng.random_range(3..=MAX_CHORD_END.min(d));
                let mut g = Graph::chain(d);
                g.add_edge(Edge::new(1, end).expect("distinct")).expect("vertex in range");
                g
            }
        }
    }

    fn min_d(self) -> usize {
        match self {
            Scenario::Empty | Scenario::Chain => 1,
            Scenario::SplitChain => 2,
            Scenario::ChainChord => 4,
        }
    }

    /// Null and alternative generators for properties that have a standard pair.
    pub fn defaults_for(property: WitnessProperty) -> Option<(Scenario, Scenario)> {
        match property {
            WitnessProperty::Connectivity
            | WitnessProperty::ConnectivityAtLevel { .. }
            | WitnessProperty::Components { m: 1 } => Some((Scenario::SplitChain, Scenario::Chain)),
            WitnessProperty::Cycle => Some((Scenario::Chain, Scenario::ChainChord)),
            _ => None,
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [Scenario::Empty, Scenario::Chain, Scenario::SplitChain, Scenario::ChainChord]
            .into_iter()
            .find(|sc| sc.id() == s.trim())
            .ok_or_else(|| format!("unknown scenario {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum LambdaPolicy {
    /// `multiplier · √(ln d / n)` with the full sample size.
    Rate { multiplier: f64 },
    Fixed(f64),
    /// One cross-validation on a pilot draw from the alternative at the
    /// largest θ, reused for the whole sweep.
    CrossValidated { folds: usize },
}

impl LambdaPolicy {
    pub const DEFAULT: LambdaPolicy = LambdaPolicy::Rate { multiplier: 1.5 };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Profile {
    /// d = 50, n = 300, 100 repetitions, 1000 bootstrap draws.
    Desk,
    /// d = 100, n = 400, 200 repetitions, 3000 bootstrap draws.
    Full,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(format!("unknown profile {other:?}; expected desk or full")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub property: WitnessProperty,
    pub thetas: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub reps: usize,
    pub replications: usize,
    pub alpha: f64,
    pub lambda: LambdaPolicy,
    pub seed: u64,
    pub null: Scenario,
    /// `None` runs the null arm only.
    pub alternative: Option<Scenario>,
    pub split: SplitMode,
    pub scale: BootstrapScale,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl SimulationConfig {
    pub fn from_profile(profile: Profile, property: WitnessProperty) -> Result<Self> {
        let (d, n, reps, replications) = match profile {
            Profile::Desk => (50, 300, 100, 1000),
            Profile::Full => (100, 400, 200, 3000),
        };
        let (null, alternative) = Scenario::defaults_for(property).ok_or_else(|| {
            HarnessError::InvalidConfig(format!("{} has no default scenarios; set null and alternative", property.name()))
        })?;
        Ok(SimulationConfig {
            property,
            thetas: THETA_GRID.to_vec(),
            n,
            d,
            reps,
            replications,
            alpha: 0.05,
            lambda: LambdaPolicy::DEFAULT,
            seed: 0,
            null,
            alternative: Some(alternative),
            split: SplitMode::Sequential,
            scale: BootstrapScale::Debiased,
            threads: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.reps == 0 {
            return fail("reps must be at least 1".into());
        }
        if self.thetas.is_empty() {
            return fail("theta grid is empty".into());
        }
        if self.thetas.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return fail("theta values must be finite and nonnegative".into());
        }
        if self.n < 4 {
            return fail(format!("n must be at least 4, got {}", self.n));
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        for sc in std::iter::once(self.null).chain(self.alternative) {
            if self.d < sc.min_d() {
                return fail(format!("scenario {} needs d >= {}", sc.id(), sc.min_d()));
            }
        }
        self.property.validate(self.d).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        BootstrapConfig::new(self.replications, self.alpha, 0).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        match self.lambda {
            LambdaPolicy::Rate { multiplier } if !(multiplier > 0.0 && multiplier.is_finite()) => {
                fail("lambda multiplier must be positive".into())
            }
            LambdaPolicy::Fixed(l) if !(l > 0.0 && l.is_finite()) => fail("lambda must be positive".into()),
            LambdaPolicy::CrossValidated { folds } if folds < 2 => fail("need at least 2 folds".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Arm {
    Null,
    Alternative,
}

/// One repetition: `Ok(reject)` or the failure message.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Repetition {
    pub theta_index: usize,
    pub rep: usize,
    pub arm: Arm,
    pub reject: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub rejected: usize,
    pub accepted: usize,
    pub failed: usize,
}

impl Counts {
    pub fn completed(&self) -> usize {
        self.rejected + self.accepted
    }

    /// Rejection frequency over completed repetitions and its binomial
    /// standard error; `None` if nothing completed.
    pub fn rate(&self) -> Option<(f64, f64)> {
        let m = self.completed();
        (m > 0).then(|| {
            let p = self.rejected as f64 / m as f64;
            (p, (p * (1.0 - p) / m as f64).sqrt())
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaRow {
    pub theta: f64,
    pub null: Counts,
    pub alternative: Option<Counts>,
}

impl ThetaRow {
    pub fn size(&self) -> Option<(f64, f64)> {
        self.null.rate()
    }

    pub fn power(&self) -> Option<(f64, f64)> {
        self.alternative.and_then(|c| c.rate())
    }

    /// `size + (1 - power)`.
    pub fn risk(&self) -> Option<f64> {
        Some(self.size()?.0 + 1.0 - self.power()?.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub lambda: f64,
    pub rows: Vec<ThetaRow>,
    pub repetitions: Vec<Repetition>,
    pub elapsed_seconds: f64,
}

impl SimulationResult {
    /// Share of repetitions that failed, over both arms.
    pub fn failure_rate(&self) -> f64 {
        let failed = self.repetitions.iter().filter(|r| r.error.is_some()).count();
        failed as f64 / self.repetitions.len().max(1) as f64
    }
}

/// Finite-sample stand-in for the asymptotic rate condition of the step-down
/// test: `s ln(nd) √(ln d ln(nd)) / √n`, to be compared against 1.
pub fn rate_condition(s: usize, n: usize, d: usize) -> f64 {
    let (s, n, d) = (s as f64, n as f64, d as f64);
    let lnd = (n * d).ln();
    s * lnd * (d.ln() * lnd).sqrt() / n.sqrt()
}

fn resolve_lambda(cfg: &SimulationConfig) -> Result<f64> {
    match cfg.lambda {
        LambdaPolicy::Rate { multiplier } => Ok(multiplier * ((cfg.d as f64).ln() / cfg.n as f64).sqrt()),
        LambdaPolicy::Fixed(l) => Ok(l),
        LambdaPolicy::CrossValidated { folds } => {
            let scenario = cfg.alternative.unwrap_or(cfg.null);
            let theta = cfg.thetas.iter().copied().fold(0.0, f64::max);
            let pilot_seed = seeds::derive(cfg.seed, &[u64::MAX]);
            let graph = scenario.draw(cfg.d, &mut seeds::child_rng(pilot_seed, &[0]));
            let err = |e: &dyn std::fmt::Display| HarnessError::Lambda(e.to_string());
            let model = PrecisionModel::new(graph, theta).map_err(|e| err(&e))?;
            // each fit in the sweep sees half the sample
            let half = cfg.n / 2;
            let pilot = model.sample(half, seeds::derive(pilot_seed, &[1])).map_err(|e| err(&e))?;
            let grid = lambda_grid(cfg.d, half, &DEFAULT_GRID_MULTIPLIERS);
            let base = ClimeConfig::new(grid[0]).map_err(|e| err(&e))?;
            let cv = cv_select_lambda(&pilot, &grid, folds, &base, seeds::derive(pilot_seed, &[2])).map_err(|e| err(&e))?;
            Ok(cv.lambda)
        }
    }
}

fn run_repetition(cfg: &SimulationConfig, lambda: f64, theta: f64, scenario: Scenario, stream: u64) -> std::result::Result<bool, String> {
    let graph = scenario.draw(cfg.d, &mut seeds::child_rng(stream, &[0]));
    let should_hold = scenario != cfg.null;
    if cfg.property.holds(&graph) != should_hold {
        let verb = if should_hold { "lacks" } else { "has" };
        return Err(format!("scenario {} drew a graph that {verb} {}", scenario.id(), cfg.property.name()));
    }
    let model = PrecisionModel::new(graph, theta).map_err(|e| format!("model: {e}"))?;
    let x = model.sample(cfg.n, seeds::derive(stream, &[1])).map_err(|e| format!("sampling: {e}"))?;
    let spec = WitnessTestSpec {
        property: cfg.property,
        clime: ClimeConfig::new(lambda).map_err(|e| e.to_string())?,
        bootstrap: BootstrapConfig::new(cfg.replications, cfg.alpha, seeds::derive(stream, &[2]))
            .map_err(|e| e.to_string())?
            .with_scale(cfg.scale),
        split: cfg.split,
    };
    run_witness_test(&x, &spec).map(|o| o.reject).map_err(|e| e.to_string())
}

/// Runs every repetition of both arms at every θ. Repetition `r` of arm `a`
/// at grid index `t` draws everything from `derive(seed, [t, r, a])`, so the
/// result does not depend on scheduling or thread count.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<SimulationResult> {
    cfg.validate()?;
    if cfg.alternative == Some(cfg.null) {
        return Err(HarnessError::InvalidConfig("null and alternative scenarios coincide".into()));
    }
    let start = Instant::now();
    let lambda = resolve_lambda(cfg)?;
    let arms: Vec<(Arm, Scenario)> =
        std::iter::once((Arm::Null, cfg.null)).chain(cfg.alternative.map(|s| (Arm::Alternative, s))).collect();
    let mut jobs = Vec::with_capacity(cfg.thetas.len() * cfg.reps * arms.len());
    for t in 0..cfg.thetas.len() {
        for r in 0..cfg.reps {
            jobs.extend(arms.iter().map(|&(arm, scenario)| (t, r, arm, scenario)));
        }
    }
    let work = || -> Vec<Repetition> {
        jobs.par_iter()
            .map(|&(t, r, arm, scenario)| {
                let stream = seeds::derive(cfg.seed, &[t as u64, r as u64, arm as u64]);
                let outcome = run_repetition(cfg, lambda, cfg.thetas[t], scenario, stream);
                let (reject, error) = match outcome {
                    Ok(b) => (Some(b), None),
                    Err(e) => (None, Some(e)),
                };
                Repetition { theta_index: t, rep: r, arm, reject, error }
            })
            .collect()
    };
    let repetitions = match cfg.threads {
        Some(k) => rayon::ThreadPoolBuilder::new().num_threads(k).build()?.install(work),
        None => work(),
    };
    let mut rows: Vec<ThetaRow> = cfg
        .thetas
        .iter()
        .map(|&theta| ThetaRow { theta, null: Counts::default(), alternative: cfg.alternative.map(|_| Counts::default()) })
        .collect();
    for rep in &repetitions {
        let row = &mut rows[rep.theta_index];
        let counts = match rep.arm {
            Arm::Null => &mut row.null,
            Arm::Alternative => row.alternative.as_mut().expect("alternative arm configured"),
        };
        match rep.reject {
            Some(true) => counts.rejected += 1,
            Some(false) => counts.accepted += 1,
            None => counts.failed += 1,
        }
    }
    Ok(SimulationResult { config: cfg.clone(), lambda, rows, repetitions, elapsed_seconds: start.elapsed().as_secs_f64() })
}

/// One output line per θ, in grid order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub property: String,
    pub n: usize,
    pub d: usize,
    pub theta: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub reps: usize,
    pub size: Option<f64>,
    pub size_se: Option<f64>,
    pub power: Option<f64>,
    pub power_se: Option<f64>,
    pub risk: Option<f64>,
    pub seed: u64,
}

pub fn records(result: &SimulationResult) -> Vec<ResultRecord> {
    let cfg = &result.config;
    result
        .rows
        .iter()
        .map(|row| ResultRecord {
            property: cfg.property.name(),
            n: cfg.n,
            d: cfg.d,
            theta: row.theta,
            alpha: cfg.alpha,
            lambda: result.lambda,
            reps: cfg.reps,
            size: row.size().map(|s| s.0),
            size_se: row.size().map(|s| s.1),
            power: row.power().map(|p| p.0),
            power_se: row.power().map(|p| p.1),
            risk: row.risk(),
            seed: cfg.seed,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    /// One JSON object per line.
    Records,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "records" | "jsonl" => Ok(OutputFormat::Records),
            other => Err(format!("unknown format {other:?}; expected csv or records")),
        }
    }
}

fn csv_field(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn to_csv(result: &SimulationResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records(result) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_text(&r.property),
            r.n,
            r.d,
            r.theta,
            r.alpha,
            r.lambda,
            r.reps,
            csv_field(r.size),
            csv_field(r.size_se),
            csv_field(r.power),
            csv_field(r.power_se),
            csv_field(r.risk),
            r.seed
        );
    }
    out
}

pub fn to_records(result: &SimulationResult) -> String {
    records(result)
        .iter()
        .map(|r| serde_json::to_string(r).expect("plain record serializes") + "\n")
        .collect()
}

pub fn render(result: &SimulationResult, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => to_csv(result),
        OutputFormat::Records => to_records(result),
    }
}

/// Writes to `path`, or standard output when `path` is `None`.
pub fn emit(result: &SimulationResult, format: OutputFormat, path: Option<&Path>) -> Result<()> {
    let text = render(result, format);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| HarnessError::Io { path: p.to_path_buf(), source }),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| HarnessError::Io { path: PathBuf::from("<stdout>"), source }),
    }
}
