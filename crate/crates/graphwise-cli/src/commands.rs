use std::path::{Path, PathBuf};

use clap::Args;
use graphwise::estimation::{
    clime, cv_select_lambda, empirical_covariance, lambda_grid, ClimeConfig, ClimeSolver, EstimationError,
    DEFAULT_GRID_MULTIPLIERS,
};
use graphwise::graphs::Graph;
use graphwise::harness::{self, HarnessError, LambdaPolicy, OutputFormat, Profile, Scenario, SimulationConfig};
use graphwise::inference::{BootstrapConfig, BootstrapScale};
use graphwise::lowerbound::{
    divider_stats, multi_edge_chi2_bound, single_edge_chi2_bound, threshold_report, BoundSetting, LowerBoundError,
};
use graphwise::model::{build_family, Dataset, FamilyKind, ModelClassParams, ModelError, PrecisionModel};
use graphwise::seeds;
use graphwise::witness::{
    clique_detection_test, run_witness_test, SplitMode, WitnessError, WitnessProperty, WitnessTestSpec,
};
use serde_json::json;

use crate::config::ConfigFile;
use crate::{CliError, Command, GlobalOpts};

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Scenario id (empty, chain, split_chain, chain_chord) or an edge-list file.
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Output matrix; `.bin` selects the binary format, anything else CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write the drawn graph as an edge list.
    #[arg(long)]
    graph_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    /// A number, `rate:M` for M * sqrt(ln d / n), or `cv:K` for K-fold selection.
    #[arg(long)]
    lambda: Option<String>,
    /// simplex or admm.
    #[arg(long)]
    solver: Option<String>,
    /// Where to write the symmetric estimate.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// connectivity, components:M, cycle, triangle, path_length:M, max_degree:S0, clique:S.
    #[arg(long)]
    property: Option<String>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    /// Edge-magnitude level; turns connectivity into connectivity_at_level.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    solver: Option<String>,
    /// Bootstrap replications.
    #[arg(long)]
    replications: Option<usize>,
    /// raw or debiased (default).
    #[arg(long)]
    bootstrap_scale: Option<String>,
    /// Shuffle rows (seeded) before splitting.
    #[arg(long)]
    shuffle: bool,
    /// For clique:S, run the subset-eigenvalue test instead of the witness test.
    #[arg(long)]
    eigen: bool,
}

#[derive(Debug, Args)]
pub struct LowerboundArgs {
    /// connectivity, components:M, cycle, triangle_free, path_length:M,
    /// components_deletion:M, path_length_deletion:M, max_degree_bounded:S0,S1,
    /// max_degree_split:S0,S1, cliques:S, cycles:S.
    #[arg(long)]
    family: String,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Class sparsity.
    #[arg(long)]
    s: Option<usize>,
    /// Eigenvalue bound of the class (default 2).
    #[arg(long)]
    c: Option<f64>,
    /// l1 bound of the class (default 4; only range-checked).
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Also evaluate the chi-square bound at this signal strength.
    #[arg(long)]
    theta: Option<f64>,
    /// s1 or s2 for multi-edge dividers.
    #[arg(long, default_value = "s1")]
    setting: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    property: Option<String>,
    /// Comma-separated signal strengths.
    #[arg(long)]
    thetas: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    null: Option<String>,
    /// Scenario id, or `none` for a size-only sweep.
    #[arg(long)]
    alternative: Option<String>,
    /// sequential or shuffle.
    #[arg(long)]
    split: Option<String>,
    /// raw or debiased (default).
    #[arg(long)]
    bootstrap_scale: Option<String>,
    /// csv or records.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Context {
    file: ConfigFile,
    seed: u64,
    threads: Option<usize>,
    profile: Option<Profile>,
}

pub fn run(global: GlobalOpts, command: Command) -> Result<(), CliError> {
    let file = match &global.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let seed = file.pick(global.seed, "seed")?.unwrap_or(0);
    let threads: Option<usize> = file.pick(global.threads, "threads")?;
    if threads == Some(0) {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    if let Some(k) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let profile = file.pick(global.profile, "profile")?.map(|p: String| p.parse::<Profile>().map_err(CliError::Config)).transpose()?;
    let ctx = Context { file, seed, threads, profile };
    match command {
        Command::Sample(a) => sample(&ctx, a),
        Command::Estimate(a) => estimate(&ctx, a),
        Command::Test(a) => test(&ctx, a),
        Command::Lowerbound(a) => lowerbound(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
    }
}

fn model_err(e: ModelError) -> CliError {
    match e {
        ModelError::InvalidParams(_) | ModelError::InvalidTheta(_) | ModelError::FamilyRequirement { .. } | ModelError::Graph(_) => {
            CliError::Config(e.to_string())
        }
        other => CliError::Numerical(other.to_string()),
    }
}

fn estimation_err(e: EstimationError) -> CliError {
    match e {
        EstimationError::InvalidConfig(_)
        | EstimationError::TooFewSamples { .. }
        | EstimationError::EmptyGrid
        | EstimationError::IndexOutOfRange { .. }
        | EstimationError::Io(_) => CliError::Config(e.to_string()),
        other => CliError::Numerical(other.to_string()),
    }
}

fn witness_err(e: WitnessError) -> CliError {
    match e {
        WitnessError::TooFewObservations(_)
        | WitnessError::InvalidProperty { .. }
        | WitnessError::TooManySubsets { .. }
        | WitnessError::Split(_) => CliError::Config(e.to_string()),
        other => CliError::Numerical(other.to_string()),
    }
}

fn lowerbound_err(e: LowerBoundError) -> CliError {
    match e {
        LowerBoundError::TooLarge { .. } | LowerBoundError::InvalidArgument(_) => CliError::Numerical(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn harness_err(e: HarnessError) -> CliError {
    match e {
        HarnessError::Lambda(_) => CliError::Numerical(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn load_data(path: &Path) -> Result<Dataset, CliError> {
    Dataset::load(path).map_err(|e| CliError::Config(format!("loading {}: {e}", path.display())))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON values serialize"));
}

fn sample(ctx: &Context, a: SampleArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let d = f.pick(a.d, "d")?.ok_or_else(|| CliError::Config("sample needs --d".into()))?;
    let n = f.pick(a.n, "n")?.ok_or_else(|| CliError::Config("sample needs --n".into()))?;
    let theta = f.pick(a.theta, "theta")?.unwrap_or(0.0);
    let graph_spec = a.graph.unwrap_or_else(|| "chain".into());
    let graph = match graph_spec.parse::<Scenario>() {
        Ok(sc) => sc.draw(d, &mut seeds::child_rng(ctx.seed, &[0])),
        Err(_) => {
            let text = std::fs::read_to_string(&graph_spec)
                .map_err(|e| CliError::Config(format!("graph {graph_spec:?} is neither a scenario nor a readable file: {e}")))?;
            let g = Graph::parse_edge_list(&text).map_err(|e| CliError::Config(format!("{graph_spec}: {e}")))?;
            if g.d() != d {
                return Err(CliError::Config(format!("graph file has d = {}, expected {d}", g.d())));
            }
            g
        }
    };
    if let Some(p) = &a.graph_out {
        std::fs::write(p, graph.to_edge_list()).map_err(|e| CliError::Config(format!("writing {}: {e}", p.display())))?;
    }
    let model = PrecisionModel::new(graph, theta).map_err(model_err)?;
    let x = model.sample(n, seeds::derive(ctx.seed, &[1])).map_err(model_err)?;
    x.save(&a.out).map_err(|e| CliError::Config(e.to_string()))?;
    eprintln!("wrote {} x {} samples to {}", n, d, a.out.display());
    Ok(())
}

enum LambdaChoice {
    Fixed(f64),
    Rate(f64),
    Cv(usize),
}

fn parse_lambda(text: &str) -> Result<LambdaChoice, CliError> {
    let bad = |e: &dyn std::fmt::Display| CliError::Config(format!("lambda {text:?}: {e}"));
    if let Some(m) = text.strip_prefix("rate:") {
        Ok(LambdaChoice::Rate(m.trim().parse().map_err(|e| bad(&e))?))
    } else if let Some(k) = text.strip_prefix("cv:") {
        Ok(LambdaChoice::Cv(k.trim().parse().map_err(|e| bad(&e))?))
    } else {
        Ok(LambdaChoice::Fixed(text.trim().parse().map_err(|e| bad(&e))?))
    }
}

fn parse_solver(text: Option<String>) -> Result<ClimeSolver, CliError> {
    match text.as_deref().map(str::trim) {
        None | Some("simplex") => Ok(ClimeSolver::Simplex),
        Some("admm") => Ok(ClimeSolver::Admm),
        Some(other) => Err(CliError::Config(format!("unknown solver {other:?}; expected simplex or admm"))),
    }
}

/// λ for data `x`; rates use the row count of `x`.
fn resolve_lambda(ctx: &Context, choice: LambdaChoice, x: &Dataset, solver: ClimeSolver) -> Result<f64, CliError> {
    match choice {
        LambdaChoice::Fixed(l) => Ok(l),
        LambdaChoice::Rate(m) => Ok(m * ((x.d() as f64).ln() / x.n() as f64).sqrt()),
        LambdaChoice::Cv(folds) => {
            let grid = lambda_grid(x.d(), x.n(), &DEFAULT_GRID_MULTIPLIERS);
            let base = ClimeConfig::new(grid[0]).map_err(estimation_err)?.with_solver(solver);
            let cv = cv_select_lambda(x, &grid, folds, &base, seeds::derive(ctx.seed, &[3])).map_err(estimation_err)?;
            eprintln!("cross-validated lambda {} (risks {:?})", cv.lambda, cv.risks);
            Ok(cv.lambda)
        }
    }
}

fn estimate(ctx: &Context, a: EstimateArgs) -> Result<(), CliError> {
    let x = load_data(&a.data)?;
    let solver = parse_solver(ctx.file.pick(a.solver, "solver")?)?;
    let choice = parse_lambda(&ctx.file.pick(a.lambda, "lambda")?.unwrap_or_else(|| "rate:1.5".into()))?;
    let lambda = resolve_lambda(ctx, choice, &x, solver)?;
    let cfg = ClimeConfig::new(lambda).map_err(estimation_err)?.with_solver(solver);
    let est = clime(&empirical_covariance(&x), &cfg).map_err(estimation_err)?;
    if let Some(p) = &a.out {
        est.save(p).map_err(estimation_err)?;
    }
    print!("{}", est.record());
    Ok(())
}

fn test(ctx: &Context, a: TestArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let x = load_data(&a.data)?;
    let mut property: WitnessProperty = f
        .pick(a.property, "property")?
        .unwrap_or_else(|| "connectivity".into())
        .parse()
        .map_err(CliError::Config)?;
    let alpha = f.pick(a.alpha, "alpha")?.unwrap_or(0.05);
    if let Some(mu) = f.pick(a.mu, "mu")? {
        property = match property {
            WitnessProperty::Connectivity | WitnessProperty::ConnectivityAtLevel { .. } => {
                WitnessProperty::ConnectivityAtLevel { mu }
            }
            other => return Err(CliError::Config(format!("--mu applies to connectivity only, not {}", other.name()))),
        };
    }
    if a.eigen {
        let WitnessProperty::Clique { s } = property else {
            return Err(CliError::Config("--eigen needs --property clique:S".into()));
        };
        let t = clique_detection_test(&x, s, alpha).map_err(witness_err)?;
        print_json(&serde_json::to_value(&t).expect("plain struct"));
        return Ok(());
    }
    let solver = parse_solver(f.pick(a.solver, "solver")?)?;
    let choice = parse_lambda(&f.pick(a.lambda, "lambda")?.unwrap_or_else(|| "rate:1.5".into()))?;
    let lambda = resolve_lambda(ctx, choice, &x, solver)?;
    let split = if a.shuffle || f.raw("split") == Some("shuffle") {
        SplitMode::Shuffled { seed: seeds::derive(ctx.seed, &[4]) }
    } else {
        SplitMode::Sequential
    };
    let replications = f.pick(a.replications, "replications")?.unwrap_or(3000);
    let spec = WitnessTestSpec {
        property,
        clime: ClimeConfig::new(lambda).map_err(estimation_err)?.with_solver(solver),
        bootstrap: BootstrapConfig::new(replications, alpha, seeds::derive(ctx.seed, &[2]))
            .map_err(|e| CliError::Config(e.to_string()))?
            .with_scale(parse_scale(f.pick(a.bootstrap_scale, "bootstrap_scale")?)?),
        split,
    };
    let outcome = run_witness_test(&x, &spec).map_err(witness_err)?;
    let mut value = serde_json::to_value(&outcome).expect("plain struct");
    value["lambda"] = json!(lambda);
    print_json(&value);
    Ok(())
}

fn parse_scale(text: Option<String>) -> Result<BootstrapScale, CliError> {
    text.map_or(Ok(BootstrapScale::Debiased), |t| t.parse().map_err(CliError::Config))
}

fn parse_family(text: &str) -> Result<FamilyKind, CliError> {
    let (head, arg) = match text.split_once(':') {
        Some((h, a)) => (h.trim(), Some(a.trim())),
        None => (text.trim(), None),
    };
    let ints = || -> Result<Vec<usize>, CliError> {
        arg.ok_or_else(|| CliError::Config(format!("family {head} needs parameters")))?
            .split(',')
            .map(|v| v.trim().parse().map_err(|e| CliError::Config(format!("family {head}: {e}"))))
            .collect()
    };
    let one = || -> Result<usize, CliError> {
        match ints()?.as_slice() {
            [m] => Ok(*m),
            _ => Err(CliError::Config(format!("family {head} takes one parameter"))),
        }
    };
    let two = || -> Result<(usize, usize), CliError> {
        match ints()?.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(CliError::Config(format!("family {head} takes two parameters"))),
        }
    };
    Ok(match head {
        "connectivity" => FamilyKind::Connectivity,
        "components" => FamilyKind::Components { m: one()? },
        "cycle" => FamilyKind::Cycle,
        "triangle_free" => FamilyKind::TriangleFree,
        "path_length" => FamilyKind::PathLength { m: one()? },
        "components_deletion" => FamilyKind::ComponentsDeletion { m: one()? },
        "path_length_deletion" => FamilyKind::PathLengthDeletion { m: one()? },
        "max_degree_bounded" => {
            let (s0, s1) = two()?;
            FamilyKind::MaxDegreeBounded { s0, s1 }
        }
        "max_degree_split" => {
            let (s0, s1) = two()?;
            FamilyKind::MaxDegreeSplit { s0, s1 }
        }
        "cliques" => FamilyKind::Cliques { s: one()? },
        "cycles" => FamilyKind::Cycles { s: one()? },
        other => return Err(CliError::Config(format!("unknown family {other:?}"))),
    })
}

fn lowerbound(ctx: &Context, a: LowerboundArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let kind = parse_family(&a.family)?;
    let d = f.pick(a.d, "d")?.ok_or_else(|| CliError::Config("lowerbound needs --d".into()))?;
    let n = f.pick(a.n, "n")?.ok_or_else(|| CliError::Config("lowerbound needs --n".into()))?;
    let family = build_family(kind, d).map_err(model_err)?;
    let c = &family.divider;
    let s = f.pick(a.s, "s")?.unwrap_or_else(|| family.base().max_degree() + c.max_set_size() * 2 + 1);
    let params = ModelClassParams::new(s, f.pick(a.c, "c")?.unwrap_or(2.0), f.pick(a.l, "l")?.unwrap_or(4.0))
        .map_err(model_err)?;
    let kappa = f.pick(a.kappa, "kappa")?.unwrap_or(1.0);
    let stats = divider_stats(c).map_err(lowerbound_err)?;
    let report = threshold_report(c, n, &params, kappa).map_err(lowerbound_err)?;
    let mut value = json!({
        "family": format!("{kind:?}"),
        "d": d,
        "n": n,
        "divider_size": c.len(),
        "stats": stats,
        "threshold": report,
    });
    if let Some(theta) = f.pick(a.theta, "theta")? {
        let bound = if c.is_single_edge() {
            single_edge_chi2_bound(c, theta, n, &params)
        } else {
            let setting = match a.setting.trim() {
                "s1" => BoundSetting::S1,
                "s2" => BoundSetting::S2,
                other => return Err(CliError::Config(format!("unknown setting {other:?}; expected s1 or s2"))),
            };
            multi_edge_chi2_bound(c, theta, n, &params, setting)
        }
        .map_err(lowerbound_err)?;
        value["chi2"] = json!({ "theta": theta, "risk_lower_bound": bound });
    }
    print_json(&value);
    Ok(())
}

fn simulate(ctx: &Context, a: SimulateArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let property: WitnessProperty = f
        .pick(a.property, "property")?
        .unwrap_or_else(|| "connectivity".into())
        .parse()
        .map_err(CliError::Config)?;
    let null: Option<Scenario> = f.pick(a.null, "null")?.map(|s: String| s.parse().map_err(CliError::Config)).transpose()?;
    let alternative: Option<String> = f.pick(a.alternative, "alternative")?;
    let profile = ctx.profile.unwrap_or(Profile::Desk);
    let mut cfg = match SimulationConfig::from_profile(profile, property) {
        Ok(cfg) => cfg,
        Err(e) => {
            let (Some(null), Some(alt)) = (null, alternative.as_deref()) else {
                return Err(harness_err(e));
            };
            let mut cfg = SimulationConfig::from_profile(profile, WitnessProperty::Connectivity).map_err(harness_err)?;
            cfg.property = property;
            cfg.null = null;
            cfg.alternative = (alt != "none").then(|| alt.parse()).transpose().map_err(CliError::Config)?;
            cfg
        }
    };
    if let Some(null) = null {
        cfg.null = null;
    }
    if let Some(alt) = alternative.as_deref() {
        cfg.alternative = (alt != "none").then(|| alt.parse()).transpose().map_err(CliError::Config)?;
    }
    if let Some(list) = f.pick(a.thetas, "thetas")? {
        cfg.thetas = list
            .split(',')
            .filter(|t: &&str| !t.trim().is_empty())
            .map(|t| t.trim().parse().map_err(|e| CliError::Config(format!("theta {t:?}: {e}"))))
            .collect::<Result<_, _>>()?;
    }
    cfg.n = f.pick(a.n, "n")?.unwrap_or(cfg.n);
    cfg.d = f.pick(a.d, "d")?.unwrap_or(cfg.d);
    cfg.reps = f.pick(a.reps, "reps")?.unwrap_or(cfg.reps);
    cfg.replications = f.pick(a.replications, "replications")?.unwrap_or(cfg.replications);
    cfg.alpha = f.pick(a.alpha, "alpha")?.unwrap_or(cfg.alpha);
    if let Some(text) = f.pick(a.lambda, "lambda")? {
        cfg.lambda = match parse_lambda(&text)? {
            LambdaChoice::Fixed(l) => LambdaPolicy::Fixed(l),
            LambdaChoice::Rate(multiplier) => LambdaPolicy::Rate { multiplier },
            LambdaChoice::Cv(folds) => LambdaPolicy::CrossValidated { folds },
        };
    }
    cfg.split = match f.pick(a.split, "split")?.as_deref() {
        None | Some("sequential") => SplitMode::Sequential,
        Some("shuffle") => SplitMode::Shuffled { seed: seeds::derive(ctx.seed, &[4]) },
        Some(other) => return Err(CliError::Config(format!("unknown split {other:?}"))),
    };
    cfg.scale = parse_scale(f.pick(a.bootstrap_scale, "bootstrap_scale")?)?;
    cfg.seed = ctx.seed;
    cfg.threads = ctx.threads;
    let format: OutputFormat =
        f.pick(a.format, "format")?.unwrap_or_else(|| "csv".into()).parse().map_err(CliError::Config)?;
    let result = harness::run_simulation(&cfg).map_err(harness_err)?;
    let failures = result.failure_rate();
    if failures > 0.0 {
        eprintln!("warning: {:.2}% of repetitions failed", 100.0 * failures);
        for rep in result.repetitions.iter().filter(|r| r.error.is_some()).take(5) {
            eprintln!("  theta #{} rep {} {:?}: {}", rep.theta_index, rep.rep, rep.arm, rep.error.as_deref().unwrap_or(""));
        }
    }
    eprintln!("lambda {} elapsed {:.1}s", result.lambda, result.elapsed_seconds);
    harness::emit(&result, format, a.out.as_deref()).map_err(harness_err)
}
