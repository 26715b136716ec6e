//! Command-line front end. Every command builds a report, serializes it as
//! canonical JSON or a CSV projection, and is reproducible from its flags.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphKind};
use crate::homogeneous::{
    d_curve, first_below, fit_tail_log_slope, spectral_rate, stationary_power, verify_lazy_slower, Distribution,
    LazyComparison, PowerOptions,
};
use crate::inhomogeneous::{dim_check, necessary_condition_check, ChainSchedule, DimReport, NecessaryConditionReport};
use crate::mcre::{compare, degree_law_check, monte_carlo_expected, EnvironmentSpec, NodeChiSquare};
use crate::operators::{attention_operator, dropedge_expected, lazy_walk, simple_rw, EdgeLogits, StochasticMatrix};
use crate::oversmoothing::{
    layer_metrics, min_layer_gap, node_std_metric, propagate_features, rt_penalty, FeatureMatrix, LayerMetrics,
    MessagePassing, Trajectory,
};
use crate::report::{to_canonical_json, Table};
use crate::trainer::{train, TrainReport, TwoCommunityFixture};

#[derive(Debug, Parser)]
#[command(
    name = "gnn-markov",
    version,
    about = "Markov-chain diagnostics for message-passing GNNs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary distribution, d(t) curve, mixing time and rate of one operator.
    Analyze(AnalyzeArgs),
    /// Monte-Carlo check of the expected DropEdge operator.
    Dropedge(DropedgeArgs),
    /// Time-inhomogeneous attention schedule diagnostics.
    Inhomo(InhomoArgs),
    /// Layer-by-layer over-smoothing metrics of feature propagation.
    Oversmooth(OversmoothArgs),
    /// Train attention logits on the two-community fixture.
    TrainDemo(TrainArgs),
}

impl Command {
    pub fn output(&self) -> &OutputArgs {
        match self {
            Command::Analyze(a) => &a.output,
            Command::Dropedge(a) => &a.output,
            Command::Inhomo(a) => &a.output,
            Command::Oversmooth(a) => &a.output,
            Command::TrainDemo(a) => &a.output,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Generator `kind:n[:p]`, e.g. `complete:3`, `cycle:5`, `er:20:0.3`.
    #[arg(long, conflicts_with = "edges")]
    pub r#gen: Option<String>,
    /// Edge-list file.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Add a self-loop to every node.
    #[arg(long)]
    pub loops: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// `rw`, `lazy:γ`, `gcn`, `dropedge` or `att`.
    #[arg(long, default_value = "rw")]
    pub op: String,
    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,
    /// Power-iteration tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub tmax: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DropedgeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InhomoArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// `const`, `oscillate`, `decay` or `file:path`.
    #[arg(long, default_value = "oscillate")]
    pub schedule: String,
    #[arg(long, default_value_t = 50)]
    pub layers: usize,
    /// Drift and Dobrushin tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Tail window for classification.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OversmoothArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value = "rw")]
    pub op: String,
    #[arg(long, default_value_t = 50)]
    pub layers: usize,
    #[arg(long, default_value_t = 4)]
    pub features: usize,
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parses `args` (without the program name), runs the command and returns
/// the serialized report. Writes it to `--out` when given.
pub fn execute<I, S>(args: I) -> Result<String>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("gnn-markov")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    run(&cli)
}

pub fn run(cli: &Cli) -> Result<String> {
    let text = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a)?,
        Command::Dropedge(a) => cmd_dropedge(a)?,
        Command::Inhomo(a) => cmd_inhomo(a)?,
        Command::Oversmooth(a) => cmd_oversmooth(a)?,
        Command::TrainDemo(a) => cmd_train_demo(a)?,
    };
    if let Some(path) = &cli.command.output().out {
        std::fs::write(path, &text)?;
    }
    Ok(text)
}

fn emit<T: Serialize>(report: &T, table: impl FnOnce() -> Table, format: Format) -> Result<String> {
    match format {
        Format::Json => to_canonical_json(report),
        Format::Csv => table().to_csv(),
    }
}

/// Resolves `--gen`/`--edges`, falling back to `default` when neither is set.
pub fn load_graph(args: &GraphArgs, seed: u64, default: Option<&str>) -> Result<Arc<Graph>> {
    let g = match (&args.r#gen, &args.edges) {
        (Some(spec), None) => parse_generator(spec, seed)?,
        (None, Some(path)) => Graph::from_edge_list(&std::fs::read_to_string(path)?)?,
        (None, None) => match default {
            Some(spec) => parse_generator(spec, seed)?,
            None => return Err(Error::InvalidArgument("one of --gen or --edges is required".into())),
        },
        (Some(_), Some(_)) => return Err(Error::InvalidArgument("--gen and --edges are exclusive".into())),
    };
    let g = if args.loops && !g.has_self_loops() {
        g.with_self_loops()?
    } else {
        g
    };
    Ok(Arc::new(g))
}

/// `kind:n` or `er:n:p`; Erdős–Rényi graphs draw from `seed`.
pub fn parse_generator(spec: &str, seed: u64) -> Result<Graph> {
    let mut parts = spec.split(':');
    let kind: GraphKind = parts.next().unwrap_or_default().parse()?;
    let n: usize = parts
        .next()
        .ok_or(Error::MissingParameter("node count"))?
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad node count in `{spec}`")))?;
    let p = parts
        .next()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad probability in `{spec}`")))
        })
        .transpose()?;
    if parts.next().is_some() {
        return Err(Error::InvalidArgument(format!("too many fields in `{spec}`")));
    }
    Graph::generate(kind, n, p, Some(seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorSpec {
    RandomWalk,
    Lazy(f64),
    Gcn,
    DropEdge,
    Attention,
}

impl std::str::FromStr for OperatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("lazy", g)) => g
                .parse()
                .map(OperatorSpec::Lazy)
                .map_err(|_| Error::InvalidArgument(format!("bad laziness in `{s}`"))),
            None if s == "rw" => Ok(OperatorSpec::RandomWalk),
            None if s == "lazy" => Err(Error::MissingParameter("laziness γ in lazy:γ")),
            None if s == "gcn" => Ok(OperatorSpec::Gcn),
            None if s == "dropedge" => Ok(OperatorSpec::DropEdge),
            None if s == "att" => Ok(OperatorSpec::Attention),
            _ => Err(Error::InvalidArgument(format!("unknown operator `{s}`"))),
        }
    }
}

impl OperatorSpec {
    fn name(&self) -> String {
        match self {
            OperatorSpec::RandomWalk => "rw".into(),
            OperatorSpec::Lazy(g) => format!("lazy:{g}"),
            OperatorSpec::Gcn => "gcn".into(),
            OperatorSpec::DropEdge => "dropedge".into(),
            OperatorSpec::Attention => "att".into(),
        }
    }

    /// The row-stochastic chain behind the operator. The GCN operator is
    /// similar to `D̃⁻¹Ã`, which shares its spectrum and is used here.
    /// Attention draws symmetric logits in `[−1, 1]` from `seed`.
    fn chain(&self, g: &Arc<Graph>, seed: u64) -> Result<StochasticMatrix> {
        match self {
            OperatorSpec::RandomWalk => simple_rw(g),
            OperatorSpec::Lazy(gamma) => lazy_walk(g, *gamma),
            OperatorSpec::Gcn => {
                if !g.has_self_loops() {
                    return Err(Error::MissingSelfLoops);
                }
                simple_rw(g)
            }
            OperatorSpec::DropEdge => dropedge_expected(g),
            OperatorSpec::Attention => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                attention_operator(g, &EdgeLogits::random_symmetric(g, 1.0, &mut rng))
            }
        }
    }
}

#[derive(Debug, Serialize)]
struct LazySummary {
    gamma: f64,
    t_mix_rw: Option<usize>,
    t_mix_lazy: Option<usize>,
    /// Worst-row TV of the lazy walk dominates the plain walk at every step.
    holds: bool,
    first_violation: Option<usize>,
}

impl LazySummary {
    fn new(cmp: &LazyComparison, eps: f64) -> Self {
        let rw: Vec<f64> = cmp.steps.iter().map(|s| s.rw).collect();
        let lazy: Vec<f64> = cmp.steps.iter().map(|s| s.lazy).collect();
        LazySummary {
            gamma: cmp.gamma,
            t_mix_rw: first_below(&rw, eps),
            t_mix_lazy: first_below(&lazy, eps),
            holds: cmp.all_hold(),
            first_violation: cmp.first_violation(),
        }
    }
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    operator: String,
    nodes: usize,
    eps: f64,
    pi: Distribution,
    d_curve: Vec<f64>,
    t_mix: Option<usize>,
    /// Second-largest eigenvalue modulus of the chain.
    rate_alpha: f64,
    /// `exp` of the fitted tail slope of `log d(t)`.
    fitted_rate: Option<f64>,
    lazy_comparison: LazySummary,
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<String> {
    let seed = args.output.seed;
    let g = load_graph(&args.graph, seed, None)?;
    let op: OperatorSpec = args.op.parse()?;
    if !(args.eps > 0.0 && args.eps < 1.0) {
        return Err(Error::EpsOutOfRange(args.eps));
    }
    let p = op.chain(&g, seed)?;
    let pi = stationary_power(
        &p,
        PowerOptions {
            tol: args.tol,
            ..PowerOptions::default()
        },
    )?;
    let curve = d_curve(&p, &pi, args.tmax)?;
    let gamma = match op {
        OperatorSpec::Lazy(gamma) => gamma,
        _ => 0.5,
    };
    let lazy = verify_lazy_slower(&g, gamma, args.tmax)?;
    let report = AnalyzeReport {
        operator: op.name(),
        nodes: g.node_count(),
        eps: args.eps,
        t_mix: first_below(&curve, args.eps),
        rate_alpha: spectral_rate(&p),
        fitted_rate: fit_tail_log_slope(&curve).map(f64::exp),
        lazy_comparison: LazySummary::new(&lazy, args.eps),
        pi,
        d_curve: curve,
    };
    emit(
        &report,
        || {
            let mut t = Table::new(&["t", "d", "d_rw", "d_lazy"]);
            for (i, d) in report.d_curve.iter().enumerate() {
                let step = &lazy.steps[i];
                t.push(vec![Some((i + 1) as f64), Some(*d), Some(step.rw), Some(step.lazy)]);
            }
            t
        },
        args.output.format,
    )
}

#[derive(Debug, Serialize)]
struct DropedgeReport {
    nodes: usize,
    samples: usize,
    seed: u64,
    drop_probability: f64,
    max_abs_error: f64,
    max_se_ratio: f64,
    analytic: Vec<Vec<f64>>,
    estimate: Vec<Vec<f64>>,
    std_error: Vec<Vec<f64>>,
    degree_law: Option<Vec<NodeChiSquare>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn cmd_dropedge(args: &DropedgeArgs) -> Result<String> {
    let seed = args.output.seed;
    let g = load_graph(&args.graph, seed, None)?;
    let g = if g.has_self_loops() {
        g
    } else {
        Arc::new(g.with_self_loops()?)
    };
    let spec = EnvironmentSpec::new(g.clone(), seed)?;
    let analytic = spec.analytic_expectation()?;
    let estimate = monte_carlo_expected(&spec, args.samples)?;
    let discrepancy = compare(&estimate, analytic.entries());
    let degree_law = if args.samples >= 1000 {
        Some(degree_law_check(&spec, args.samples.min(20_000), 0.01)?)
    } else {
        None
    };
    let report = DropedgeReport {
        nodes: g.node_count(),
        samples: args.samples,
        seed,
        drop_probability: spec.drop_probability(),
        max_abs_error: discrepancy.max_abs_error,
        max_se_ratio: discrepancy.max_se_ratio,
        analytic: rows(analytic.entries()),
        estimate: rows(&estimate.mean),
        std_error: rows(&estimate.std_error),
        degree_law,
    };
    emit(
        &report,
        || {
            let mut t = Table::new(&["u", "v", "analytic", "estimate", "std_error"]);
            for (u, v) in g.directed_edges() {
                t.push(vec![
                    Some(u as f64),
                    Some(v as f64),
                    Some(analytic.get(u, v)),
                    Some(estimate.mean[(u, v)]),
                    Some(estimate.std_error[(u, v)]),
                ]);
            }
            t
        },
        args.output.format,
    )
}

/// Per-layer logit maps keyed `"u,v"`; a missing direction falls back to
/// the reverse key.
pub fn parse_schedule_file(g: &Graph, text: &str) -> Result<Vec<EdgeLogits>> {
    let layers: Vec<BTreeMap<String, f64>> = serde_json::from_str(text)?;
    layers
        .iter()
        .map(|map| {
            let mut logits = EdgeLogits::new();
            for (u, v) in g.directed_edges() {
                let x = map
                    .get(&format!("{u},{v}"))
                    .or_else(|| map.get(&format!("{v},{u}")))
                    .ok_or(Error::MissingLogit(u, v))?;
                logits.set(u, v, *x);
            }
            Ok(logits)
        })
        .collect()
}

pub fn build_schedule(g: &Arc<Graph>, spec: &str, layers: usize) -> Result<ChainSchedule> {
    match spec.split_once(':') {
        Some(("file", path)) => ChainSchedule::attention(g, parse_schedule_file(g, &std::fs::read_to_string(path)?)?),
        None if spec == "const" => ChainSchedule::constant(&simple_rw(g)?, layers),
        None if spec == "oscillate" => ChainSchedule::oscillating(g, layers, 2.0),
        None if spec == "decay" => ChainSchedule::decaying(g, layers, 3.0, 0.5),
        _ => Err(Error::InvalidArgument(format!("unknown schedule `{spec}`"))),
    }
}

#[derive(Debug, Serialize)]
struct InhomoReport {
    schedule: String,
    layers: usize,
    dim: DimReport,
    necessary_condition: NecessaryConditionReport,
}

pub fn cmd_inhomo(args: &InhomoArgs) -> Result<String> {
    let g = load_graph(&args.graph, args.output.seed, Some("complete:3"))?;
    let schedule = build_schedule(&g, &args.schedule, args.layers)?;
    let dim = dim_check(&schedule, args.tol, args.window)?;
    let necessary = necessary_condition_check(
        &schedule,
        &Distribution::point_mass(g.node_count(), 0),
        args.window,
        args.tol,
    )?;
    let report = InhomoReport {
        schedule: args.schedule.clone(),
        layers: schedule.len(),
        dim,
        necessary_condition: necessary,
    };
    emit(
        &report,
        || {
            let mut t = Table::new(&["l", "pi_drift", "gap", "c_product_from_1"]);
            let from_one: Vec<f64> = report
                .dim
                .dobrushin_products
                .iter()
                .filter(|s| s.k == 1)
                .map(|s| s.coefficient)
                .collect();
            for l in 1..=report.layers {
                t.push(vec![
                    Some(l as f64),
                    report.dim.drifts.get(l - 1).copied(),
                    report.dim.gaps.get(l - 1).copied(),
                    from_one.get(l - 1).copied(),
                ]);
            }
            t
        },
        args.output.format,
    )
}

#[derive(Debug, Serialize)]
struct OversmoothReport {
    operator: String,
    layers: usize,
    features: usize,
    threshold: f64,
    node_std_final: f64,
    min_layer_gap: Option<f64>,
    rt_penalty: Option<f64>,
    metrics: Vec<LayerMetrics>,
}

pub fn cmd_oversmooth(args: &OversmoothArgs) -> Result<String> {
    let seed = args.output.seed;
    let g = load_graph(&args.graph, seed, Some("complete:3"))?;
    let op: OperatorSpec = args.op.parse()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h0 = FeatureMatrix::new(
        DMatrix::from_fn(g.node_count(), args.features, |_, _| rng.random_range(-1.0..1.0)),
        0,
    )?;
    let traj = match op {
        OperatorSpec::Gcn => propagate(&crate::operators::gcn_operator(&g)?, &h0, args.layers)?,
        OperatorSpec::Attention => {
            let logits = (0..args.layers)
                .map(|_| EdgeLogits::random_directed(&g, 1.0, &mut rng))
                .collect();
            propagate(&ChainSchedule::attention(&g, logits)?, &h0, args.layers)?
        }
        _ => propagate(&op.chain(&g, seed)?, &h0, args.layers)?,
    };
    let steps = traj.depth() >= 1;
    let report = OversmoothReport {
        operator: op.name(),
        layers: args.layers,
        features: args.features,
        threshold: args.threshold,
        node_std_final: node_std_metric(traj.last())?,
        min_layer_gap: if steps { Some(min_layer_gap(&traj)?) } else { None },
        rt_penalty: if steps {
            Some(rt_penalty(&traj, args.threshold)?)
        } else {
            None
        },
        metrics: layer_metrics(&traj)?,
    };
    emit(
        &report,
        || {
            let mut t = Table::new(&["l", "node_std", "min_gap", "rt_running_mean"]);
            for m in &report.metrics {
                t.push(vec![Some(m.l as f64), Some(m.node_std), m.min_gap, m.rt_running_mean]);
            }
            t
        },
        args.output.format,
    )
}

fn propagate(op: &impl MessagePassing, h0: &FeatureMatrix, depth: usize) -> Result<Trajectory> {
    propagate_features(op, h0, depth)
}

#[derive(Debug, Serialize)]
struct TrainDemoReport {
    lambda: f64,
    threshold: f64,
    seed: u64,
    learning_rate: f64,
    epochs: usize,
    layers: usize,
    #[serde(flatten)]
    result: TrainReport,
}

pub fn cmd_train_demo(args: &TrainArgs) -> Result<String> {
    let seed = args.output.seed;
    let fixture = TwoCommunityFixture::new(seed)?;
    let mut config = fixture.config(args.lambda, seed);
    config.threshold = args.threshold;
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    if let Some(lr) = args.lr {
        config.learning_rate = lr;
    }
    if let Some(l) = args.layers {
        config.depth = l;
    }
    let outcome = train(&fixture.graph, &fixture.h0, &config)?;
    let report = TrainDemoReport {
        lambda: config.rt_weight,
        threshold: config.threshold,
        seed,
        learning_rate: config.learning_rate,
        epochs: config.epochs,
        layers: config.depth,
        result: outcome.report,
    };
    emit(
        &report,
        || {
            let mut t = Table::new(&["epoch", "loss"]);
            for (i, l) in report.result.loss_curve.iter().enumerate() {
                t.push(vec![Some(i as f64), Some(*l)]);
            }
            t
        },
        args.output.format,
    )
}
