//! `mpc-treedp`: generate instances, solve them on the simulated cluster,
//! check against the reference solvers and aggregate metrics.
//!
//! Exit codes: 0 success, 2 verification mismatch, 3 memory cap exceeded,
//! 4 usage error, 1 anything else.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use mpc_oracles::OracleError;
use mpc_treedp::geo::{closest_pair, metric_mst, sparse_mst, squared_euclidean, Edge, GeoError};
use mpc_treedp::kmedian::{solve_kmedian, KMedianError, Objective};
use mpc_treedp::linear::{solve_linear, LinearError, LinearKind};
use mpc_treedp::polylog::{PolylogError, PolylogProblem};
use mpc_treedp::sim::{ClusterConfig, Metrics, RoundMetrics, SimError};
use mpc_treedp::tree::{gen_points, gen_sparse_graph, gen_tree, EdgeListFile, PointSet, Tree, TreeError, TreeKind, WeightDist};

#[derive(Parser, Debug)]
#[command(name = "mpc-treedp", version, about = "Tree DP and MST solvers on a simulated MPC cluster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a generated tree, point set or sparse graph.
    Gen {
        /// Tree generator, or `points` / `sparse-graph`.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `none`, `unit` or `LO:HI`.
        #[arg(long, default_value = "none")]
        weights: String,
        /// Point dimension.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Coordinates are drawn from `[0, side)`; graph weights from `[1, side]`.
        #[arg(long, default_value_t = 1 << 20)]
        side: i64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one instance and print a JSON report line.
    Solve {
        #[arg(long)]
        problem: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 16)]
        machines: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Compare with the reference solver; exit 2 on mismatch.
        #[arg(long)]
        verify: bool,
        /// Write per-round metrics as JSON.
        #[arg(long)]
        metrics_out: Option<PathBuf>,
        /// Constant in the per-machine word budget.
        #[arg(long, default_value_t = 8.0)]
        cap_constant: f64,
        /// Size parameter of kst, kmedian and kcenter.
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Include wall-clock time in the report.
        #[arg(long)]
        timing: bool,
    },
    /// Aggregate metrics files per (problem, n, machines).
    Stats {
        #[arg(long, num_args = 1.., required = true)]
        metrics: Vec<PathBuf>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Sim(SimError),
    #[error("{0}")]
    Solver(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 4,
            CliError::Sim(SimError::CapExceeded { .. }) => 3,
            _ => 1,
        }
    }

    fn solver(e: impl std::fmt::Display, sim: Option<&SimError>) -> Self {
        match sim {
            Some(s) => CliError::Sim(s.clone()),
            None => CliError::Solver(e.to_string()),
        }
    }
}

impl From<PolylogError> for CliError {
    fn from(e: PolylogError) -> Self {
        CliError::solver(&e, e.sim())
    }
}

impl From<LinearError> for CliError {
    fn from(e: LinearError) -> Self {
        match e {
            LinearError::InfeasibleK { .. } => CliError::Usage(e.to_string()),
            _ => CliError::solver(&e, e.sim()),
        }
    }
}

impl From<GeoError> for CliError {
    fn from(e: GeoError) -> Self {
        match e {
            GeoError::Sim(s) => CliError::Sim(s),
            GeoError::TooManyMachines { .. } | GeoError::TooFewPoints(_) => CliError::Usage(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<KMedianError> for CliError {
    fn from(e: KMedianError) -> Self {
        match e {
            KMedianError::ZeroK => CliError::Usage(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct RunReport {
    problem: String,
    n: usize,
    m: usize,
    seed: u64,
    /// Integer answer; tree weights are multiplied by `scale`.
    answer: i128,
    scale: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<i128>,
    #[serde(rename = "match", skip_serializing_if = "Option::is_none")]
    matched: Option<bool>,
    rounds: usize,
    max_resident_words: usize,
    words_per_machine: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    edges: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    euclidean_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_ms: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MetricsFile {
    problem: String,
    n: usize,
    m: usize,
    seed: u64,
    rounds: usize,
    max_resident_words: usize,
    per_round: Vec<RoundMetrics>,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn gen(kind: &str, n: usize, seed: u64, weights: &str, dim: usize, side: i64) -> Result<String, CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    match kind {
        "points" => Ok(gen_points(n, dim, side.max(1), seed).emit()),
        "sparse-graph" => Ok(gen_sparse_graph(n, 3 * n, side.max(1) as u64, seed).emit()),
        _ => {
            let kind: TreeKind = kind.parse().map_err(CliError::Usage)?;
            let weights: WeightDist = weights.parse().map_err(CliError::Usage)?;
            Ok(gen_tree(kind, n, seed, weights).emit())
        }
    }
}

struct Outcome {
    report: RunReport,
    metrics: Metrics,
}

fn report(problem: &str, n: usize, config: &ClusterConfig, answer: i128, scale: i64, metrics: &Metrics) -> RunReport {
    RunReport {
        problem: problem.to_string(),
        n,
        m: config.machines,
        seed: config.seed,
        answer,
        scale,
        oracle: None,
        matched: None,
        rounds: metrics.rounds,
        max_resident_words: metrics.max_resident(),
        words_per_machine: config.words_per_machine,
        edges: None,
        euclidean_weight: None,
        wall_ms: None,
    }
}

fn total(edges: &[Edge]) -> i128 {
    edges.iter().map(|e| e.weight as i128).sum()
}

struct SolveArgs<'a> {
    problem: &'a str,
    input: &'a Path,
    machines: usize,
    seed: u64,
    verify: bool,
    cap_constant: f64,
    k: usize,
}

fn solve(a: &SolveArgs) -> Result<Outcome, CliError> {
    let text = read(a.input)?;
    let usage = |e: mpc_treedp::sim::SimError| CliError::Usage(e.to_string());
    if let Some(p) = PolylogProblem::from_name(a.problem) {
        let tree = Tree::parse(&text)?;
        let config = ClusterConfig::polylog(tree.len(), a.machines, a.cap_constant, a.seed).map_err(usage)?;
        let r = p.solve(&tree, &config)?;
        let mut rep = report(a.problem, tree.len(), &config, r.answer as i128, r.scale, &r.metrics);
        if a.verify {
            rep.oracle = Some(mpc_oracles::solve(a.problem, &tree, a.k)?.value as i128);
        }
        return Ok(Outcome { report: rep, metrics: r.metrics });
    }
    if let Some(kind) = LinearKind::from_name(a.problem) {
        let tree = Tree::parse(&text)?;
        let config = ClusterConfig::linear(tree.len(), a.machines, a.cap_constant, a.seed).map_err(usage)?;
        let r = solve_linear(kind, &tree, a.k, &config)?;
        let mut rep = report(a.problem, tree.len(), &config, r.answer as i128, r.scale, &r.metrics);
        if a.verify {
            rep.oracle = Some(mpc_oracles::solve(a.problem, &tree, a.k)?.value as i128);
        }
        return Ok(Outcome { report: rep, metrics: r.metrics });
    }
    match a.problem {
        "kmedian" | "kcenter" => {
            let tree = Tree::parse(&text)?;
            let obj = if a.problem == "kmedian" { Objective::Median } else { Objective::Center };
            let config = ClusterConfig::polylog(tree.len(), a.machines, a.cap_constant, a.seed).map_err(usage)?;
            let (v, scale) = solve_kmedian(&tree, a.k, obj, a.machines, a.seed)?;
            let metrics = Metrics::default();
            let mut rep = report(a.problem, tree.len(), &config, v as i128, scale, &metrics);
            if a.verify {
                rep.oracle = Some(mpc_oracles::solve(a.problem, &tree, a.k)?.value as i128);
            }
            Ok(Outcome { report: rep, metrics })
        }
        "mst-metric" | "closest-pair" => {
            let points = PointSet::parse(&text)?;
            let n = points.len();
            let config = ClusterConfig::linear(n, a.machines, a.cap_constant, a.seed).map_err(usage)?;
            if a.problem == "closest-pair" {
                let r = closest_pair(&points, squared_euclidean, &config)?;
                let mut rep = report(a.problem, n, &config, r.distance as i128, 1, &r.metrics);
                if a.verify {
                    rep.oracle = mpc_oracles::geo::closest_pair(&points, squared_euclidean).map(|p| p.2 as i128);
                }
                return Ok(Outcome { report: rep, metrics: r.metrics });
            }
            let r = metric_mst(&points, squared_euclidean, &config)?;
            let mut rep = report(a.problem, n, &config, total(&r.edges), 1, &r.metrics);
            rep.edges = Some(r.edges.len());
            rep.euclidean_weight = Some(r.euclidean_weight());
            if a.verify {
                rep.oracle = Some(total(&mpc_oracles::geo::complete_graph_mst(&points, squared_euclidean)));
            }
            Ok(Outcome { report: rep, metrics: r.metrics })
        }
        "mst-sparse" => {
            let g = EdgeListFile::parse(&text)?;
            let edges: Vec<Edge> =
                g.edges.iter().enumerate().map(|(i, &(u, v, w))| Edge { u, v, weight: w, id: i as u64 }).collect();
            let config = ClusterConfig::linear(g.n, a.machines, a.cap_constant, a.seed).map_err(usage)?;
            let r = sparse_mst(g.n, &edges, &config)?;
            let mut rep = report(a.problem, g.n, &config, total(&r.edges), 1, &r.metrics);
            rep.edges = Some(r.edges.len());
            if a.verify {
                rep.oracle = Some(total(&mpc_oracles::geo::kruskal(g.n, &edges)));
            }
            Ok(Outcome { report: rep, metrics: r.metrics })
        }
        other => Err(CliError::Usage(format!(
            "unknown problem {other:?}; expected one of matching, mis, vc, longest-path, dominating-set, bisection, kst, \
             kmedian, kcenter, mst-metric, mst-sparse, closest-pair"
        ))),
    }
}

/// Nearest-rank percentile of sorted `xs`.
fn percentile(xs: &[usize], p: f64) -> usize {
    let rank = ((p * xs.len() as f64).ceil() as usize).clamp(1, xs.len());
    xs[rank - 1]
}

#[derive(Serialize)]
struct Summary {
    max: usize,
    median: usize,
    p95: usize,
}

impl Summary {
    fn of(mut xs: Vec<usize>) -> Self {
        xs.sort_unstable();
        Summary { max: *xs.last().expect("non-empty"), median: percentile(&xs, 0.5), p95: percentile(&xs, 0.95) }
    }
}

#[derive(Serialize)]
struct StatsLine {
    problem: String,
    n: usize,
    m: usize,
    samples: usize,
    rounds: Summary,
    max_resident_words: Summary,
}

fn stats(files: &[PathBuf]) -> Result<String, CliError> {
    let mut groups: BTreeMap<(String, usize, usize), Vec<MetricsFile>> = BTreeMap::new();
    for f in files {
        let mf: MetricsFile = serde_json::from_str(&read(f)?)?;
        groups.entry((mf.problem.clone(), mf.n, mf.m)).or_default().push(mf);
    }
    let mut out = String::new();
    for ((problem, n, m), runs) in groups {
        let line = StatsLine {
            problem,
            n,
            m,
            samples: runs.len(),
            rounds: Summary::of(runs.iter().map(|r| r.rounds).collect()),
            max_resident_words: Summary::of(runs.iter().map(|r| r.max_resident_words).collect()),
        };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Gen { kind, n, seed, weights, dim, side, out } => {
            let text = gen(&kind, n, seed, &weights, dim, side)?;
            match out {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Solve { problem, input, machines, seed, verify, metrics_out, cap_constant, k, timing } => {
            let start = Instant::now();
            let args = SolveArgs { problem: &problem, input: &input, machines, seed, verify, cap_constant, k };
            let Outcome { mut report, metrics } = solve(&args)?;
            if timing {
                report.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            report.matched = report.oracle.map(|o| o == report.answer);
            if let Some(path) = metrics_out {
                let mf = MetricsFile {
                    problem: report.problem.clone(),
                    n: report.n,
                    m: report.m,
                    seed: report.seed,
                    rounds: metrics.rounds,
                    max_resident_words: metrics.max_resident(),
                    per_round: metrics.per_round.clone(),
                };
                write(&path, &(serde_json::to_string(&mf)? + "\n"))?;
            }
            println!("{}", serde_json::to_string(&report)?);
            Ok(if report.matched == Some(false) { 2 } else { 0 })
        }
        Command::Stats { metrics } => {
            print!("{}", stats(&metrics)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
