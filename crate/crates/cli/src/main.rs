//! `dynsparse`: instance generation, script replay against the oracles,
//! `r` sweeps and r-division audits.
//!
//! Exit codes: 0 success, 2 malformed input (graph, script or command line),
//! 3 invariant violation, 1 any other failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dynsparse_core::gen::{edge_pool_instance, grid, random_forest, random_matrix, random_planar, random_script, PlanarInstance, QueryKind};
use dynsparse_core::graph::{parse_graph, write_graph};
use dynsparse_core::maxflow::CutStrategy;
use dynsparse_core::oracles::{bench_csv, bench_sweep, replay_compare, ReplayMode, ReplayParams, ReplayReport};
use dynsparse_core::partition::{build_rdivision, validate_rdivision, DivisionParams};
use dynsparse_core::script::{parse_script, write_script, Op, ScriptLine};
use dynsparse_core::subgraph::write_matrix;
use dynsparse_core::{Error, Mode, Result, WeightedGraph};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "dynsparse", version, about = "Dynamic vertex sparsifiers over r-divisions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated graph (and optionally a script) or an OMv matrix.
    Gen(GenArgs),
    /// Replay a script and print one JSON line per query.
    Run(RunArgs),
    /// Replay one script for every r in a sweep and print CSV.
    Bench(BenchArgs),
    /// Build an r-division, apply a script's updates and validate it.
    Audit(AuditArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Grid,
    RandomPlanar,
    Omv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Eflow,
    Maxflow,
    Apsp,
    Subgraph,
}

impl ModeArg {
    fn replay(self) -> ReplayMode {
        match self {
            ModeArg::Eflow => ReplayMode::Eflow,
            ModeArg::Maxflow => ReplayMode::Maxflow,
            ModeArg::Apsp => ReplayMode::Apsp,
            ModeArg::Subgraph => ReplayMode::Subgraph,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Identity,
    ContractExact,
}

#[derive(Clone, Copy, ValueEnum)]
enum QueryKindArg {
    Energy,
    Flow,
    Distance,
}

impl QueryKindArg {
    fn kind(self) -> QueryKind {
        match self {
            QueryKindArg::Energy => QueryKind::Energy,
            QueryKindArg::Flow => QueryKind::Flow,
            QueryKindArg::Distance => QueryKind::Distance,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    kind: GenKind,
    /// Vertex count (grid, random-planar) or matrix side (omv).
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a random update/query script over the instance's edge pool.
    #[arg(long)]
    script_out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    updates: usize,
    #[arg(long, default_value_t = 20)]
    queries: usize,
    #[arg(long, value_enum, default_value_t = QueryKindArg::Energy)]
    query_kind: QueryKindArg,
    /// Probability of deleting each triangulation edge (random-planar).
    #[arg(long, default_value_t = 0.3)]
    deletion: f64,
    /// Generate a spanning forest and keep scripts acyclic (random-planar).
    #[arg(long)]
    forest: bool,
    /// Probability of a 1 entry (omv).
    #[arg(long, default_value_t = 0.3)]
    density: f64,
}

/// Structure parameters shared by `run` and `bench`.
#[derive(Args)]
struct Tuning {
    /// Region size; defaults to round(n^(2/3)).
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    /// Spanner parameter for apsp mode (stretch 2q - 1).
    #[arg(long, default_value_t = 1)]
    q: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::Identity)]
    strategy: StrategyArg,
    /// Use the deamortized two-copy scheduler.
    #[arg(long)]
    worst_case: bool,
    /// Re-validate the division after every update and reject insertions
    /// beyond the planar edge bound.
    #[arg(long)]
    audit: bool,
    /// Skip the oracle comparison.
    #[arg(long)]
    no_oracle: bool,
}

impl Tuning {
    fn params(&self, mode: ModeArg, n: usize, seed: u64) -> ReplayParams {
        let mut p = ReplayParams::new(mode.replay(), self.r.unwrap_or_else(|| default_r(n)), seed);
        p.eps = self.eps;
        p.q = self.q;
        p.strategy = match self.strategy {
            StrategyArg::Identity => CutStrategy::Identity,
            StrategyArg::ContractExact => CutStrategy::ContractExact,
        };
        p.worst_case = self.worst_case;
        p.audit = self.audit;
        p.oracle = !self.no_oracle;
        p
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    script: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replay once per seed; output lines then carry a `seed` field.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Worker threads for independent seeds.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Include per-query wall time in microseconds.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Comma-separated region sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    rs: Vec<usize>,
    /// Script to replay; generated from the graph's own edges when absent.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    updates: usize,
    #[arg(long, default_value_t = 40)]
    queries: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tuning: Tuning,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Region size; defaults to round(n^(2/3)).
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Updates to apply, validating after each one.
    #[arg(long)]
    script: Option<PathBuf>,
}

fn default_r(n: usize) -> usize {
    ((n as f64).powf(2.0 / 3.0).round() as usize).max(1)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_graph(path: &Path, mode: Mode) -> Result<WeightedGraph> {
    parse_graph(&read(path)?, mode)
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let instance = |inst: PlanarInstance, keep_forest: bool| -> Result<()> {
        emit(a.out.as_deref(), &write_graph(&inst.graph))?;
        if let Some(path) = &a.script_out {
            let ops = random_script(&inst, a.updates, a.queries, a.query_kind.kind(), keep_forest, a.seed.wrapping_add(1));
            emit(Some(path), &write_script(&ops))?;
        }
        Ok(())
    };
    match a.kind {
        GenKind::Grid => instance(edge_pool_instance(grid(a.size, Mode::Conductance)), false),
        GenKind::RandomPlanar if a.forest => instance(random_forest(a.size, Mode::Conductance, a.seed)?, true),
        GenKind::RandomPlanar => instance(random_planar(a.size, a.deletion, Mode::Conductance, a.seed)?, false),
        GenKind::Omv => {
            if a.size == 0 {
                return Err(Error::InvalidParameter("omv matrix side must be positive".into()));
            }
            emit(a.out.as_deref(), &write_matrix(&random_matrix(a.size, a.size, a.density, a.seed)))
        }
    }
}

fn summary(seed: u64, rep: &ReplayReport) -> String {
    let mut s = format!(
        "seed {seed}: {} queries, {} checked, {} outside guarantee ({:.4})",
        rep.records.len(),
        rep.checked,
        rep.failures,
        rep.failure_rate()
    );
    if let Some((max, budget)) = rep.work {
        s.push_str(&format!(", max work {max} / budget {budget}"));
    }
    s
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let mode = a.mode.replay();
    let g = load_graph(&a.graph, mode.graph_mode())?;
    let script = parse_script(&read(&a.script)?)?;
    if a.seeds.is_empty() {
        let rep = replay_compare(&g, &script, &a.tuning.params(a.mode, g.n(), a.seed))?;
        print!("{}", rep.json_lines(a.timing));
        eprintln!("{}", summary(a.seed, &rep));
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let reports: Vec<Result<ReplayReport>> = pool.install(|| {
        a.seeds
            .par_iter()
            .map(|&seed| replay_compare(&g, &script, &a.tuning.params(a.mode, g.n(), seed)))
            .collect()
    });
    for (&seed, rep) in a.seeds.iter().zip(reports) {
        let rep = rep?;
        for line in rep.json_lines(a.timing).lines() {
            let mut v: serde_json::Value = serde_json::from_str(line).expect("records serialize to JSON objects");
            v["seed"] = serde_json::json!(seed);
            println!("{v}");
        }
        eprintln!("{}", summary(seed, &rep));
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let mode = a.mode.replay();
    let kind = match mode {
        ReplayMode::Eflow => QueryKind::Energy,
        ReplayMode::Maxflow => QueryKind::Flow,
        ReplayMode::Apsp => QueryKind::Distance,
        ReplayMode::Subgraph => {
            return Err(Error::InvalidParameter("bench supports eflow, maxflow and apsp".into()));
        }
    };
    let g = load_graph(&a.graph, mode.graph_mode())?;
    let script: Vec<ScriptLine> = match &a.script {
        Some(p) => parse_script(&read(p)?)?,
        None => {
            let ops = random_script(&edge_pool_instance(g.clone()), a.updates, a.queries, kind, false, a.seed);
            parse_script(&write_script(&ops))?
        }
    };
    let rows = bench_sweep(&g, &script, &a.rs, &a.tuning.params(a.mode, g.n(), a.seed))?;
    emit(a.out.as_deref(), &bench_csv(&rows))
}

fn cmd_audit(a: &AuditArgs) -> Result<()> {
    let mut g = load_graph(&a.graph, Mode::Conductance)?;
    let params = DivisionParams::new(a.r.unwrap_or_else(|| default_r(g.n()))).with_seed(a.seed);
    let mut d = build_rdivision(&g, params)?;
    let report_line = |step: usize, rep: &dynsparse_core::partition::ValidationReport| {
        let mut v = serde_json::to_value(rep).expect("report serializes");
        v["step"] = serde_json::json!(step);
        println!("{v}");
    };
    let rep = validate_rdivision(&d, &g);
    if !rep.pass {
        report_line(0, &rep);
        return Err(Error::DivisionInvariant(failed_checks(&rep)));
    }
    let mut step = 0;
    if let Some(path) = &a.script {
        for line in parse_script(&read(path)?)? {
            let rec = match line.op {
                Op::Insert { u, v, weight } => g.insert_edge(u, v, weight)?,
                Op::Delete { u, v } => {
                    let id = g.find_edge(u, v).ok_or(Error::NoSuchEdge(u, v))?;
                    g.delete_edge(id)?
                }
                _ => continue,
            };
            d.apply_change(&rec)?;
            step += 1;
            let rep = validate_rdivision(&d, &g);
            if !rep.pass {
                report_line(step, &rep);
                return Err(Error::DivisionInvariant(format!("after update {step} (line {}): {}", line.line, failed_checks(&rep))));
            }
        }
    }
    report_line(step, &validate_rdivision(&d, &g));
    Ok(())
}

fn failed_checks(rep: &dynsparse_core::partition::ValidationReport) -> String {
    rep.checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect::<Vec<_>>()
        .join("; ")
}

fn exit_code(e: &Error) -> u8 {
    if e.is_invariant_violation() {
        3
    } else if matches!(e, Error::Parse { .. }) {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Audit(a) => cmd_audit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
