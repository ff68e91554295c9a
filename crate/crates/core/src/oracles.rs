//! From-scratch ground truth and the replay comparator that runs a dynamic
//! structure and the oracle side by side over a script.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::apsp::{distance, ApspKernel};
use crate::eflow::EFlowKernel;
use crate::error::{Error, Result};
use crate::graph::{Action, Mode, WeightedGraph};
use crate::maxflow::{cut_profile, max_flow, CutStrategy, MaxFlowKernel};
use crate::partition::{validate_rdivision, RDivision};
use crate::regional::{LifecycleParams, RegionKernel, Regional, WorstCase};
use crate::resistance::effective_resistance;
use crate::script::{Op, ScriptLine};
use crate::subgraph::{sg_activate, sg_new, sg_query, SubgraphEFlow};

/// Energy of the unit `s`-`t` electrical flow, i.e. `R(s, t)`.
pub fn oracle_energy(g: &WeightedGraph, s: usize, t: usize) -> Result<f64> {
    effective_resistance(g, s, t)
}

pub fn oracle_maxflow(g: &WeightedGraph, s: usize, t: usize) -> Result<f64> {
    max_flow(g, s, t)
}

pub fn oracle_distance(g: &WeightedGraph, s: usize, t: usize) -> Result<f64> {
    distance(g, s, t)
}

/// `mincut_G(S, K \ S)` for every bipartition with `K[0] ∈ S`.
pub fn oracle_cut_profile(g: &WeightedGraph, terminals: &[usize]) -> Result<BTreeMap<Vec<usize>, f64>> {
    Ok(cut_profile(g, terminals)?.into_iter().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayMode {
    Eflow,
    Maxflow,
    Apsp,
    Subgraph,
}

impl ReplayMode {
    pub fn graph_mode(self) -> Mode {
        match self {
            ReplayMode::Eflow | ReplayMode::Subgraph => Mode::Conductance,
            ReplayMode::Maxflow => Mode::Capacity,
            ReplayMode::Apsp => Mode::Length,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReplayMode::Eflow => "eflow",
            ReplayMode::Maxflow => "maxflow",
            ReplayMode::Apsp => "apsp",
            ReplayMode::Subgraph => "subgraph",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayParams {
    pub mode: ReplayMode,
    pub r: usize,
    pub eps: f64,
    /// Spanner parameter for distance mode.
    pub q: usize,
    pub strategy: CutStrategy,
    pub seed: u64,
    pub worst_case: bool,
    /// Re-validate the division after every update and reject insertions
    /// beyond the planar edge bound.
    pub audit: bool,
    /// Compute the oracle for every query.
    pub oracle: bool,
}

impl ReplayParams {
    pub fn new(mode: ReplayMode, r: usize, seed: u64) -> Self {
        Self {
            mode,
            r,
            eps: 0.3,
            q: 1,
            strategy: CutStrategy::Identity,
            seed,
            worst_case: false,
            audit: false,
            oracle: true,
        }
    }

    /// Whether `answer` meets the mode's guarantee against `oracle`.
    /// `quality` is the largest cut sparsifier quality in use.
    pub fn within(&self, answer: f64, oracle: f64, quality: f64) -> bool {
        if oracle.is_infinite() || answer.is_infinite() {
            return oracle.is_infinite() && answer.is_infinite();
        }
        let slack = 1e-9 * oracle.abs().max(1.0);
        match self.mode {
            ReplayMode::Eflow | ReplayMode::Subgraph => {
                if oracle == 0.0 {
                    return answer.abs() <= slack;
                }
                (answer / oracle - 1.0).abs() <= self.eps + 1e-12
            }
            ReplayMode::Maxflow => answer >= oracle - slack && answer <= quality * oracle + slack,
            ReplayMode::Apsp => answer >= oracle - slack && answer <= (2 * self.q - 1) as f64 * oracle + slack,
        }
    }
}

/// One query line of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub op_index: usize,
    pub kind: String,
    pub s: usize,
    pub t: usize,
    pub answer: f64,
    pub oracle: Option<f64>,
    pub ratio: Option<f64>,
    pub micros: f64,
}

impl ReplayRecord {
    /// The record as one JSON line; infinities are written as `"inf"`.
    pub fn to_json(&self, with_timing: bool) -> String {
        fn num(x: f64) -> serde_json::Value {
            if x.is_finite() {
                serde_json::json!(x)
            } else if x.is_nan() {
                serde_json::Value::Null
            } else if x > 0.0 {
                serde_json::json!("inf")
            } else {
                serde_json::json!("-inf")
            }
        }
        let mut obj = serde_json::json!({
            "op_index": self.op_index,
            "kind": self.kind,
            "s": self.s,
            "t": self.t,
            "answer": num(self.answer),
            "oracle": self.oracle.map_or(serde_json::Value::Null, num),
            "ratio": self.ratio.map_or(serde_json::Value::Null, num),
        });
        if with_timing {
            obj["micros"] = serde_json::json!(self.micros);
        }
        obj.to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayReport {
    pub records: Vec<ReplayRecord>,
    pub update_micros: Vec<f64>,
    /// Union-graph size `(vertices, edges)` per query.
    pub query_sizes: Vec<(usize, usize)>,
    pub checked: usize,
    pub failures: usize,
    /// Largest per-update work and the fixed budget, for worst-case runs.
    pub work: Option<(usize, usize)>,
}

impl ReplayReport {
    /// Failed fraction among queries with a finite oracle.
    pub fn failure_rate(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.failures as f64 / self.checked as f64
        }
    }

    pub fn json_lines(&self, with_timing: bool) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_json(with_timing));
            out.push('\n');
        }
        out
    }
}

/// What the replay loop needs from a dynamic structure.
trait Engine {
    fn apply(&mut self, a: Action) -> Result<()>;
    fn query(&mut self, s: usize, t: usize) -> Result<f64>;
    fn graph(&self) -> &WeightedGraph;
    fn division(&self) -> &RDivision;
    fn query_size(&self) -> (usize, usize);
    fn quality(&self) -> f64;
    fn work(&self) -> Option<(usize, usize)>;
}

trait Quality {
    fn quality(&self) -> f64 {
        1.0
    }
}

impl Quality for crate::schur::SparsifierCertificate {}
impl Quality for crate::apsp::DistanceCert {}
impl Quality for crate::maxflow::CutCert {
    fn quality(&self) -> f64 {
        self.quality
    }
}

fn structure_quality<K: RegionKernel>(st: &Regional<K>) -> f64
where
    K::Cert: Quality,
{
    st.sketches().map(|(_, s)| s.cert.quality()).fold(1.0, f64::max)
}

impl<K: RegionKernel> Engine for Regional<K>
where
    K::Cert: Quality,
{
    fn apply(&mut self, a: Action) -> Result<()> {
        self.update(a).map(|_| ())
    }
    fn query(&mut self, s: usize, t: usize) -> Result<f64> {
        Regional::query(self, s, t)
    }
    fn graph(&self) -> &WeightedGraph {
        Regional::graph(self)
    }
    fn division(&self) -> &RDivision {
        Regional::division(self)
    }
    fn query_size(&self) -> (usize, usize) {
        (self.stats().last_query_vertices, self.stats().last_query_edges)
    }
    fn quality(&self) -> f64 {
        structure_quality(self)
    }
    fn work(&self) -> Option<(usize, usize)> {
        None
    }
}

impl<K: RegionKernel> Engine for WorstCase<K>
where
    K::Cert: Quality,
{
    fn apply(&mut self, a: Action) -> Result<()> {
        WorstCase::apply(self, a).map(|_| ())
    }
    fn query(&mut self, s: usize, t: usize) -> Result<f64> {
        WorstCase::query(self, s, t)
    }
    fn graph(&self) -> &WeightedGraph {
        self.serving().graph()
    }
    fn division(&self) -> &RDivision {
        self.serving().division()
    }
    fn query_size(&self) -> (usize, usize) {
        let st = self.serving().stats();
        (st.last_query_vertices, st.last_query_edges)
    }
    fn quality(&self) -> f64 {
        structure_quality(self.serving())
    }
    fn work(&self) -> Option<(usize, usize)> {
        Some((self.max_work(), self.budget()))
    }
}

fn lifecycle(params: &ReplayParams) -> LifecycleParams {
    let mut lp = LifecycleParams::new(params.r, params.seed);
    lp.audit = params.audit;
    lp
}

fn engine(g: WeightedGraph, params: &ReplayParams) -> Result<Box<dyn Engine>> {
    let lp = lifecycle(params);
    fn boxed<K: RegionKernel + 'static>(k: K, g: WeightedGraph, lp: LifecycleParams, wc: bool) -> Result<Box<dyn Engine>>
    where
        K::Cert: Quality,
    {
        let st = Regional::build(k, g, lp)?;
        Ok(if wc {
            Box::new(WorstCase::from_structure(st)?)
        } else {
            Box::new(st)
        })
    }
    match params.mode {
        ReplayMode::Eflow => boxed(EFlowKernel::new(params.eps)?, g, lp, params.worst_case),
        ReplayMode::Maxflow => boxed(MaxFlowKernel { strategy: params.strategy }, g, lp, params.worst_case),
        ReplayMode::Apsp => {
            if params.q == 0 {
                return Err(Error::InvalidParameter("q must be at least 1".into()));
            }
            boxed(ApspKernel { q: params.q }, g, lp, params.worst_case)
        }
        ReplayMode::Subgraph => unreachable!("subgraph mode has its own loop"),
    }
}

fn mismatch(line: usize, op: &Op, mode: ReplayMode) -> Error {
    Error::Parse {
        line,
        msg: format!("operation {} is not available in {} mode", op.tag(), mode.name()),
    }
}

fn record(op_index: usize, op: &Op, s: usize, t: usize, answer: f64, oracle: Option<f64>, micros: f64) -> ReplayRecord {
    let ratio = oracle.map(|o| if o == answer { 1.0 } else { answer / o });
    ReplayRecord {
        op_index,
        kind: op.tag().to_string(),
        s,
        t,
        answer,
        oracle,
        ratio,
        micros,
    }
}

/// Runs `script` on the structure selected by `params`, comparing every
/// query against the oracle on the current graph.
pub fn replay_compare(g: &WeightedGraph, script: &[ScriptLine], params: &ReplayParams) -> Result<ReplayReport> {
    let g = g.clone().with_mode(params.mode.graph_mode());
    if params.mode == ReplayMode::Subgraph {
        return replay_subgraph(g, script, params);
    }
    let mut st = engine(g, params)?;
    let mut report = ReplayReport::default();
    for (idx, line) in script.iter().enumerate() {
        let op = line.op;
        let (s, t) = match op {
            Op::Insert { u, v, weight } => {
                let start = Instant::now();
                st.apply(Action::Insert { u, v, weight })?;
                report.update_micros.push(start.elapsed().as_secs_f64() * 1e6);
                after_update(&*st, params)?;
                continue;
            }
            Op::Delete { u, v } => {
                let id = st.graph().find_edge(u, v).ok_or(Error::NoSuchEdge(u, v))?;
                let start = Instant::now();
                st.apply(Action::Delete(id))?;
                report.update_micros.push(start.elapsed().as_secs_f64() * 1e6);
                after_update(&*st, params)?;
                continue;
            }
            Op::Query { s, t } => (s, t),
            Op::QueryFlow { s, t } if params.mode == ReplayMode::Maxflow => (s, t),
            Op::QueryDist { s, t } if params.mode == ReplayMode::Apsp => (s, t),
            _ => return Err(mismatch(line.line, &op, params.mode)),
        };
        let start = Instant::now();
        let answer = st.query(s, t)?;
        let micros = start.elapsed().as_secs_f64() * 1e6;
        report.query_sizes.push(st.query_size());
        let oracle = if params.oracle {
            let g = st.graph();
            Some(match params.mode {
                ReplayMode::Eflow => oracle_energy(g, s, t)?,
                ReplayMode::Maxflow => oracle_maxflow(g, s, t)?,
                _ => oracle_distance(g, s, t)?,
            })
        } else {
            None
        };
        if let Some(o) = oracle {
            if o.is_finite() {
                report.checked += 1;
                if !params.within(answer, o, st.quality()) {
                    report.failures += 1;
                }
            } else if answer.is_finite() {
                report.checked += 1;
                report.failures += 1;
            }
        }
        report.records.push(record(idx, &op, s, t, answer, oracle, micros));
    }
    report.work = st.work();
    Ok(report)
}

fn after_update(st: &dyn Engine, params: &ReplayParams) -> Result<()> {
    if params.audit {
        let rep = validate_rdivision(st.division(), st.graph());
        if let Some(c) = rep.checks.iter().find(|c| c.hard && !c.pass) {
            return Err(Error::DivisionInvariant(format!("{}: {}", c.name, c.detail)));
        }
    }
    Ok(())
}

fn replay_subgraph(g: WeightedGraph, script: &[ScriptLine], params: &ReplayParams) -> Result<ReplayReport> {
    let mut st: SubgraphEFlow = sg_new(g, params.r, params.eps, params.seed)?;
    let mut report = ReplayReport::default();
    for (idx, line) in script.iter().enumerate() {
        match line.op {
            Op::Activate(v) => {
                let start = Instant::now();
                sg_activate(&mut st, v)?;
                report.update_micros.push(start.elapsed().as_secs_f64() * 1e6);
            }
            Op::Query { s, t } => {
                let start = Instant::now();
                let answer = sg_query(&st, s, t)?;
                let micros = start.elapsed().as_secs_f64() * 1e6;
                let oracle = if params.oracle {
                    let active: Vec<bool> = (0..st.graph().n()).map(|v| st.is_active(v)).collect();
                    Some(oracle_energy(&st.graph().induced_subgraph(&active), s, t)?)
                } else {
                    None
                };
                if let Some(o) = oracle {
                    report.checked += 1;
                    if !params.within(answer, o, 1.0) {
                        report.failures += 1;
                    }
                }
                report.records.push(record(idx, &line.op, s, t, answer, oracle, micros));
            }
            op => return Err(mismatch(line.line, &op, params.mode)),
        }
    }
    Ok(report)
}

/// One row of an `r` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub r: usize,
    pub mean_update_us: f64,
    pub p99_update_us: f64,
    pub mean_query_us: f64,
    pub failure_rate: f64,
    /// Mean union-graph vertex count per query.
    pub mean_query_vertices: f64,
    /// Mean union-graph edge count per query.
    pub mean_query_edges: f64,
}

pub const BENCH_HEADER: &str = "r,mean_update_us,p99_update_us,mean_query_us,failure_rate,mean_query_vertices,mean_query_edges";

impl BenchRow {
    pub fn from_report(r: usize, rep: &ReplayReport) -> Self {
        let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
        let query_us: Vec<f64> = rep.records.iter().map(|r| r.micros).collect();
        let verts: Vec<f64> = rep.query_sizes.iter().map(|&(v, _)| v as f64).collect();
        let edges: Vec<f64> = rep.query_sizes.iter().map(|&(_, e)| e as f64).collect();
        Self {
            r,
            mean_update_us: mean(&rep.update_micros),
            p99_update_us: percentile(&rep.update_micros, 0.99),
            mean_query_us: mean(&query_us),
            failure_rate: rep.failure_rate(),
            mean_query_vertices: mean(&verts),
            mean_query_edges: mean(&edges),
        }
    }

    pub fn csv(&self) -> String {
        format!(
            "{},{:.3},{:.3},{:.3},{:.6},{:.1},{:.1}",
            self.r,
            self.mean_update_us,
            self.p99_update_us,
            self.mean_query_us,
            self.failure_rate,
            self.mean_query_vertices,
            self.mean_query_edges
        )
    }
}

/// Nearest-rank percentile; 0 for an empty sample.
pub fn percentile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Replays the same script once per `r`, keeping every other parameter.
pub fn bench_sweep(g: &WeightedGraph, script: &[ScriptLine], rs: &[usize], base: &ReplayParams) -> Result<Vec<BenchRow>> {
    rs.iter()
        .map(|&r| {
            let params = ReplayParams { r, ..*base };
            replay_compare(g, script, &params).map(|rep| BenchRow::from_report(r, &rep))
        })
        .collect()
}

/// The sweep as CSV with [`BENCH_HEADER`].
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv());
        out.push('\n');
    }
    out
}
