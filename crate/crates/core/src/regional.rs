//! Shared lifecycle of the dynamic structures: an r-division whose regions
//! each carry a compressed graph on their boundary, refreshed on updates,
//! rebuilt periodically, and queried on the union graph
//! `P_s ∪ P_t ∪ (sketches of every other region)`.
//!
//! Rebuilds are lagged: halfway through each period the graph is snapshot,
//! and at the period's end a fresh structure is built from the snapshot and
//! the updates since then are replayed onto it. The amortized structure
//! does this in one call, while [`WorstCase`] spreads the same work over
//! the period with a fixed per-call budget. Both yield identical states.

use std::collections::BTreeMap;
use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::graph::{compact, Action, ChangeKind, ChangeRecord, Mode, WeightedGraph};
use crate::partition::{build_rdivision, DivisionParams, RDivision, Region, RegionId};
use crate::schur::derive_seed;

/// Per-mode compression and query evaluation.
pub trait RegionKernel: Clone {
    type Cert: Clone + Debug + PartialEq;

    fn mode(&self) -> Mode;

    /// Compresses a compact region graph onto `terminals` (local ids).
    /// Returns a graph on the same local id space.
    fn sparsify(&self, region: &WeightedGraph, terminals: &[usize], n_global: usize, seed: u64) -> Result<(WeightedGraph, Self::Cert)>;

    /// Evaluates the query on the assembled union graph.
    fn answer(&self, h: &WeightedGraph, s: usize, t: usize) -> Result<f64>;

    /// The answer when `s` or `t` has no incident edge.
    fn isolated(&self) -> f64 {
        f64::INFINITY
    }

    /// Optionally shrinks an endpoint region (compact, local ids) onto
    /// `keep` so that every answer between kept vertices is unchanged.
    /// `None` leaves the region as it is.
    fn reduce_endpoint(&self, _region: &WeightedGraph, _keep: &[usize]) -> Result<Option<WeightedGraph>> {
        Ok(None)
    }
}

/// A union graph ready for a query, with the size of its unreduced form.
struct Assembled {
    graph: WeightedGraph,
    s: usize,
    t: usize,
    vertices: usize,
    edges: usize,
}

/// A region's compressed graph, on global vertex ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSketch<C> {
    pub terminals: Vec<usize>,
    pub edges: Vec<(usize, usize, f64)>,
    pub cert: C,
    /// Set when the sketch was injected rather than computed.
    pub overridden: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifecycleParams {
    pub division: DivisionParams,
    /// `T_div = c_T n / r`, rounded up to a positive multiple of 4.
    pub c_t: f64,
    pub seed: u64,
    /// Reject insertions that break the planar edge bound `m <= 3n - 6`.
    pub audit: bool,
}

impl LifecycleParams {
    pub fn new(r: usize, seed: u64) -> Self {
        Self {
            division: DivisionParams::new(r).with_seed(seed),
            c_t: 1.0,
            seed,
            audit: false,
        }
    }

    pub fn r(&self) -> usize {
        self.division.r
    }

    pub fn period(&self, n: usize) -> usize {
        rebuild_period(n, self.division.r, self.c_t)
    }
}

/// `4 * max(1, ceil(c_T n / (4 r)))`.
pub fn rebuild_period(n: usize, r: usize, c_t: f64) -> usize {
    let quarter = (c_t * n as f64 / (4.0 * r.max(1) as f64)).ceil() as usize;
    4 * quarter.max(1)
}

/// Instrumentation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub sparsify_calls: usize,
    pub last_update_sparsify: usize,
    pub rebuilds: usize,
    pub last_query_vertices: usize,
    pub last_query_edges: usize,
}

#[derive(Debug, Clone)]
pub struct Regional<K: RegionKernel> {
    kernel: K,
    params: LifecycleParams,
    graph: WeightedGraph,
    division: RDivision,
    sketches: BTreeMap<RegionId, RegionSketch<K::Cert>>,
    epoch: u64,
    nonce: u64,
    counter: usize,
    period: usize,
    auto_rebuild: bool,
    snapshot: Option<WeightedGraph>,
    log: Vec<Action>,
    stats: Stats,
}

fn sketch_region<K: RegionKernel>(
    kernel: &K,
    graph: &WeightedGraph,
    region: &Region,
    seed: u64,
) -> Result<RegionSketch<K::Cert>> {
    let terminals: Vec<usize> = region.boundary().iter().copied().collect();
    let (local, ids) = compact(
        kernel.mode(),
        region.edge_refs(graph).map(|e| (e.u, e.v, e.weight)),
        &terminals,
    );
    let local_terms: Vec<usize> = terminals.iter().map(|t| ids.binary_search(t).unwrap()).collect();
    let (h, cert) = kernel.sparsify(&local, &local_terms, graph.n(), seed)?;
    let edges = h.edges().map(|e| (ids[e.u], ids[e.v], e.weight)).collect();
    Ok(RegionSketch {
        terminals,
        edges,
        cert,
        overridden: false,
    })
}

/// Resumable construction: one unit builds the division, then one unit per
/// region sketch.
#[derive(Debug, Clone)]
pub struct BuildJob<K: RegionKernel> {
    kernel: K,
    params: LifecycleParams,
    graph: WeightedGraph,
    epoch: u64,
    division: Option<RDivision>,
    pending: Vec<RegionId>,
    sketches: BTreeMap<RegionId, RegionSketch<K::Cert>>,
    nonce: u64,
    units: usize,
}

impl<K: RegionKernel> BuildJob<K> {
    pub fn new(kernel: K, graph: WeightedGraph, params: LifecycleParams, epoch: u64) -> Self {
        Self {
            kernel,
            params,
            graph,
            epoch,
            division: None,
            pending: Vec::new(),
            sketches: BTreeMap::new(),
            nonce: 0,
            units: 0,
        }
    }

    pub fn done(&self) -> bool {
        self.division.is_some() && self.pending.is_empty()
    }

    /// Units executed so far.
    pub fn units(&self) -> usize {
        self.units
    }

    /// Units left, known once the division exists.
    pub fn remaining(&self) -> Option<usize> {
        self.division.as_ref().map(|_| self.pending.len())
    }

    /// Executes one unit. Returns `false` when nothing was left to do.
    pub fn step(&mut self) -> Result<bool> {
        match &self.division {
            None => {
                let div = build_rdivision(&self.graph, self.params.division)?;
                self.pending = div.region_ids();
                self.pending.reverse();
                self.division = Some(div);
            }
            Some(div) => {
                let Some(id) = self.pending.pop() else { return Ok(false) };
                let seed = derive_seed(self.params.seed, &[self.epoch, id.0 as u64, self.nonce]);
                self.nonce += 1;
                let sketch = sketch_region(&self.kernel, &self.graph, div.region(id).unwrap(), seed)?;
                self.sketches.insert(id, sketch);
            }
        }
        self.units += 1;
        Ok(true)
    }

    pub fn finish(mut self) -> Result<Regional<K>> {
        while self.step()? {}
        let period = self.params.period(self.graph.n());
        let calls = self.sketches.len();
        Ok(Regional {
            kernel: self.kernel,
            params: self.params,
            graph: self.graph,
            division: self.division.unwrap(),
            sketches: self.sketches,
            epoch: self.epoch,
            nonce: self.nonce,
            counter: 0,
            period,
            auto_rebuild: true,
            snapshot: None,
            log: Vec::new(),
            stats: Stats {
                sparsify_calls: calls,
                ..Stats::default()
            },
        })
    }
}

impl<K: RegionKernel> Regional<K> {
    pub fn build(kernel: K, graph: WeightedGraph, params: LifecycleParams) -> Result<Self> {
        Self::build_epoch(kernel, graph, params, 0)
    }

    fn build_epoch(kernel: K, graph: WeightedGraph, params: LifecycleParams, epoch: u64) -> Result<Self> {
        if graph.mode() != kernel.mode() {
            return Err(Error::InvalidParameter(format!(
                "graph is in {:?} mode, structure needs {:?}",
                graph.mode(),
                kernel.mode()
            )));
        }
        BuildJob::new(kernel, graph, params, epoch).finish()
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    pub fn params(&self) -> &LifecycleParams {
        &self.params
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn division(&self) -> &RDivision {
        &self.division
    }

    pub fn sketch(&self, id: RegionId) -> Option<&RegionSketch<K::Cert>> {
        self.sketches.get(&id)
    }

    pub fn sketches(&self) -> impl Iterator<Item = (RegionId, &RegionSketch<K::Cert>)> + '_ {
        self.sketches.iter().map(|(id, s)| (*id, s))
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Updates since the last rebuild.
    pub fn counter(&self) -> usize {
        self.counter
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    pub fn set_auto_rebuild(&mut self, on: bool) {
        self.auto_rebuild = on;
    }

    /// Replaces a region's sketch, e.g. with a deliberately lossy one. The
    /// injected sketch lives until the region is next recomputed.
    pub fn override_sketch(&mut self, id: RegionId, edges: Vec<(usize, usize, f64)>, cert: K::Cert) -> Result<()> {
        let region = self.division.region(id).ok_or(Error::InvalidParameter(format!("no region {}", id.0)))?;
        let terminals: Vec<usize> = region.boundary().iter().copied().collect();
        self.sketches.insert(
            id,
            RegionSketch {
                terminals,
                edges,
                cert,
                overridden: true,
            },
        );
        Ok(())
    }

    fn resketch(&mut self, id: RegionId) -> Result<()> {
        let seed = derive_seed(self.params.seed, &[self.epoch, id.0 as u64, self.nonce]);
        self.nonce += 1;
        let sketch = sketch_region(&self.kernel, &self.graph, self.division.region(id).unwrap(), seed)?;
        self.sketches.insert(id, sketch);
        self.stats.sparsify_calls += 1;
        self.stats.last_update_sparsify += 1;
        Ok(())
    }

    fn check_planar_bound(&self, rec: &ChangeRecord) -> Result<()> {
        let (labels, _) = self.graph.components();
        let c = labels[rec.edge.u];
        let verts = labels.iter().filter(|&&l| l == c).count();
        let edges = self
            .graph
            .merged_edges()
            .iter()
            .filter(|&&(u, _, _)| labels[u] == c)
            .count();
        if verts >= 3 && edges > 3 * verts - 6 {
            return Err(Error::DivisionInvariant(format!(
                "inserting ({}, {}) exceeds the planar edge bound",
                rec.edge.u, rec.edge.v
            )));
        }
        Ok(())
    }

    /// Applies one update, refreshing the sketches of affected regions.
    pub fn update(&mut self, action: Action) -> Result<ChangeRecord> {
        let rec = self.graph.mutate(action)?;
        if self.params.audit && rec.kind == ChangeKind::Inserted {
            if let Err(e) = self.check_planar_bound(&rec) {
                self.graph.delete_edge(rec.edge.id)?;
                return Err(e);
            }
        }
        let delta = self.division.apply_change(&rec)?;
        self.stats.last_update_sparsify = 0;
        for id in &delta.removed {
            self.sketches.remove(id);
        }
        let mut fresh = delta.changed.clone();
        fresh.extend(delta.created);
        fresh.sort_unstable();
        for id in fresh {
            self.resketch(id)?;
        }
        self.counter += 1;
        if self.auto_rebuild {
            let half = self.period / 2;
            if self.counter == half {
                self.snapshot = Some(self.graph.clone());
                self.log.clear();
            } else if self.counter > half {
                self.log.push(action);
            }
            if self.counter >= self.period {
                self.rebuild()?;
            }
        }
        Ok(rec)
    }

    fn rebuild(&mut self) -> Result<()> {
        let snapshot = self.snapshot.take().unwrap_or_else(|| self.graph.clone());
        let log = std::mem::take(&mut self.log);
        let mut fresh = Self::build_epoch(self.kernel.clone(), snapshot, self.params, self.epoch + 1)?;
        fresh.auto_rebuild = false;
        for a in log {
            fresh.update(a)?;
        }
        fresh.auto_rebuild = self.auto_rebuild;
        fresh.counter = 0;
        let mut stats = fresh.stats;
        stats.sparsify_calls += self.stats.sparsify_calls;
        stats.rebuilds = self.stats.rebuilds + 1;
        stats.last_update_sparsify = self.stats.last_update_sparsify;
        fresh.stats = stats;
        debug_assert_eq!(fresh.graph.m(), self.graph.m());
        *self = fresh;
        Ok(())
    }

    /// Union graph `P_s ∪ P_t ∪ (other sketches)` relabelled onto `0..k`,
    /// with the local ids of `s` and `t`. `None` when `s` or `t` is isolated.
    pub fn assemble(&self, s: usize, t: usize) -> Result<Option<(WeightedGraph, usize, usize)>> {
        Ok(self.assemble_with(s, t, false)?.map(|a| (a.graph, a.s, a.t)))
    }

    /// Builds the union graph. With `reduce`, each endpoint region first goes
    /// through [`RegionKernel::reduce_endpoint`] onto its boundary and the
    /// endpoints it contains. The reported sizes are always those of the
    /// unreduced union.
    fn assemble_with(&self, s: usize, t: usize, reduce: bool) -> Result<Option<Assembled>> {
        for x in [s, t] {
            if x >= self.graph.n() {
                return Err(Error::UnknownVertex(x));
            }
        }
        let (Some(&ps), Some(&pt)) = (self.division.regions_of(s).first(), self.division.regions_of(t).first()) else {
            return Ok(None);
        };
        let mode = self.kernel.mode();
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        let mut extra = vec![s, t];
        let mut eliminated = 0;
        let own = if ps == pt { vec![ps] } else { vec![ps, pt] };
        for id in own {
            let region = self.division.region(id).unwrap();
            let raw = region.edge_refs(&self.graph).map(|e| (e.u, e.v, e.weight));
            if !reduce {
                edges.extend(raw);
                continue;
            }
            let (local, ids) = compact(mode, raw, &[]);
            let keep: Vec<usize> = (0..ids.len())
                .filter(|&i| region.is_boundary(ids[i]) || ids[i] == s || ids[i] == t)
                .collect();
            match self.kernel.reduce_endpoint(&local, &keep)? {
                Some(reduced) => {
                    eliminated += ids.len() - keep.len();
                    extra.extend(keep.iter().map(|&i| ids[i]));
                    edges.extend(reduced.edges().map(|e| (ids[e.u], ids[e.v], e.weight)));
                }
                None => edges.extend(local.edges().map(|e| (ids[e.u], ids[e.v], e.weight))),
            }
        }
        let mut unreduced_edges = 0;
        for id in [ps, pt] {
            unreduced_edges += self.division.region(id).unwrap().edge_count();
            if ps == pt {
                break;
            }
        }
        for (id, sketch) in &self.sketches {
            if *id != ps && *id != pt {
                unreduced_edges += sketch.edges.len();
                edges.extend(sketch.edges.iter().copied());
            }
        }
        let (graph, ids) = compact(mode, edges, &extra);
        Ok(Some(Assembled {
            s: ids.binary_search(&s).unwrap(),
            t: ids.binary_search(&t).unwrap(),
            vertices: graph.n() + eliminated,
            edges: if reduce { unreduced_edges } else { graph.m() },
            graph,
        }))
    }

    /// Query on the union graph; [`RegionKernel::isolated`] when `s` or `t`
    /// has no incident edge.
    pub fn query(&mut self, s: usize, t: usize) -> Result<f64> {
        if s == t && s < self.graph.n() {
            return Err(Error::InvalidParameter(format!("query endpoints coincide ({s})")));
        }
        match self.assemble_with(s, t, true)? {
            None => {
                self.stats.last_query_vertices = 0;
                self.stats.last_query_edges = 0;
                Ok(self.kernel.isolated())
            }
            Some(a) => {
                self.stats.last_query_vertices = a.vertices;
                self.stats.last_query_edges = a.edges;
                self.kernel.answer(&a.graph, a.s, a.t)
            }
        }
    }

    /// Teardown unit count: one per sketch plus the division itself.
    fn teardown_units(&self) -> usize {
        self.sketches.len() + 1
    }

    /// Drops up to `units` pieces. Returns how many were executed.
    fn teardown_step(&mut self, units: usize) -> usize {
        let mut done = 0;
        while done < units {
            if self.sketches.pop_first().is_some() {
                done += 1;
            } else {
                self.division = RDivision::from_regions(&self.graph, vec![], self.params.division).expect("empty");
                done += 1;
                break;
            }
        }
        done
    }
}

enum Standby<K: RegionKernel> {
    Empty,
    Stale(Box<Regional<K>>),
    Building(Box<BuildJob<K>>),
    Ready(Box<Regional<K>>),
}

/// Subinterval of the rebuild period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Tear down the outdated standby copy.
    Teardown,
    /// Build the standby copy from the snapshot.
    Construct,
    /// Replay two logged updates per step onto the standby copy.
    CatchUp,
}

/// What a single [`WorstCase::apply`] call did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepReport {
    pub position: usize,
    pub phase: Phase,
    pub serving_sparsify: usize,
    pub teardown_units: usize,
    pub build_units: usize,
    pub replayed: usize,
    pub replay_sparsify: usize,
    pub swapped: bool,
    pub work: usize,
}

/// Two-copy scheduler with bounded work per update.
pub struct WorstCase<K: RegionKernel> {
    serving: Regional<K>,
    standby: Standby<K>,
    j: usize,
    delta: usize,
    snapshot: Option<WeightedGraph>,
    log: Vec<Action>,
    teardown_slice: usize,
    build_slice: usize,
    budget: usize,
    max_work: usize,
}

impl<K: RegionKernel> WorstCase<K> {
    pub fn new(kernel: K, graph: WeightedGraph, params: LifecycleParams) -> Result<Self> {
        Self::from_structure(Regional::build(kernel, graph, params)?)
    }

    pub fn from_structure(mut base: Regional<K>) -> Result<Self> {
        base.set_auto_rebuild(false);
        let period = base.period();
        let delta = period / 4;
        let n = base.graph.n();
        let dp = base.params.division;
        let region_cap = 2 * base.division.region_count().max(dp.region_bound(n).ceil() as usize) + period;
        let teardown_slice = (region_cap + 1).div_ceil(2 * delta);
        let build_slice = (region_cap + 1).div_ceil(delta);
        let budget = 3 + teardown_slice.max(build_slice).max(6);
        Ok(Self {
            serving: base,
            standby: Standby::Empty,
            j: 0,
            delta,
            snapshot: None,
            log: Vec::new(),
            teardown_slice,
            build_slice,
            budget,
            max_work: 0,
        })
    }

    pub fn serving(&self) -> &Regional<K> {
        &self.serving
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn max_work(&self) -> usize {
        self.max_work
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    /// Updates applied in the current period.
    pub fn position(&self) -> usize {
        self.j
    }

    pub fn apply(&mut self, action: Action) -> Result<StepReport> {
        let d = self.delta;
        self.serving.update(action)?;
        self.j += 1;
        let j = self.j;
        let mut rep = StepReport {
            position: j,
            phase: Phase::Teardown,
            serving_sparsify: self.serving.stats.last_update_sparsify,
            teardown_units: 0,
            build_units: 0,
            replayed: 0,
            replay_sparsify: 0,
            swapped: false,
            work: 0,
        };
        if j <= 2 * d {
            if let Standby::Stale(old) = &mut self.standby {
                rep.teardown_units = old.teardown_step(self.teardown_slice);
                if old.sketches.is_empty() && old.division.region_count() == 0 {
                    self.standby = Standby::Empty;
                }
            }
            if j == 2 * d {
                if !matches!(self.standby, Standby::Empty) {
                    return Err(Error::WorkBudget {
                        used: self.teardown_slice * 2 * d,
                        budget: self.budget,
                    });
                }
                self.snapshot = Some(self.serving.graph.clone());
                self.log.clear();
            }
        } else {
            self.log.push(action);
            if j <= 3 * d {
                rep.phase = Phase::Construct;
                if matches!(self.standby, Standby::Empty) {
                    let snap = self.snapshot.take().expect("snapshot taken at 2Δ");
                    let job = BuildJob::new(self.serving.kernel.clone(), snap, self.serving.params, self.serving.epoch + 1);
                    self.standby = Standby::Building(Box::new(job));
                }
                if let Standby::Building(job) = &mut self.standby {
                    while rep.build_units < self.build_slice && job.step()? {
                        rep.build_units += 1;
                    }
                }
            } else {
                rep.phase = Phase::CatchUp;
                if matches!(self.standby, Standby::Building(_)) {
                    let Standby::Building(job) = std::mem::replace(&mut self.standby, Standby::Empty) else {
                        unreachable!()
                    };
                    if !job.done() {
                        return Err(Error::WorkBudget {
                            used: job.units() + job.remaining().unwrap_or(1),
                            budget: self.build_slice * d,
                        });
                    }
                    let mut fresh = job.finish()?;
                    fresh.set_auto_rebuild(false);
                    self.standby = Standby::Ready(Box::new(fresh));
                }
                let Standby::Ready(next) = &mut self.standby else {
                    unreachable!("standby is ready during catch-up")
                };
                let first = 2 * (j - 3 * d) - 2;
                for a in &self.log[first..first + 2] {
                    next.update(*a)?;
                    rep.replay_sparsify += next.stats.last_update_sparsify;
                    rep.replayed += 1;
                }
                if j == 4 * d {
                    let Standby::Ready(mut next) = std::mem::replace(&mut self.standby, Standby::Empty) else {
                        unreachable!()
                    };
                    next.counter = 0;
                    let mut stats = next.stats;
                    stats.sparsify_calls += self.serving.stats.sparsify_calls;
                    stats.rebuilds = self.serving.stats.rebuilds + 1;
                    stats.last_update_sparsify = self.serving.stats.last_update_sparsify;
                    next.stats = stats;
                    let old = std::mem::replace(&mut self.serving, *next);
                    self.standby = Standby::Stale(Box::new(old));
                    self.log.clear();
                    self.j = 0;
                    rep.swapped = true;
                }
            }
        }
        rep.work = rep.serving_sparsify + rep.teardown_units + rep.build_units + rep.replay_sparsify;
        self.max_work = self.max_work.max(rep.work);
        if rep.work > self.budget {
            return Err(Error::WorkBudget {
                used: rep.work,
                budget: self.budget,
            });
        }
        Ok(rep)
    }

    pub fn query(&mut self, s: usize, t: usize) -> Result<f64> {
        self.serving.query(s, t)
    }

    /// Units still owed by the stale copy, for tests.
    pub fn stale_units(&self) -> usize {
        match &self.standby {
            Standby::Stale(old) => old.teardown_units(),
            _ => 0,
        }
    }
}
