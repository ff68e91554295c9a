//! Dynamic weighted undirected multigraph.
//!
//! Vertex ids are dense `0..n` and never compacted. Edge ids are handed out
//! monotonically and never reused, so an id stays meaningful to regions and
//! scripts after the edge is gone. Parallel edges are stored as-is; the
//! merged views combine them by summation (conductance, capacity) or by
//! minimum (length).

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How edge weights are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Weight is a conductance; resistance is its reciprocal.
    Conductance,
    Capacity,
    Length,
}

impl Mode {
    /// Combines two parallel weights into one.
    #[inline]
    pub fn merge(self, a: f64, b: f64) -> f64 {
        match self {
            Mode::Conductance | Mode::Capacity => a + b,
            Mode::Length => a.min(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// A stored edge. The orientation `u -> v` is fixed for the lifetime of the
/// edge and defines the sign of flows on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl Edge {
    #[inline]
    pub fn other(&self, x: usize) -> usize {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// An edge mutation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Insert { u: usize, v: usize, weight: f64 },
    Delete(EdgeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeKind {
    Inserted,
    Deleted,
}

/// What a mutation did to the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeRecord {
    pub kind: ChangeKind,
    pub edge: Edge,
    /// Endpoints whose degree moved between zero and non-zero.
    pub degree_crossed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    mode: Mode,
    slots: Vec<Option<Edge>>,
    adj: Vec<Vec<EdgeId>>,
    live: usize,
}

impl WeightedGraph {
    pub fn new(n: usize, mode: Mode) -> Self {
        Self {
            n,
            mode,
            slots: Vec::new(),
            adj: vec![Vec::new(); n],
            live: 0,
        }
    }

    /// Builds a graph from `(u, v, w)` triples.
    pub fn from_edges(
        n: usize,
        mode: Mode,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut g = Self::new(n, mode);
        for (u, v, w) in edges {
            g.insert_edge(u, v, w)?;
        }
        Ok(g)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of live edges (parallel edges counted separately).
    #[inline]
    pub fn m(&self) -> usize {
        self.live
    }

    #[inline]
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Reinterprets the weights under another mode.
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    /// Upper bound (exclusive) on edge ids handed out so far.
    pub fn edge_id_bound(&self) -> usize {
        self.slots.len()
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.slots.get(id.0).and_then(|e| e.as_ref())
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.slots.iter().filter_map(|e| e.as_ref())
    }

    pub fn incident(&self, v: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.adj[v].iter().map(move |id| self.slots[id.0].as_ref().unwrap())
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_vertex(&self, v: usize) -> bool {
        v < self.n
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v))
        }
    }

    /// Lowest-id live edge between `u` and `v`, if any.
    pub fn find_edge(&self, u: usize, v: usize) -> Option<EdgeId> {
        if u >= self.n || v >= self.n {
            return None;
        }
        let (a, b) = if self.adj[u].len() <= self.adj[v].len() {
            (u, v)
        } else {
            (v, u)
        };
        self.adj[a]
            .iter()
            .filter(|id| self.slots[id.0].as_ref().unwrap().other(a) == b)
            .min()
            .copied()
    }

    pub fn insert_edge(&mut self, u: usize, v: usize, weight: f64) -> Result<ChangeRecord> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::BadWeight(weight));
        }
        let id = EdgeId(self.slots.len());
        let edge = Edge { id, u, v, weight };
        self.slots.push(Some(edge));
        let mut crossed = Vec::new();
        for x in [u, v] {
            if self.adj[x].is_empty() {
                crossed.push(x);
            }
            self.adj[x].push(id);
        }
        self.live += 1;
        Ok(ChangeRecord {
            kind: ChangeKind::Inserted,
            edge,
            degree_crossed: crossed,
        })
    }

    pub fn delete_edge(&mut self, id: EdgeId) -> Result<ChangeRecord> {
        let edge = self
            .slots
            .get_mut(id.0)
            .and_then(|e| e.take())
            .ok_or(Error::UnknownEdge(id.0))?;
        let mut crossed = Vec::new();
        for x in [edge.u, edge.v] {
            let list = &mut self.adj[x];
            let pos = list.iter().position(|&e| e == id).expect("adjacency out of sync");
            list.swap_remove(pos);
            if list.is_empty() {
                crossed.push(x);
            }
        }
        self.live -= 1;
        Ok(ChangeRecord {
            kind: ChangeKind::Deleted,
            edge,
            degree_crossed: crossed,
        })
    }

    pub fn mutate(&mut self, action: Action) -> Result<ChangeRecord> {
        match action {
            Action::Insert { u, v, weight } => self.insert_edge(u, v, weight),
            Action::Delete(id) => self.delete_edge(id),
        }
    }

    /// Neighbours of `v` with parallel edges merged, sorted by neighbour id.
    pub fn merged_neighbors(&self, v: usize) -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for e in self.incident(v) {
            let x = e.other(v);
            acc.entry(x)
                .and_modify(|w| *w = self.mode.merge(*w, e.weight))
                .or_insert(e.weight);
        }
        acc.into_iter().collect()
    }

    /// All edges with parallels merged, as `(u, v, w)` with `u < v`, sorted.
    pub fn merged_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut all: Vec<(usize, usize, f64)> = self.edges().map(|e| (e.u.min(e.v), e.u.max(e.v), e.weight)).collect();
        // stable so parallel weights merge in edge-id order
        all.sort_by_key(|&(u, v, _)| (u, v));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(all.len());
        for (u, v, w) in all {
            match out.last_mut() {
                Some(last) if (last.0, last.1) == (u, v) => last.2 = self.mode.merge(last.2, w),
                _ => out.push((u, v, w)),
            }
        }
        out
    }

    /// Returns a copy with parallel edges merged.
    pub fn merged(&self) -> WeightedGraph {
        let mut g = WeightedGraph::new(self.n, self.mode);
        for (u, v, w) in self.merged_edges() {
            g.insert_edge(u, v, w).expect("merged edge is valid");
        }
        g
    }

    pub fn laplacian(&self) -> LaplacianView<'_> {
        LaplacianView { g: self }
    }

    /// Vertices with at least one incident edge.
    pub fn non_isolated(&self) -> Vec<usize> {
        (0..self.n).filter(|&v| !self.adj[v].is_empty()).collect()
    }

    /// Keeps exactly the edges with both endpoints active.
    pub fn induced_subgraph(&self, active: &[bool]) -> WeightedGraph {
        let mut g = WeightedGraph::new(self.n, self.mode);
        for e in self.edges() {
            if active.get(e.u).copied().unwrap_or(false) && active.get(e.v).copied().unwrap_or(false) {
                g.insert_edge(e.u, e.v, e.weight).expect("edge is valid");
            }
        }
        g
    }

    /// Edge-multiset union of graphs over a shared id space.
    pub fn union<'a>(parts: impl IntoIterator<Item = &'a WeightedGraph>, n: usize, mode: Mode) -> Result<WeightedGraph> {
        let mut g = WeightedGraph::new(n, mode);
        for p in parts {
            if p.n != n {
                return Err(Error::IdSpaceMismatch(n, p.n));
            }
            for e in p.edges() {
                g.insert_edge(e.u, e.v, e.weight)?;
            }
        }
        Ok(g)
    }

    /// Component label per vertex and the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            queue.push_back(start);
            while let Some(x) = queue.pop_front() {
                for e in self.incident(x) {
                    let y = e.other(x);
                    if comp[y] == usize::MAX {
                        comp[y] = count;
                        queue.push_back(y);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    pub fn connected(&self, s: usize, t: usize) -> Result<bool> {
        self.check_vertex(s)?;
        self.check_vertex(t)?;
        if s == t {
            return Ok(true);
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(x) = queue.pop_front() {
            for e in self.incident(x) {
                let y = e.other(x);
                if y == t {
                    return Ok(true);
                }
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        Ok(false)
    }

    /// Copies the given edges into a compact graph on local ids `0..k`.
    /// Returns the graph and the local-to-global vertex map (sorted).
    pub fn extract<'a>(&self, edges: impl IntoIterator<Item = &'a Edge>) -> (WeightedGraph, Vec<usize>) {
        compact(self.mode, edges.into_iter().map(|e| (e.u, e.v, e.weight)), &[])
    }

    /// Dense Laplacian, row-major. Meant for small graphs and tests.
    pub fn dense_laplacian(&self) -> Vec<Vec<f64>> {
        let mut l = vec![vec![0.0; self.n]; self.n];
        for e in self.edges() {
            l[e.u][e.u] += e.weight;
            l[e.v][e.v] += e.weight;
            l[e.u][e.v] -= e.weight;
            l[e.v][e.u] -= e.weight;
        }
        l
    }
}

/// Relabels a global edge list onto `0..k`. `extra` vertices are included in
/// the map even when isolated. Returns the graph and the sorted global ids.
pub fn compact(
    mode: Mode,
    edges: impl IntoIterator<Item = (usize, usize, f64)>,
    extra: &[usize],
) -> (WeightedGraph, Vec<usize>) {
    let edges: Vec<_> = edges.into_iter().collect();
    let mut ids: Vec<usize> = edges
        .iter()
        .flat_map(|&(u, v, _)| [u, v])
        .chain(extra.iter().copied())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    let local = |x: usize| ids.binary_search(&x).unwrap();
    let mut g = WeightedGraph::new(ids.len(), mode);
    for (u, v, w) in edges {
        g.insert_edge(local(u), local(v), w).expect("compacted edge is valid");
    }
    (g, ids)
}

/// Read-only operator view of the Laplacian `L = B^T R^{-1} B`.
#[derive(Clone, Copy)]
pub struct LaplacianView<'a> {
    g: &'a WeightedGraph,
}

impl<'a> LaplacianView<'a> {
    pub fn n(&self) -> usize {
        self.g.n
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.g.n {
            return Err(Error::DimensionMismatch {
                expected: self.g.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `y = L x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut y = vec![0.0; self.g.n];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for e in self.g.edges() {
            let d = e.weight * (x[e.u] - x[e.v]);
            y[e.u] += d;
            y[e.v] -= d;
        }
    }

    /// `x^T L x = sum_e w(e) (x_u - x_v)^2`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self
            .g
            .edges()
            .map(|e| {
                let d = x[e.u] - x[e.v];
                e.weight * d * d
            })
            .sum())
    }

    /// Incidence action `(B x)_e = x_u - x_v`, indexed by edge id slot.
    pub fn incidence(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut out = vec![0.0; self.g.edge_id_bound()];
        for e in self.g.edges() {
            out[e.id.0] = x[e.u] - x[e.v];
        }
        Ok(out)
    }

    /// Resistance `r(e) = 1 / w(e)` of a live edge.
    pub fn resistance(&self, id: EdgeId) -> Option<f64> {
        self.g.edge(id).map(|e| 1.0 / e.weight)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.g.n];
        for e in self.g.edges() {
            d[e.u] += e.weight;
            d[e.v] += e.weight;
        }
        d
    }
}

/// Vertex demand vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Demand(pub Vec<f64>);

impl Demand {
    pub fn zeros(n: usize) -> Self {
        Demand(vec![0.0; n])
    }

    /// `+1` at `u`, `-1` at `v`.
    pub fn chi(n: usize, u: usize, v: usize) -> Self {
        let mut d = vec![0.0; n];
        d[u] += 1.0;
        d[v] -= 1.0;
        Demand(d)
    }
}

/// Vertex potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential(pub Vec<f64>);

/// Per-edge flow, indexed by edge id slot, positive along `u -> v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow(pub Vec<f64>);

impl Flow {
    /// Electrical flow induced by potentials: `f(e) = w(e) (phi_u - phi_v)`.
    pub fn from_potential(g: &WeightedGraph, phi: &Potential) -> Flow {
        let mut f = vec![0.0; g.edge_id_bound()];
        for e in g.edges() {
            f[e.id.0] = e.weight * (phi.0[e.u] - phi.0[e.v]);
        }
        Flow(f)
    }

    /// Net outflow per vertex.
    pub fn excess(&self, g: &WeightedGraph) -> Vec<f64> {
        let mut ex = vec![0.0; g.n()];
        for e in g.edges() {
            ex[e.u] += self.0[e.id.0];
            ex[e.v] -= self.0[e.id.0];
        }
        ex
    }

    /// Net outflow at `s`.
    pub fn value(&self, g: &WeightedGraph, s: usize) -> f64 {
        self.excess(g)[s]
    }

    /// `sum_e r(e) f(e)^2` with `r = 1 / w`.
    pub fn energy(&self, g: &WeightedGraph) -> f64 {
        g.edges().map(|e| self.0[e.id.0].powi(2) / e.weight).sum()
    }
}

/// Parses the text graph format: `n m` then `m` lines `u v w`. Lines starting
/// with `#` and blank lines are skipped.
pub fn parse_graph(text: &str, mode: Mode) -> Result<WeightedGraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(Error::Parse {
            line: hl,
            msg: format!("expected `n m`, got `{header}`"),
        });
    }
    let num = |s: &str, line: usize| -> Result<usize> {
        s.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad integer `{s}`"),
        })
    };
    let n = num(head[0], hl)?;
    let m = num(head[1], hl)?;
    let mut g = WeightedGraph::new(n, mode);
    let mut seen = 0;
    for (ln, line) in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected `u v w`, got `{line}`"),
            });
        }
        let u = num(tok[0], ln)?;
        let v = num(tok[1], ln)?;
        let w: f64 = tok[2].parse().map_err(|_| Error::Parse {
            line: ln,
            msg: format!("bad weight `{}`", tok[2]),
        })?;
        g.insert_edge(u, v, w).map_err(|e| Error::Parse {
            line: ln,
            msg: e.to_string(),
        })?;
        seen += 1;
    }
    if seen != m {
        return Err(Error::Parse {
            line: hl,
            msg: format!("header declares {m} edges, found {seen}"),
        });
    }
    Ok(g)
}

pub fn write_graph(g: &WeightedGraph) -> String {
    let mut out = format!("{} {}\n", g.n(), g.m());
    for e in g.edges() {
        out.push_str(&format!("{} {} {}\n", e.u, e.v, e.weight));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_sum(parts: &[&WeightedGraph]) -> Vec<Vec<f64>> {
        let n = parts[0].n();
        let mut acc = vec![vec![0.0; n]; n];
        for p in parts {
            let l = p.dense_laplacian();
            for i in 0..n {
                for j in 0..n {
                    acc[i][j] += l[i][j];
                }
            }
        }
        acc
    }

    #[test]
    fn insert_then_delete() {
        let mut g = WeightedGraph::new(2, Mode::Conductance);
        let rec = g.insert_edge(0, 1, 2.0).unwrap();
        assert_eq!(g.m(), 1);
        assert_eq!(rec.degree_crossed, vec![0, 1]);
        let rec = g.delete_edge(rec.edge.id).unwrap();
        assert_eq!(g.m(), 0);
        assert_eq!(rec.kind, ChangeKind::Deleted);
        assert_eq!(rec.degree_crossed, vec![0, 1]);
        assert_eq!(g.edges().count(), 0);
    }

    #[test]
    fn parallel_conductances_merge() {
        let g = WeightedGraph::from_edges(2, Mode::Conductance, [(0, 1, 1.0), (0, 1, 1.0)]).unwrap();
        assert_eq!(g.merged_edges(), vec![(0, 1, 2.0)]);
        let l = g.dense_laplacian();
        assert_eq!(l[0][1], -2.0);
        assert_eq!(l[0][0], 2.0);

        let d = WeightedGraph::from_edges(2, Mode::Length, [(0, 1, 3.0), (1, 0, 1.5)]).unwrap();
        assert_eq!(d.merged_edges(), vec![(0, 1, 1.5)]);
    }

    #[test]
    fn mutation_errors() {
        let mut g = WeightedGraph::new(3, Mode::Capacity);
        assert_eq!(g.insert_edge(0, 5, 1.0), Err(Error::UnknownVertex(5)));
        assert_eq!(g.insert_edge(1, 1, 1.0), Err(Error::SelfLoop(1)));
        assert_eq!(g.insert_edge(0, 1, 0.0), Err(Error::BadWeight(0.0)));
        assert!(g.insert_edge(0, 1, -1.0).is_err());
        assert!(g.insert_edge(0, 1, f64::NAN).is_err());
        assert_eq!(g.delete_edge(EdgeId(0)), Err(Error::UnknownEdge(0)));
    }

    #[test]
    fn quadratic_form_examples() {
        let g = WeightedGraph::from_edges(2, Mode::Conductance, [(0, 1, 1.0)]).unwrap();
        let chi = Demand::chi(2, 0, 1);
        assert_eq!(g.laplacian().quadratic_form(&chi.0).unwrap(), 4.0);
        let g3 = WeightedGraph::from_edges(2, Mode::Conductance, [(0, 1, 3.0)]).unwrap();
        assert_eq!(g3.laplacian().quadratic_form(&chi.0).unwrap(), 12.0);
        let tri = WeightedGraph::from_edges(3, Mode::Conductance, [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 5.0)]).unwrap();
        assert_eq!(tri.laplacian().quadratic_form(&[7.0; 3]).unwrap(), 0.0);
        assert!(matches!(
            tri.laplacian().quadratic_form(&[1.0; 2]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn union_examples() {
        let a = WeightedGraph::from_edges(3, Mode::Conductance, [(0, 1, 1.0)]).unwrap();
        let b = WeightedGraph::from_edges(3, Mode::Conductance, [(1, 2, 1.0)]).unwrap();
        let u = WeightedGraph::union([&a, &b], 3, Mode::Conductance).unwrap();
        assert_eq!(u.dense_laplacian(), dense_sum(&[&a, &b]));
        assert_eq!(u.m(), 2);

        let u2 = WeightedGraph::union([&a, &a], 3, Mode::Conductance).unwrap();
        assert_eq!(u2.merged_edges(), vec![(0, 1, 2.0)]);

        let empty = WeightedGraph::union(std::iter::empty(), 4, Mode::Conductance).unwrap();
        assert_eq!(empty.m(), 0);
        assert_eq!(empty.n(), 4);

        let c = WeightedGraph::new(5, Mode::Conductance);
        assert_eq!(WeightedGraph::union([&a, &c], 3, Mode::Conductance), Err(Error::IdSpaceMismatch(3, 5)));
    }

    #[test]
    fn induced_examples() {
        let tri = WeightedGraph::from_edges(3, Mode::Conductance, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(tri.induced_subgraph(&[true; 3]).merged_edges(), tri.merged_edges());
        assert_eq!(tri.induced_subgraph(&[true, true, false]).merged_edges(), vec![(0, 1, 1.0)]);
        let path = WeightedGraph::from_edges(3, Mode::Conductance, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let sub = path.induced_subgraph(&[true, false, true]);
        assert_eq!(sub.m(), 0);
        assert_eq!(sub.n(), 3);
    }

    #[test]
    fn connectivity_examples() {
        let path = WeightedGraph::from_edges(3, Mode::Conductance, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert!(path.connected(0, 2).unwrap());
        let iso = WeightedGraph::new(2, Mode::Conductance);
        assert!(!iso.connected(0, 1).unwrap());

        let mut c4 = WeightedGraph::from_edges(4, Mode::Conductance, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]).unwrap();
        c4.delete_edge(EdgeId(0)).unwrap();
        c4.delete_edge(EdgeId(2)).unwrap();
        // remaining edges 1-2 and 3-0
        assert!(c4.connected(1, 2).unwrap());
        assert!(c4.connected(0, 3).unwrap());
        assert!(!c4.connected(0, 1).unwrap());
    }

    #[test]
    fn text_format() {
        let text = "# comment\n3 2\n0 1 1.5\n# mid\n1 2 2\n";
        let g = parse_graph(text, Mode::Conductance).unwrap();
        assert_eq!(g.m(), 2);
        assert_eq!(write_graph(&g), "3 2\n0 1 1.5\n1 2 2\n");
        let back = parse_graph(&write_graph(&g), Mode::Conductance).unwrap();
        assert_eq!(back, g);

        assert!(matches!(parse_graph("3 2\n0 1 1\n", Mode::Conductance), Err(Error::Parse { .. })));
        assert!(matches!(parse_graph("3 1\n0 1 x\n", Mode::Conductance), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_graph("3 1\n0 1 -1\n", Mode::Conductance), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn flow_from_potential() {
        let g = WeightedGraph::from_edges(3, Mode::Conductance, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let f = Flow::from_potential(&g, &Potential(vec![1.0, 0.0, -1.0]));
        assert_eq!(f.value(&g, 0), 1.0);
        assert_eq!(f.excess(&g), vec![1.0, 0.0, -1.0]);
        assert_eq!(f.energy(&g), 2.0);
    }
}
