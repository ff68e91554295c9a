//! Dynamic all-pairs shortest paths: every region keeps a distance
//! sparsifier onto its boundary (exact distance closure followed by a
//! greedy `(2q-1)`-spanner), and a query runs Dijkstra on the union graph.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Mode, WeightedGraph};
use crate::regional::{LifecycleParams, RegionKernel, Regional, WorstCase};

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn check_length(g: &WeightedGraph) -> Result<()> {
    if g.mode() != Mode::Length {
        return Err(Error::InvalidParameter(format!("expected a length graph, got {:?}", g.mode())));
    }
    Ok(())
}

/// Single-source distances, stopping once every settled distance exceeds
/// `limit`. Unreached vertices are infinite.
pub fn dijkstra_bounded(g: &WeightedGraph, s: usize, target: Option<usize>, limit: f64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.n()];
    let mut heap = BinaryHeap::from([Entry(0.0, s)]);
    dist[s] = 0.0;
    while let Some(Entry(d, x)) = heap.pop() {
        if d > dist[x] {
            continue;
        }
        if d > limit || Some(x) == target {
            break;
        }
        for e in g.incident(x) {
            let y = e.other(x);
            let nd = d + e.weight;
            if nd < dist[y] {
                dist[y] = nd;
                heap.push(Entry(nd, y));
            }
        }
    }
    dist
}

pub fn dijkstra(g: &WeightedGraph, s: usize) -> Result<Vec<f64>> {
    if s >= g.n() {
        return Err(Error::UnknownVertex(s));
    }
    Ok(dijkstra_bounded(g, s, None, f64::INFINITY))
}

/// Shortest-path distance; infinite when disconnected.
pub fn distance(g: &WeightedGraph, s: usize, t: usize) -> Result<f64> {
    for x in [s, t] {
        if x >= g.n() {
            return Err(Error::UnknownVertex(x));
        }
    }
    Ok(dijkstra_bounded(g, s, Some(t), f64::INFINITY)[t])
}

/// Min-merged adjacency with clique-replacing elimination.
struct DistEliminator {
    adj: Vec<HashMap<usize, f64>>,
}

impl DistEliminator {
    fn new(g: &WeightedGraph) -> Self {
        let mut adj = vec![HashMap::new(); g.n()];
        for (u, v, w) in g.merged_edges() {
            adj[u].insert(v, w);
            adj[v].insert(u, w);
        }
        Self { adj }
    }

    fn relax(&mut self, a: usize, b: usize, w: f64) {
        let slot = self.adj[a].entry(b).or_insert(f64::INFINITY);
        if w < *slot {
            *slot = w;
            self.adj[b].insert(a, w);
        }
    }

    fn eliminate(&mut self, v: usize) {
        let nbrs: Vec<(usize, f64)> = {
            let mut nb: Vec<(usize, f64)> = self.adj[v].drain().collect();
            nb.sort_unstable_by_key(|p| p.0);
            nb
        };
        for &(a, _) in &nbrs {
            self.adj[a].remove(&v);
        }
        for (i, &(a, wa)) in nbrs.iter().enumerate() {
            for &(b, wb) in &nbrs[i + 1..] {
                self.relax(a, b, wa + wb);
            }
        }
    }

    fn into_graph(self) -> WeightedGraph {
        let mut g = WeightedGraph::new(self.adj.len(), Mode::Length);
        for (u, nb) in self.adj.iter().enumerate() {
            let mut row: Vec<(usize, f64)> = nb.iter().filter(|(&v, _)| v > u).map(|(&v, &w)| (v, w)).collect();
            row.sort_unstable_by_key(|p| p.0);
            for (v, w) in row {
                g.insert_edge(u, v, w).expect("closure edge is valid");
            }
        }
        g
    }
}

/// Removes `v`, joining each neighbour pair `(a, b)` by `w(a,v) + w(v,b)`
/// unless a shorter `(a, b)` edge already exists.
pub fn eliminate_nonterminal_dist(g: &WeightedGraph, v: usize) -> Result<WeightedGraph> {
    check_length(g)?;
    if v >= g.n() {
        return Err(Error::UnknownVertex(v));
    }
    let mut el = DistEliminator::new(g);
    el.eliminate(v);
    Ok(el.into_graph())
}

/// Eliminates every non-terminal (min-degree order, ties by id). The result
/// lives on the input's id space with edges only among terminals; pairs in
/// different components get no edge.
pub fn distance_closure(g: &WeightedGraph, terminals: &[usize]) -> Result<WeightedGraph> {
    check_length(g)?;
    if terminals.is_empty() {
        return Err(Error::InvalidTerminals("terminal set is empty".into()));
    }
    let mut is_terminal = vec![false; g.n()];
    for &t in terminals {
        if t >= g.n() {
            return Err(Error::UnknownVertex(t));
        }
        is_terminal[t] = true;
    }
    let mut el = DistEliminator::new(g);
    let mut queue: BTreeSet<(usize, usize)> = (0..g.n())
        .filter(|&v| !is_terminal[v])
        .map(|v| (el.adj[v].len(), v))
        .collect();
    let mut degree: Vec<usize> = el.adj.iter().map(HashMap::len).collect();
    while let Some((_, v)) = queue.pop_first() {
        let nbrs: Vec<usize> = el.adj[v].keys().copied().collect();
        el.eliminate(v);
        for a in nbrs {
            if !is_terminal[a] {
                queue.remove(&(degree[a], a));
                degree[a] = el.adj[a].len();
                queue.insert((degree[a], a));
            }
        }
    }
    Ok(el.into_graph())
}

/// Closure with an explicit elimination order, for order-independence tests.
pub fn distance_closure_with_order(g: &WeightedGraph, terminals: &[usize], order: &[usize]) -> Result<WeightedGraph> {
    check_length(g)?;
    let mut el = DistEliminator::new(g);
    let mut done = vec![false; g.n()];
    for &t in terminals {
        done[t] = true;
    }
    for v in order.iter().copied().chain(0..g.n()) {
        if !done[v] {
            done[v] = true;
            el.eliminate(v);
        }
    }
    Ok(el.into_graph())
}

/// Greedy `(2q-1)`-spanner: scan edges by ascending weight (ties by id) and
/// keep an edge when the spanner built so far stretches it beyond `2q-1`.
pub fn greedy_spanner(h: &WeightedGraph, q: usize) -> Result<WeightedGraph> {
    check_length(h)?;
    if q == 0 {
        return Err(Error::InvalidParameter("spanner parameter q must be at least 1".into()));
    }
    let stretch = (2 * q - 1) as f64;
    let mut edges: Vec<_> = h.edges().copied().collect();
    edges.sort_by(|a, b| a.weight.total_cmp(&b.weight).then(a.id.cmp(&b.id)));
    let mut out = WeightedGraph::new(h.n(), Mode::Length);
    for e in edges {
        if e.u == e.v {
            continue;
        }
        let bound = stretch * e.weight;
        let d = dijkstra_bounded(&out, e.u, Some(e.v), bound)[e.v];
        if d > bound {
            out.insert_edge(e.u, e.v, e.weight)?;
        }
    }
    Ok(out)
}

/// `greedy_spanner(distance_closure(g, K), q)`.
pub fn distance_sparsify(g: &WeightedGraph, terminals: &[usize], q: usize) -> Result<WeightedGraph> {
    greedy_spanner(&distance_closure(g, terminals)?, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceCert {
    pub q: usize,
    pub closure_edges: usize,
    pub spanner_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApspKernel {
    pub q: usize,
}

impl RegionKernel for ApspKernel {
    type Cert = DistanceCert;

    fn mode(&self) -> Mode {
        Mode::Length
    }

    fn sparsify(&self, region: &WeightedGraph, terminals: &[usize], _n_global: usize, _seed: u64) -> Result<(WeightedGraph, DistanceCert)> {
        if terminals.len() < 2 {
            let cert = DistanceCert {
                q: self.q,
                closure_edges: 0,
                spanner_edges: 0,
            };
            return Ok((WeightedGraph::new(region.n(), Mode::Length), cert));
        }
        let closure = distance_closure(region, terminals)?;
        let spanner = greedy_spanner(&closure, self.q)?;
        let cert = DistanceCert {
            q: self.q,
            closure_edges: closure.m(),
            spanner_edges: spanner.m(),
        };
        Ok((spanner, cert))
    }

    fn answer(&self, h: &WeightedGraph, s: usize, t: usize) -> Result<f64> {
        distance(h, s, t)
    }
}

pub type ApspStructure = Regional<ApspKernel>;
pub type ApspScheduler = WorstCase<ApspKernel>;

pub fn apsp_new(g: WeightedGraph, r: usize, q: usize, seed: u64) -> Result<ApspStructure> {
    if q == 0 {
        return Err(Error::InvalidParameter("spanner parameter q must be at least 1".into()));
    }
    Regional::build(ApspKernel { q }, g, LifecycleParams::new(r, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Action;
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn len(n: usize, edges: &[(usize, usize, f64)]) -> WeightedGraph {
        WeightedGraph::from_edges(n, Mode::Length, edges.iter().copied()).unwrap()
    }

    fn bellman_ford(g: &WeightedGraph, s: usize) -> Vec<f64> {
        let mut d = vec![f64::INFINITY; g.n()];
        d[s] = 0.0;
        for _ in 0..g.n() {
            for e in g.edges() {
                d[e.v] = d[e.v].min(d[e.u] + e.weight);
                d[e.u] = d[e.u].min(d[e.v] + e.weight);
            }
        }
        d
    }

    fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> WeightedGraph {
        let mut g = WeightedGraph::new(n, Mode::Length);
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(p) {
                    g.insert_edge(a, b, rng.gen_range(0.5..5.0)).unwrap();
                }
            }
        }
        g
    }

    fn weight_between(g: &WeightedGraph, a: usize, b: usize) -> Option<f64> {
        g.find_edge(a, b).map(|id| g.edge(id).unwrap().weight)
    }

    #[test]
    fn elimination_examples() {
        let p = eliminate_nonterminal_dist(&len(3, &[(0, 1, 1.0), (1, 2, 2.0)]), 1).unwrap();
        assert_eq!(weight_between(&p, 0, 2), Some(3.0));
        let tri = eliminate_nonterminal_dist(&len(3, &[(0, 1, 1.0), (0, 2, 1.0), (2, 1, 1.0)]), 2).unwrap();
        assert_eq!(tri.m(), 1);
        assert_eq!(weight_between(&tri, 0, 1), Some(1.0));
        let star = eliminate_nonterminal_dist(&len(4, &[(0, 1, 1.0), (0, 2, 2.0), (0, 3, 3.0)]), 0).unwrap();
        assert_eq!(weight_between(&star, 1, 2), Some(3.0));
        assert_eq!(weight_between(&star, 1, 3), Some(4.0));
        assert_eq!(weight_between(&star, 2, 3), Some(5.0));
    }

    #[test]
    fn closure_examples() {
        let g = len(3, &[(0, 1, 2.0), (0, 1, 1.0), (1, 2, 1.0)]);
        let c = distance_closure(&g, &[0, 1, 2]).unwrap();
        assert_eq!(weight_between(&c, 0, 1), Some(1.0));
        assert_eq!(c.m(), 2);
        let p = len(5, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (3, 4, 4.0)]);
        let c = distance_closure(&p, &[0, 4]).unwrap();
        assert_eq!((c.m(), weight_between(&c, 0, 4)), (1, Some(10.0)));
        let c4 = len(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]);
        let c = distance_closure(&c4, &[0, 2]).unwrap();
        assert_eq!((c.m(), weight_between(&c, 0, 2)), (1, Some(2.0)));
        let split = len(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        assert_eq!(distance_closure(&split, &[0, 3]).unwrap().m(), 0);
        assert!(distance_closure(&split, &[]).is_err());
    }

    #[test]
    fn spanner_examples() {
        let tri = len(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        assert_eq!(greedy_spanner(&tri, 2).unwrap().m(), 2);
        assert_eq!(greedy_spanner(&tri, 1).unwrap().m(), 3);
        let dominated = len(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 2.0)]);
        assert_eq!(greedy_spanner(&dominated, 1).unwrap().m(), 2);
        let tree = len(5, &[(0, 1, 3.0), (1, 2, 1.0), (1, 3, 2.0), (3, 4, 5.0)]);
        let sp = greedy_spanner(&tree, 3).unwrap();
        assert_eq!(sp.m(), 4);
        assert!(greedy_spanner(&tree, 0).is_err());
    }

    #[test]
    fn sparsify_inside_larger_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = random_graph(20, 0.2, &mut rng);
        g.insert_edge(0, 1, 1.0).unwrap();
        g.insert_edge(1, 2, 1.0).unwrap();
        g.insert_edge(0, 2, 1.0).unwrap();
        let h = distance_sparsify(&g, &[0, 1, 2], 2).unwrap();
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            let d = distance(&g, a, b).unwrap();
            let dh = distance(&h, a, b).unwrap();
            assert!(dh >= d - 1e-12 && dh <= 3.0 * d + 1e-12);
        }
        let two = distance_sparsify(&g, &[0, 7], 1).unwrap();
        assert!(two.m() <= 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn closure_is_exact(seed in 0u64..100_000, n in 4usize..40, k in 2usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(n, 0.15, &mut rng);
            let mut verts: Vec<usize> = (0..n).collect();
            verts.shuffle(&mut rng);
            let terms: Vec<usize> = verts[..k.min(n)].to_vec();
            let c = distance_closure(&g, &terms).unwrap();
            for &s in &terms {
                let truth = bellman_ford(&g, s);
                let got = dijkstra(&c, s).unwrap();
                for &t in &terms {
                    if truth[t].is_infinite() {
                        prop_assert!(got[t].is_infinite());
                    } else {
                        prop_assert!((got[t] - truth[t]).abs() <= 1e-9 * truth[t].max(1.0));
                    }
                }
            }
            // a second, random order yields the same closure
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let c2 = distance_closure_with_order(&g, &terms, &order).unwrap();
            prop_assert_eq!(c.merged_edges().len(), c2.merged_edges().len());
            for ((a, b, w), (a2, b2, w2)) in c.merged_edges().into_iter().zip(c2.merged_edges()) {
                prop_assert_eq!((a, b), (a2, b2));
                prop_assert!((w - w2).abs() <= 1e-9 * w.max(1.0));
            }
        }

        #[test]
        fn spanner_stretch(seed in 0u64..100_000, n in 3usize..30, q in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(n, 0.4, &mut rng);
            let sp = greedy_spanner(&g, q).unwrap();
            let stretch = (2 * q - 1) as f64;
            for e in g.edges() {
                let d = distance(&sp, e.u, e.v).unwrap();
                prop_assert!(d <= stretch * e.weight + 1e-9);
            }
            for s in 0..n {
                let a = dijkstra(&g, s).unwrap();
                let b = dijkstra(&sp, s).unwrap();
                for t in 0..n {
                    prop_assert!(b[t] >= a[t] - 1e-9);
                    prop_assert!(b[t] <= stretch * a[t] + 1e-9 || a[t].is_infinite());
                }
            }
        }

        #[test]
        fn dijkstra_matches_bellman_ford(seed in 0u64..100_000, n in 2usize..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(n, 0.1, &mut rng);
            let a = dijkstra(&g, 0).unwrap();
            let b = bellman_ford(&g, 0);
            for t in 0..n {
                prop_assert!(a[t] == b[t] || (a[t] - b[t]).abs() <= 1e-9 * b[t]);
            }
        }
    }

    fn grid(w: usize, h: usize, rng: &mut ChaCha8Rng) -> WeightedGraph {
        let mut g = WeightedGraph::new(w * h, Mode::Length);
        for y in 0..h {
            for x in 0..w {
                let v = y * w + x;
                if x + 1 < w {
                    g.insert_edge(v, v + 1, rng.gen_range(1.0..3.0)).unwrap();
                }
                if y + 1 < h {
                    g.insert_edge(v, v + w, rng.gen_range(1.0..3.0)).unwrap();
                }
            }
        }
        g
    }

    #[test]
    fn dynamic_queries_are_sandwiched() {
        for q in 1..=3 {
            let mut rng = ChaCha8Rng::seed_from_u64(q as u64);
            let mut st = apsp_new(grid(7, 7, &mut rng), 10, q, 3).unwrap();
            let stretch = (2 * q - 1) as f64;
            for _ in 0..60 {
                let g = st.graph();
                let a = if rng.gen_bool(0.5) {
                    let ids: Vec<_> = g.edges().map(|e| e.id).collect();
                    Action::Delete(ids[rng.gen_range(0..ids.len())])
                } else {
                    let (u, v) = (rng.gen_range(0..49), rng.gen_range(0..49));
                    if u == v {
                        continue;
                    }
                    Action::Insert { u, v, weight: rng.gen_range(1.0..6.0) }
                };
                st.update(a).unwrap();
                let (s, t) = (rng.gen_range(0..49), rng.gen_range(0..49));
                if s == t {
                    continue;
                }
                let oracle = distance(st.graph(), s, t).unwrap();
                let ans = st.query(s, t).unwrap();
                if oracle.is_infinite() {
                    assert!(ans.is_infinite());
                    continue;
                }
                assert!(ans >= oracle - 1e-9 && ans <= stretch * oracle + 1e-9, "q {q}: {ans} vs {oracle}");
                if q == 1 {
                    assert!((ans - oracle).abs() <= 1e-9 * oracle);
                }
            }
        }
    }
}
