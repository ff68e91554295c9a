//! Dynamic all-pairs max flow: every region keeps a vertex cut sparsifier
//! onto its boundary, and a query runs an exact max flow on the union graph.
//!
//! Sparsifiers come from two exact strategies: the region itself, or the
//! region with every contraction applied that provably leaves all terminal
//! cut values unchanged. An auditor measures the quality of any sparsifier
//! by enumerating terminal bipartitions.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Mode, WeightedGraph};
use crate::regional::{LifecycleParams, RegionKernel, Regional, WorstCase};

/// Largest terminal set the exhaustive strategies accept.
pub const K_MAX: usize = 10;

const CUT_TOLERANCE: f64 = 1e-9;

struct Dinic {
    head: Vec<usize>,
    next: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<f64>,
    level: Vec<usize>,
    iter: Vec<usize>,
}

const NIL: usize = usize::MAX;

impl Dinic {
    fn new(n: usize) -> Self {
        Self {
            head: vec![NIL; n],
            next: Vec::new(),
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![0; n],
            iter: vec![0; n],
        }
    }

    /// Undirected edge: both arcs carry the full capacity.
    fn add(&mut self, u: usize, v: usize, c: f64) {
        for (a, b) in [(u, v), (v, u)] {
            self.to.push(b);
            self.cap.push(c);
            self.next.push(self.head[a]);
            self.head[a] = self.to.len() - 1;
        }
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.fill(usize::MAX);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            let mut a = self.head[x];
            while a != NIL {
                let y = self.to[a];
                if self.cap[a] > 0.0 && self.level[y] == usize::MAX {
                    self.level[y] = self.level[x] + 1;
                    q.push_back(y);
                }
                a = self.next[a];
            }
        }
        self.level[t] != usize::MAX
    }

    fn dfs(&mut self, x: usize, t: usize, pushed: f64) -> f64 {
        if x == t {
            return pushed;
        }
        while self.iter[x] != NIL {
            let a = self.iter[x];
            let y = self.to[a];
            if self.cap[a] > 0.0 && self.level[y] == self.level[x] + 1 {
                let got = self.dfs(y, t, pushed.min(self.cap[a]));
                if got > 0.0 {
                    self.cap[a] -= got;
                    self.cap[a ^ 1] += got;
                    return got;
                }
            }
            self.iter[x] = self.next[a];
        }
        0.0
    }

    fn run(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        while self.bfs(s, t) {
            self.iter.clone_from(&self.head);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= 0.0 {
                    break;
                }
                flow += f;
            }
        }
        flow
    }
}

/// Exact maximum `s`-`t` flow, edge weights read as capacities.
pub fn max_flow(g: &WeightedGraph, s: usize, t: usize) -> Result<f64> {
    for x in [s, t] {
        if x >= g.n() {
            return Err(Error::UnknownVertex(x));
        }
    }
    if s == t {
        return Err(Error::InvalidParameter(format!("max flow endpoints coincide ({s})")));
    }
    let mut net = Dinic::new(g.n());
    for e in g.edges() {
        if e.u != e.v {
            net.add(e.u, e.v, e.weight);
        }
    }
    Ok(net.run(s, t))
}

fn check_subset(g: &WeightedGraph, terminals: &[usize], side: &[usize]) -> Result<()> {
    for &x in terminals {
        if x >= g.n() {
            return Err(Error::UnknownVertex(x));
        }
    }
    if side.is_empty() || side.len() >= terminals.len() || side.iter().any(|x| !terminals.contains(x)) {
        return Err(Error::InvalidTerminals("S must be a non-empty proper subset of K".into()));
    }
    Ok(())
}

/// `mincut_G(S, K \ S)`: contract `S` to a source and `K \ S` to a sink.
pub fn terminal_cut_value(g: &WeightedGraph, terminals: &[usize], side: &[usize]) -> Result<f64> {
    check_subset(g, terminals, side)?;
    let n = g.n();
    let (src, snk) = (n, n + 1);
    let mut net = Dinic::new(n + 2);
    for e in g.edges() {
        if e.u != e.v {
            net.add(e.u, e.v, e.weight);
        }
    }
    for &k in terminals {
        if side.contains(&k) {
            net.add(src, k, f64::INFINITY);
        } else {
            net.add(k, snk, f64::INFINITY);
        }
    }
    Ok(net.run(src, snk))
}

/// Bipartitions `S` of `K` with `K[0] ∈ S` and `S ≠ K`, in mask order.
pub fn terminal_subsets(terminals: &[usize]) -> Vec<Vec<usize>> {
    let k = terminals.len();
    if k < 2 {
        return vec![];
    }
    let rest = k - 1;
    (0u64..(1u64 << rest) - 1)
        .map(|mask| {
            let mut s = vec![terminals[0]];
            s.extend((0..rest).filter(|b| mask >> b & 1 == 1).map(|b| terminals[b + 1]));
            s
        })
        .collect()
}

/// Every terminal cut value, one per subset from [`terminal_subsets`].
pub fn cut_profile(g: &WeightedGraph, terminals: &[usize]) -> Result<Vec<(Vec<usize>, f64)>> {
    terminal_subsets(terminals)
        .into_iter()
        .map(|s| terminal_cut_value(g, terminals, &s).map(|v| (s, v)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutStrategy {
    Identity,
    ContractExact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutSparsifier {
    pub terminals: Vec<usize>,
    /// Capacity graph on the input's id space; contracted vertices are
    /// isolated.
    pub graph: WeightedGraph,
    pub quality: f64,
    pub strategy: CutStrategy,
    /// Contract-exact was requested but `|K|` exceeded [`K_MAX`].
    pub fell_back: bool,
}

fn same_profile(a: &[(Vec<usize>, f64)], b: &[(Vec<usize>, f64)]) -> bool {
    a.iter()
        .zip(b)
        .all(|((_, x), (_, y))| (x - y).abs() <= CUT_TOLERANCE * x.abs().max(1.0))
}

/// Merges `from` into `into`, dropping self-loops and merging parallels.
fn contract(g: &WeightedGraph, from: usize, into: usize) -> WeightedGraph {
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (u, v, w) in g.merged_edges() {
        let u = if u == from { into } else { u };
        let v = if v == from { into } else { v };
        if u != v {
            edges.push((u.min(v), u.max(v), w));
        }
    }
    WeightedGraph::from_edges(g.n(), g.mode(), edges).unwrap().merged()
}

pub fn cut_sparsify(g: &WeightedGraph, terminals: &[usize], strategy: CutStrategy) -> Result<CutSparsifier> {
    for &x in terminals {
        if x >= g.n() {
            return Err(Error::UnknownVertex(x));
        }
    }
    let identity = |fell_back| CutSparsifier {
        terminals: terminals.to_vec(),
        graph: g.clone(),
        quality: 1.0,
        strategy: CutStrategy::Identity,
        fell_back,
    };
    match strategy {
        CutStrategy::Identity => Ok(identity(false)),
        CutStrategy::ContractExact if terminals.len() > K_MAX => Ok(identity(true)),
        // fewer than two terminals: no terminal cut to preserve
        CutStrategy::ContractExact if terminals.len() < 2 => Ok(CutSparsifier {
            terminals: terminals.to_vec(),
            graph: WeightedGraph::new(g.n(), g.mode()),
            quality: 1.0,
            strategy: CutStrategy::ContractExact,
            fell_back: false,
        }),
        CutStrategy::ContractExact => {
            let is_terminal = {
                let mut t = vec![false; g.n()];
                for &x in terminals {
                    t[x] = true;
                }
                t
            };
            let reference = cut_profile(g, terminals)?;
            let mut h = g.merged();
            loop {
                let mut progressed = false;
                for (u, v, _) in h.merged_edges() {
                    if is_terminal[u] && is_terminal[v] {
                        continue;
                    }
                    if h.degree(u) == 0 || h.degree(v) == 0 {
                        continue;
                    }
                    let (from, into) = if is_terminal[u] { (v, u) } else { (u, v) };
                    let trial = contract(&h, from, into);
                    if same_profile(&reference, &cut_profile(&trial, terminals)?) {
                        h = trial;
                        progressed = true;
                    }
                }
                if !progressed {
                    break;
                }
            }
            Ok(CutSparsifier {
                terminals: terminals.to_vec(),
                graph: h,
                quality: 1.0,
                strategy: CutStrategy::ContractExact,
                fell_back: false,
            })
        }
    }
}

/// Measured quality `max_S mincut_H / mincut_G`. A cut of `h` below the
/// original is a hard error.
pub fn cut_quality_audit(g: &WeightedGraph, terminals: &[usize], h: &CutSparsifier) -> Result<f64> {
    if terminals.len() > K_MAX {
        return Err(Error::InvalidTerminals(format!("audit needs |K| <= {K_MAX}")));
    }
    let mut quality: f64 = 1.0;
    for s in terminal_subsets(terminals) {
        let a = terminal_cut_value(g, terminals, &s)?;
        let b = terminal_cut_value(&h.graph, terminals, &s)?;
        if b < a - CUT_TOLERANCE * a.max(1.0) {
            return Err(Error::CutLowerBound {
                subset: s,
                original: a,
                sparsifier: b,
            });
        }
        let ratio = if a <= 0.0 {
            if b <= 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            b / a
        };
        quality = quality.max(ratio);
    }
    Ok(quality)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutCert {
    pub quality: f64,
    pub strategy: CutStrategy,
    pub fell_back: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxFlowKernel {
    pub strategy: CutStrategy,
}

impl RegionKernel for MaxFlowKernel {
    type Cert = CutCert;

    fn mode(&self) -> Mode {
        Mode::Capacity
    }

    fn sparsify(&self, region: &WeightedGraph, terminals: &[usize], _n_global: usize, _seed: u64) -> Result<(WeightedGraph, CutCert)> {
        let sp = cut_sparsify(region, terminals, self.strategy)?;
        let cert = CutCert {
            quality: sp.quality,
            strategy: sp.strategy,
            fell_back: sp.fell_back,
        };
        Ok((sp.graph, cert))
    }

    fn answer(&self, h: &WeightedGraph, s: usize, t: usize) -> Result<f64> {
        max_flow(h, s, t)
    }

    fn isolated(&self) -> f64 {
        0.0
    }
}

pub type MaxFlowStructure = Regional<MaxFlowKernel>;
pub type MaxFlowScheduler = WorstCase<MaxFlowKernel>;

pub fn mf_new(g: WeightedGraph, r: usize, strategy: CutStrategy, seed: u64) -> Result<MaxFlowStructure> {
    Regional::build(MaxFlowKernel { strategy }, g, LifecycleParams::new(r, seed))
}

/// Largest declared quality over the live region sketches.
pub fn max_region_quality(st: &MaxFlowStructure) -> f64 {
    st.sketches().map(|(_, s)| s.cert.quality).fold(1.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Action;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cap(n: usize, edges: &[(usize, usize, f64)]) -> WeightedGraph {
        WeightedGraph::from_edges(n, Mode::Capacity, edges.iter().copied()).unwrap()
    }

    /// Minimum over all vertex bipartitions separating the two sides.
    fn brute_cut(g: &WeightedGraph, src: &[usize], snk: &[usize]) -> f64 {
        let n = g.n();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if src.iter().any(|&x| mask >> x & 1 == 0) || snk.iter().any(|&x| mask >> x & 1 == 1) {
                continue;
            }
            let c: f64 = g
                .edges()
                .filter(|e| (mask >> e.u & 1) != (mask >> e.v & 1))
                .map(|e| e.weight)
                .sum();
            best = best.min(c);
        }
        best
    }

    fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> WeightedGraph {
        let mut g = WeightedGraph::new(n, Mode::Capacity);
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(p) {
                    g.insert_edge(a, b, rng.gen_range(1..6) as f64).unwrap();
                }
            }
        }
        g
    }

    #[test]
    fn flow_examples() {
        assert_eq!(max_flow(&cap(3, &[(0, 1, 3.0), (1, 2, 5.0)]), 0, 2).unwrap(), 3.0);
        let two = cap(4, &[(0, 1, 1.0), (1, 3, 1.0), (0, 2, 1.0), (2, 3, 1.0)]);
        assert_eq!(max_flow(&two, 0, 3).unwrap(), 2.0);
        let c4 = cap(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]);
        assert_eq!(max_flow(&c4, 0, 2).unwrap(), brute_cut(&c4, &[0], &[2]));
        assert_eq!(max_flow(&cap(4, &[(0, 1, 1.0)]), 0, 3).unwrap(), 0.0);
    }

    #[test]
    fn terminal_cut_examples() {
        let tri = cap(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        assert_eq!(terminal_cut_value(&tri, &[0, 1], &[0]).unwrap(), 2.0);
        let p = cap(3, &[(0, 1, 3.0), (1, 2, 5.0)]);
        assert_eq!(terminal_cut_value(&p, &[0, 2], &[0]).unwrap(), 3.0);
        let e = cap(2, &[(0, 1, 2.5)]);
        assert_eq!(terminal_cut_value(&e, &[0, 1], &[1]).unwrap(), 2.5);
        assert!(terminal_cut_value(&e, &[0, 1], &[]).is_err());
        assert!(terminal_cut_value(&e, &[0, 1], &[0, 1]).is_err());
        let profile = cut_profile(&tri, &[0, 1, 2]).unwrap();
        assert_eq!(profile.iter().map(|p| p.1).collect::<Vec<_>>(), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn contract_exact_examples() {
        // tree: two leaves joined through a bottleneck
        let tree = cap(6, &[(0, 2, 4.0), (2, 3, 1.5), (3, 1, 7.0), (3, 4, 2.0), (2, 5, 3.0)]);
        let sp = cut_sparsify(&tree, &[0, 1], CutStrategy::ContractExact).unwrap();
        assert_eq!(sp.graph.m(), 1);
        let e = sp.graph.edges().next().unwrap();
        assert_eq!(((e.u.min(e.v), e.u.max(e.v)), e.weight), ((0, 1), 1.5));
        assert_eq!(cut_quality_audit(&tree, &[0, 1], &sp).unwrap(), 1.0);

        let id = cut_sparsify(&tree, &[0, 1], CutStrategy::Identity).unwrap();
        assert_eq!(id.graph, tree);

        let all: Vec<usize> = (0..6).collect();
        let sp = cut_sparsify(&tree, &all, CutStrategy::ContractExact).unwrap();
        assert_eq!(sp.graph.m(), tree.m());

        let many: Vec<usize> = (0..12).collect();
        let big = cap(12, &[(0, 1, 1.0)]);
        assert!(cut_sparsify(&big, &many, CutStrategy::ContractExact).unwrap().fell_back);
    }

    #[test]
    fn audit_measures_doubled_mincut() {
        // s - x - t with the unique min cut on (x, t)
        let g = cap(3, &[(0, 1, 5.0), (1, 2, 2.0)]);
        let mut h = cut_sparsify(&g, &[0, 2], CutStrategy::Identity).unwrap();
        assert_eq!(cut_quality_audit(&g, &[0, 2], &h).unwrap(), 1.0);
        h.graph = cap(3, &[(0, 1, 5.0), (1, 2, 4.0)]);
        assert!((cut_quality_audit(&g, &[0, 2], &h).unwrap() - 2.0).abs() < 1e-12);
        h.graph = cap(3, &[(0, 1, 5.0), (1, 2, 1.0)]);
        assert!(matches!(cut_quality_audit(&g, &[0, 2], &h), Err(Error::CutLowerBound { .. })));
    }

    #[test]
    fn random_contractions_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let g = random_graph(9, 0.35, &mut rng);
            let k: Vec<usize> = (0..4).collect();
            let sp = cut_sparsify(&g, &k, CutStrategy::ContractExact).unwrap();
            let q = cut_quality_audit(&g, &k, &sp).unwrap();
            assert!((q - 1.0).abs() <= 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn flow_equals_brute_cut(seed in 0u64..10_000, n in 3usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(n, 0.4, &mut rng);
            let f = max_flow(&g, 0, n - 1).unwrap();
            prop_assert!((f - brute_cut(&g, &[0], &[n - 1])).abs() < 1e-9);
        }

        #[test]
        fn union_of_quality_q_pieces_is_quality_q(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // two pieces sharing vertices 3 and 4; terminals include them
            let mut a = random_graph(10, 0.0, &mut rng);
            let mut b = a.clone();
            for _ in 0..10 {
                let (x, y) = (rng.gen_range(0..5), rng.gen_range(0..5));
                if x != y { a.insert_edge(x, y, rng.gen_range(1..5) as f64).unwrap(); }
                let (x, y) = (rng.gen_range(3..10), rng.gen_range(3..10));
                if x != y { b.insert_edge(x, y, rng.gen_range(1..5) as f64).unwrap(); }
            }
            let ka = vec![0, 3, 4];
            let kb = vec![3, 4, 9];
            let factor = rng.gen_range(1.0..2.5);
            let ha = cut_sparsify(&a, &ka, CutStrategy::ContractExact).unwrap();
            let mut hb = cut_sparsify(&b, &kb, CutStrategy::Identity).unwrap();
            hb.graph = WeightedGraph::from_edges(10, Mode::Capacity, b.edges().map(|e| (e.u, e.v, e.weight * factor))).unwrap();
            let qa = cut_quality_audit(&a, &ka, &ha).unwrap();
            let qb = cut_quality_audit(&b, &kb, &hb).unwrap();
            let q = qa.max(qb);
            let g = WeightedGraph::union([&a, &b], 10, Mode::Capacity).unwrap();
            let h = WeightedGraph::union([&ha.graph, &hb.graph], 10, Mode::Capacity).unwrap();
            let k = vec![0, 9];
            let whole = CutSparsifier { terminals: k.clone(), graph: h, quality: q, strategy: CutStrategy::Identity, fell_back: false };
            let measured = cut_quality_audit(&g, &k, &whole).unwrap();
            prop_assert!(measured <= q + 1e-9);
        }
    }

    fn grid(w: usize, h: usize) -> WeightedGraph {
        let mut g = WeightedGraph::new(w * h, Mode::Capacity);
        for y in 0..h {
            for x in 0..w {
                let v = y * w + x;
                if x + 1 < w {
                    g.insert_edge(v, v + 1, 1.0 + (v % 3) as f64).unwrap();
                }
                if y + 1 < h {
                    g.insert_edge(v, v + w, 1.0 + (v % 2) as f64).unwrap();
                }
            }
        }
        g
    }

    #[test]
    fn isolated_endpoint_has_zero_flow() {
        let mut g = grid(4, 4);
        g.insert_edge(0, 1, 1.0).unwrap();
        let mut big = WeightedGraph::new(17, Mode::Capacity);
        for e in g.edges() {
            big.insert_edge(e.u, e.v, e.weight).unwrap();
        }
        let mut st = mf_new(big, 9, CutStrategy::ContractExact, 1).unwrap();
        assert_eq!(st.query(16, 3).unwrap(), 0.0);
        assert_eq!(st.query(3, 16).unwrap(), max_flow(st.graph(), 3, 16).unwrap());
    }

    #[test]
    fn dynamic_identity_is_exact() {
        let mut st = mf_new(grid(6, 6), 9, CutStrategy::Identity, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..40 {
            let g = st.graph();
            let a = if rng.gen_bool(0.5) {
                let ids: Vec<_> = g.edges().map(|e| e.id).collect();
                Action::Delete(ids[rng.gen_range(0..ids.len())])
            } else {
                let (u, v) = (rng.gen_range(0..36), rng.gen_range(0..36));
                if u == v {
                    continue;
                }
                Action::Insert { u, v, weight: 2.0 }
            };
            st.update(a).unwrap();
            let (s, t) = (rng.gen_range(0..36), rng.gen_range(0..36));
            if s != t {
                let oracle = max_flow(st.graph(), s, t).unwrap();
                let ans = st.query(s, t).unwrap();
                assert!((ans - oracle).abs() <= 1e-9 * oracle.max(1.0));
            }
        }
    }

    #[test]
    fn dynamic_contract_exact_on_trees() {
        // a binary tree cut into regions; regions are trees
        let n = 31;
        let g = WeightedGraph::from_edges(n, Mode::Capacity, (1..n).map(|v| ((v - 1) / 2, v, 1.0 + (v % 4) as f64))).unwrap();
        let mut st = mf_new(g.clone(), 8, CutStrategy::ContractExact, 1).unwrap();
        for (s, t) in [(0, 30), (15, 16), (7, 22)] {
            assert_eq!(st.query(s, t).unwrap(), max_flow(&g, s, t).unwrap());
        }
    }

    #[test]
    fn injected_lossy_region_stays_sandwiched() {
        let g = grid(6, 6);
        let mut st = mf_new(g.clone(), 9, CutStrategy::Identity, 1).unwrap();
        let id = st.division().region_ids()[0];
        let doubled: Vec<(usize, usize, f64)> = st
            .division()
            .region(id)
            .unwrap()
            .edge_refs(&g)
            .map(|e| (e.u, e.v, 2.0 * e.weight))
            .collect();
        let cert = CutCert {
            quality: 2.0,
            strategy: CutStrategy::Identity,
            fell_back: false,
        };
        st.override_sketch(id, doubled, cert).unwrap();
        assert_eq!(max_region_quality(&st), 2.0);
        for s in 0..36 {
            for t in [35 - s, (s * 7) % 36] {
                if s == t {
                    continue;
                }
                let oracle = max_flow(&g, s, t).unwrap();
                let ans = st.query(s, t).unwrap();
                assert!(ans >= oracle - 1e-9 && ans <= 2.0 * oracle + 1e-9);
            }
        }
    }
}
