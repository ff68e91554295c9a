//! Seeded instance and script generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Mode, WeightedGraph};
use crate::script::Op;

/// `floor(sqrt(n))`-sided lattice with unit weights.
pub fn grid(n: usize, mode: Mode) -> WeightedGraph {
    let side = (n as f64).sqrt().floor() as usize;
    grid_wh(side, side, mode)
}

pub fn grid_wh(w: usize, h: usize, mode: Mode) -> WeightedGraph {
    let mut g = WeightedGraph::new(w * h, mode);
    for y in 0..h {
        for x in 0..w {
            let v = y * w + x;
            if x + 1 < w {
                g.insert_edge(v, v + 1, 1.0).expect("lattice edge");
            }
            if y + 1 < h {
                g.insert_edge(v, v + w, 1.0).expect("lattice edge");
            }
        }
    }
    g
}

/// Lattice on exactly `n` vertices: `w x (n / w)` with `w` the divisor of
/// `n` closest to `sqrt(n)` from below.
pub fn grid_exact(n: usize, mode: Mode) -> WeightedGraph {
    let root = (n as f64).sqrt().floor() as usize;
    let w = (1..=root.max(1)).rev().find(|w| n.is_multiple_of(*w)).unwrap_or(1);
    grid_wh(w, n / w, mode)
}

/// A planar instance and the triangulation it was cut from. Scripts
/// only insert triangulation edges, so every intermediate graph is planar.
#[derive(Debug, Clone)]
pub struct PlanarInstance {
    pub graph: WeightedGraph,
    pub pool: Vec<(usize, usize, f64)>,
}

/// Triangulated lattice on exactly `n` vertices (one random diagonal per
/// cell, random weights in `[1, 4)`), with each edge then deleted with
/// probability `deletion`.
pub fn random_planar(n: usize, deletion: f64, mode: Mode, seed: u64) -> Result<PlanarInstance> {
    if n < 2 {
        return Err(Error::InvalidParameter("random planar instance needs n >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (n as f64).sqrt().ceil() as usize;
    let mut pool = Vec::new();
    for v in 0..n {
        let x = v % w;
        let right = (x + 1 < w && v + 1 < n).then_some(v + 1);
        let down = (v + w < n).then_some(v + w);
        if let Some(r) = right {
            pool.push((v, r));
        }
        if let Some(d) = down {
            pool.push((v, d));
        }
        if let (Some(r), Some(d)) = (right, down) {
            if d + 1 < n {
                if rng.gen_bool(0.5) {
                    pool.push((v, d + 1));
                } else {
                    pool.push((r, d));
                }
            }
        }
    }
    let pool: Vec<(usize, usize, f64)> = pool.into_iter().map(|(a, b)| (a, b, rng.gen_range(1.0..4.0))).collect();
    let mut g = WeightedGraph::new(n, mode);
    for &(a, b, wt) in &pool {
        if !rng.gen_bool(deletion) {
            g.insert_edge(a, b, wt)?;
        }
    }
    Ok(PlanarInstance { graph: g, pool })
}

/// Random spanning forest of a planar instance: the pool restricted to a
/// random spanning tree of each component.
pub fn random_forest(n: usize, mode: Mode, seed: u64) -> Result<PlanarInstance> {
    let inst = random_planar(n, 0.0, mode, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut edges = inst.pool.clone();
    edges.shuffle(&mut rng);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut g = WeightedGraph::new(n, mode);
    for (a, b, w) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            g.insert_edge(a, b, w)?;
        }
    }
    Ok(PlanarInstance { graph: g, pool: inst.pool })
}

/// Which query line a generated script uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Energy,
    Flow,
    Distance,
}

impl QueryKind {
    fn op(self, s: usize, t: usize) -> Op {
        match self {
            QueryKind::Energy => Op::Query { s, t },
            QueryKind::Flow => Op::QueryFlow { s, t },
            QueryKind::Distance => Op::QueryDist { s, t },
        }
    }
}

/// `updates` random deletions of present pool edges and insertions of
/// absent ones, with `queries` random queries spread uniformly among them.
/// With `keep_forest`, deletions and insertions keep the graph acyclic.
pub fn random_script(
    inst: &PlanarInstance,
    updates: usize,
    queries: usize,
    kind: QueryKind,
    keep_forest: bool,
    seed: u64,
) -> Vec<Op> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = inst.graph.n();
    let mut present: Vec<bool> = inst
        .pool
        .iter()
        .map(|&(a, b, _)| inst.graph.find_edge(a, b).is_some())
        .collect();
    let mut slots: Vec<bool> = vec![false; updates + queries];
    for s in rand::seq::index::sample(&mut rng, updates + queries, queries) {
        slots[s] = true;
    }
    let mut ops = Vec::with_capacity(updates + queries);
    for is_query in slots {
        if is_query {
            let s = rng.gen_range(0..n);
            let mut t = rng.gen_range(0..n - 1);
            if t >= s {
                t += 1;
            }
            ops.push(kind.op(s, t));
            continue;
        }
        let on: Vec<usize> = (0..present.len()).filter(|&i| present[i]).collect();
        let off: Vec<usize> = (0..present.len()).filter(|&i| !present[i]).collect();
        let delete = !on.is_empty() && (off.is_empty() || rng.gen_bool(0.5));
        if delete {
            let i = on[rng.gen_range(0..on.len())];
            present[i] = false;
            let (u, v, _) = inst.pool[i];
            ops.push(Op::Delete { u, v });
        } else if keep_forest {
            // insert an absent pool edge joining two different trees
            let mut parent: Vec<usize> = (0..n).collect();
            fn find(p: &mut [usize], mut x: usize) -> usize {
                while p[x] != x {
                    p[x] = p[p[x]];
                    x = p[x];
                }
                x
            }
            for &i in &on {
                let (a, b, _) = inst.pool[i];
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
            let joinable: Vec<usize> = off
                .iter()
                .copied()
                .filter(|&i| {
                    let (a, b, _) = inst.pool[i];
                    find(&mut parent, a) != find(&mut parent, b)
                })
                .collect();
            if joinable.is_empty() {
                let i = on[rng.gen_range(0..on.len())];
                present[i] = false;
                let (u, v, _) = inst.pool[i];
                ops.push(Op::Delete { u, v });
            } else {
                let i = joinable[rng.gen_range(0..joinable.len())];
                present[i] = true;
                let (u, v, weight) = inst.pool[i];
                ops.push(Op::Insert { u, v, weight });
            }
        } else {
            let i = off[rng.gen_range(0..off.len())];
            present[i] = true;
            let (u, v, weight) = inst.pool[i];
            ops.push(Op::Insert { u, v, weight });
        }
    }
    ops
}

/// Scripts on `graph` that delete and re-insert its own edges.
pub fn edge_pool_instance(graph: WeightedGraph) -> PlanarInstance {
    let pool = graph.edges().map(|e| (e.u, e.v, e.weight)).collect();
    PlanarInstance { graph, pool }
}

/// Random `rows x cols` 0/1 matrix, each entry set with probability `density`.
pub fn random_matrix(rows: usize, cols: usize, density: f64, seed: u64) -> Vec<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows).map(|_| (0..cols).map(|_| rng.gen_bool(density)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::write_graph;

    #[test]
    fn grid_counts() {
        let g = grid(16, Mode::Conductance);
        assert_eq!((g.n(), g.m()), (16, 24));
        let g = grid(10, Mode::Conductance);
        assert_eq!((g.n(), g.m()), (9, 12));
    }

    #[test]
    fn exact_grid_sizes() {
        for (n, m) in [(1000, 40 * 24 + 25 * 39), (10_000, 2 * 100 * 99), (100_000, 250 * 399 + 400 * 249), (7, 6)] {
            let g = grid_exact(n, Mode::Conductance);
            assert_eq!((g.n(), g.m()), (n, m));
        }
    }

    #[test]
    fn planar_is_deterministic_and_sparse() {
        let a = random_planar(200, 0.2, Mode::Conductance, 7).unwrap();
        let b = random_planar(200, 0.2, Mode::Conductance, 7).unwrap();
        assert_eq!(write_graph(&a.graph), write_graph(&b.graph));
        assert!(a.pool.len() <= 3 * 200 - 6);
        assert!(a.graph.m() < a.pool.len());
    }

    #[test]
    fn forest_is_acyclic_and_scripts_keep_it() {
        let inst = random_forest(150, Mode::Conductance, 3).unwrap();
        let (_, comps) = inst.graph.components();
        assert_eq!(inst.graph.m() + comps, 150);
        let ops = random_script(&inst, 200, 20, QueryKind::Energy, true, 4);
        let mut g = inst.graph.clone();
        for op in ops {
            match op {
                Op::Insert { u, v, weight } => {
                    g.insert_edge(u, v, weight).unwrap();
                }
                Op::Delete { u, v } => {
                    g.delete_edge(g.find_edge(u, v).unwrap()).unwrap();
                }
                _ => {}
            }
            let (_, comps) = g.components();
            assert_eq!(g.m() + comps, 150);
        }
    }

    #[test]
    fn scripts_have_requested_shape() {
        let inst = random_planar(100, 0.1, Mode::Conductance, 1).unwrap();
        let ops = random_script(&inst, 50, 10, QueryKind::Distance, false, 2);
        assert_eq!(ops.iter().filter(|o| o.is_query()).count(), 10);
        assert_eq!(ops.iter().filter(|o| o.is_update()).count(), 50);
        assert_eq!(ops, random_script(&inst, 50, 10, QueryKind::Distance, false, 2));
    }

    #[test]
    fn matrix_shape() {
        let m = random_matrix(3, 3, 0.5, 1);
        assert_eq!((m.len(), m[0].len()), (3, 3));
        assert_eq!(m, random_matrix(3, 3, 0.5, 1));
    }
}
