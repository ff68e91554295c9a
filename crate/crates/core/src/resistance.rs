//! Exact potentials and effective resistances.
//!
//! Each connected component is solved separately. Components of up to
//! [`DIRECT_LIMIT`] vertices use a sparse direct factorization (Gaussian
//! elimination in minimum-degree order, grounded at the last vertex);
//! larger ones use Jacobi-preconditioned conjugate gradients.

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{Demand, Potential, WeightedGraph};

/// Largest component solved by direct factorization.
pub const DIRECT_LIMIT: usize = 2000;
/// Relative residual target for the iterative solver.
pub const CG_TOLERANCE: f64 = 1e-10;

/// Elimination factor of a connected Laplacian. Vertex `order[i]` was
/// eliminated with pivot `pivot[i]` against the neighbours in `nbrs[i]`;
/// `ground` is the last vertex and is pinned to zero.
#[derive(Debug, Clone)]
pub struct LaplacianFactor {
    n: usize,
    order: Vec<usize>,
    pivot: Vec<f64>,
    nbrs: Vec<Vec<(usize, f64)>>,
    ground: usize,
}

impl LaplacianFactor {
    /// Factors a connected graph on `0..n` given as merged `(u, v, w)` edges.
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut adj: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n];
        for &(u, v, w) in edges {
            *adj[u].entry(v).or_insert(0.0) += w;
            *adj[v].entry(u).or_insert(0.0) += w;
        }
        let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
        let mut order = Vec::with_capacity(n);
        let mut pivot = Vec::with_capacity(n);
        let mut nbrs = Vec::with_capacity(n);
        while queue.len() > 1 {
            let (_, v) = queue.pop_first().unwrap();
            let row: Vec<(usize, f64)> = {
                let mut r: Vec<_> = adj[v].drain().collect();
                r.sort_unstable_by_key(|&(a, _)| a);
                r
            };
            let total: f64 = row.iter().map(|&(_, w)| w).sum();
            for &(a, _) in &row {
                queue.remove(&(adj[a].len(), a));
                adj[a].remove(&v);
            }
            for (i, &(a, wa)) in row.iter().enumerate() {
                for &(b, wb) in &row[i + 1..] {
                    let c = wa * wb / total;
                    *adj[a].entry(b).or_insert(0.0) += c;
                    *adj[b].entry(a).or_insert(0.0) += c;
                }
            }
            for &(a, _) in &row {
                queue.insert((adj[a].len(), a));
            }
            order.push(v);
            pivot.push(total);
            nbrs.push(row);
        }
        let ground = queue.pop_first().map(|(_, v)| v).unwrap_or(0);
        Self {
            n,
            order,
            pivot,
            nbrs,
            ground,
        }
    }

    /// Solves `L x = b` for `b` summing to zero; the ground gets potential 0.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = b.to_vec();
        for (i, &v) in self.order.iter().enumerate() {
            let bv = rhs[v];
            if bv != 0.0 {
                let w = self.pivot[i];
                for &(a, c) in &self.nbrs[i] {
                    rhs[a] += c / w * bv;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        x[self.ground] = 0.0;
        for (i, &v) in self.order.iter().enumerate().rev() {
            let mut acc = rhs[v];
            for &(a, c) in &self.nbrs[i] {
                acc += c * x[a];
            }
            x[v] = acc / self.pivot[i];
        }
        x
    }

    pub fn fill(&self) -> usize {
        self.nbrs.iter().map(Vec::len).sum()
    }
}

/// One connected component relabelled onto `0..k`.
struct Component {
    vertices: Vec<usize>,
    edges: Vec<(usize, usize, f64)>,
}

fn split_components(g: &WeightedGraph) -> (Vec<usize>, Vec<Component>) {
    let (label, count) = g.components();
    let mut local = vec![0usize; g.n()];
    let mut comps: Vec<Component> = (0..count)
        .map(|_| Component {
            vertices: Vec::new(),
            edges: Vec::new(),
        })
        .collect();
    for v in 0..g.n() {
        let c = &mut comps[label[v]];
        local[v] = c.vertices.len();
        c.vertices.push(v);
    }
    for (u, v, w) in g.merged_edges() {
        comps[label[u]].edges.push((local[u], local[v], w));
    }
    (label, comps)
}

fn laplacian_apply(n: usize, edges: &[(usize, usize, f64)], x: &[f64], y: &mut [f64]) {
    y[..n].iter_mut().for_each(|v| *v = 0.0);
    for &(u, v, w) in edges {
        let d = w * (x[u] - x[v]);
        y[u] += d;
        y[v] -= d;
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn center(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Laplacian of a connected component in compressed row form, diagonal kept
/// separately.
struct Csr {
    start: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
    diag: Vec<f64>,
}

impl Csr {
    fn new(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut start = vec![0usize; n + 1];
        let mut diag = vec![0.0; n];
        for &(u, v, w) in edges {
            start[u + 1] += 1;
            start[v + 1] += 1;
            diag[u] += w;
            diag[v] += w;
        }
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut col = vec![0usize; start[n]];
        let mut val = vec![0.0; start[n]];
        for &(u, v, w) in edges {
            col[fill[u]] = v;
            val[fill[u]] = w;
            fill[u] += 1;
            col[fill[v]] = u;
            val[fill[v]] = w;
            fill[v] += 1;
        }
        Self { start, col, val, diag }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = self.diag[i] * x[i];
            for k in self.start[i]..self.start[i + 1] {
                acc -= self.val[k] * x[self.col[k]];
            }
            *yi = acc;
        }
    }
}

/// Jacobi-preconditioned CG on a connected Laplacian with `b ⟂ 1`, run to
/// relative residual `tol`.
fn conjugate_gradient(n: usize, edges: &[(usize, usize, f64)], b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let lap = Csr::new(n, edges);
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&lap.diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let max_iter = 20 * n + 1000;
    for _ in 0..max_iter {
        lap.apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * bnorm {
            center(&mut x);
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / lap.diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // recompute the true residual before giving up
    center(&mut x);
    lap.apply(&x, &mut ap);
    let res = norm(&b.iter().zip(&ap).map(|(b, a)| b - a).collect::<Vec<_>>()) / bnorm;
    if res <= tol {
        Ok(x)
    } else {
        Err(Error::NoConvergence(res))
    }
}

fn solve_component(c: &Component, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = c.vertices.len();
    if n == 1 || b.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; n]);
    }
    if n > DIRECT_LIMIT {
        return conjugate_gradient(n, &c.edges, b, tol);
    }
    let factor = LaplacianFactor::new(n, &c.edges);
    let mut x = factor.solve(b);
    // one step of iterative refinement
    let mut lx = vec![0.0; n];
    laplacian_apply(n, &c.edges, &x, &mut lx);
    let r: Vec<f64> = b.iter().zip(&lx).map(|(b, l)| b - l).collect();
    if norm(&r) > 1e-14 * norm(b) {
        let dx = factor.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
    }
    center(&mut x);
    Ok(x)
}

/// Solves `L phi = d`, grounding each component so its potentials sum to zero.
pub fn solve_potentials(g: &WeightedGraph, d: &Demand) -> Result<Potential> {
    solve_potentials_tol(g, d, CG_TOLERANCE)
}

/// [`solve_potentials`] with an explicit relative residual target for
/// components large enough to be solved iteratively.
pub fn solve_potentials_tol(g: &WeightedGraph, d: &Demand, tol: f64) -> Result<Potential> {
    if d.0.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: d.0.len(),
        });
    }
    let (_, comps) = split_components(g);
    let scale: f64 = d.0.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut phi = vec![0.0; g.n()];
    for c in &comps {
        let b: Vec<f64> = c.vertices.iter().map(|&v| d.0[v]).collect();
        let sum: f64 = b.iter().sum();
        if sum.abs() > 1e-12 * scale {
            return Err(Error::InfeasibleDemand(format!(
                "demand sums to {sum} on the component containing vertex {}",
                c.vertices[0]
            )));
        }
        let x = solve_component(c, &b, tol)?;
        for (i, &v) in c.vertices.iter().enumerate() {
            phi[v] = x[i];
        }
    }
    Ok(Potential(phi))
}

/// `R(s, t) = chi^T L^+ chi`. Zero when `s == t`, infinite when disconnected.
pub fn effective_resistance(g: &WeightedGraph, s: usize, t: usize) -> Result<f64> {
    effective_resistance_tol(g, s, t, CG_TOLERANCE)
}

/// [`effective_resistance`] with an explicit relative residual target for
/// the iterative solver.
pub fn effective_resistance_tol(g: &WeightedGraph, s: usize, t: usize, tol: f64) -> Result<f64> {
    for x in [s, t] {
        if x >= g.n() {
            return Err(Error::UnknownVertex(x));
        }
    }
    if s == t {
        return Ok(0.0);
    }
    if !g.connected(s, t)? {
        return Ok(f64::INFINITY);
    }
    let phi = solve_potentials_tol(g, &Demand::chi(g.n(), s, t), tol)?;
    Ok(phi.0[s] - phi.0[t])
}

/// Effective resistances for many pairs, sharing one factorization per
/// component. Small components use a dense grounded inverse.
pub fn pair_resistances(g: &WeightedGraph, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let (label, comps) = split_components(g);
    let mut local = vec![0usize; g.n()];
    for c in &comps {
        for (i, &v) in c.vertices.iter().enumerate() {
            local[v] = i;
        }
    }
    let mut by_comp: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut out = vec![0.0; pairs.len()];
    for (i, &(s, t)) in pairs.iter().enumerate() {
        if s >= g.n() || t >= g.n() {
            return Err(Error::UnknownVertex(s.max(t)));
        }
        if s == t {
            continue;
        }
        if label[s] != label[t] {
            out[i] = f64::INFINITY;
        } else {
            by_comp.entry(label[s]).or_default().push(i);
        }
    }
    for (ci, idxs) in by_comp {
        let c = &comps[ci];
        let k = c.vertices.len();
        if k <= DIRECT_LIMIT {
            let inv = grounded_inverse(k, &c.edges);
            let at = |a: usize, b: usize| -> f64 {
                if a == k - 1 || b == k - 1 {
                    0.0
                } else {
                    inv[(a, b)]
                }
            };
            for i in idxs {
                let (a, b) = (local[pairs[i].0], local[pairs[i].1]);
                out[i] = at(a, a) + at(b, b) - 2.0 * at(a, b);
            }
        } else {
            for i in idxs {
                let (a, b) = (local[pairs[i].0], local[pairs[i].1]);
                let mut rhs = vec![0.0; k];
                rhs[a] = 1.0;
                rhs[b] = -1.0;
                let x = conjugate_gradient(k, &c.edges, &rhs, CG_TOLERANCE)?;
                out[i] = x[a] - x[b];
            }
        }
    }
    Ok(out)
}

/// Inverse of the Laplacian with the last vertex grounded.
fn grounded_inverse(k: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let m = k - 1;
    let mut l = DMatrix::<f64>::zeros(m, m);
    for &(u, v, w) in edges {
        if u < m {
            l[(u, u)] += w;
        }
        if v < m {
            l[(v, v)] += w;
        }
        if u < m && v < m {
            l[(u, v)] -= w;
            l[(v, u)] -= w;
        }
    }
    match l.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => l.try_inverse().expect("grounded Laplacian of a connected graph is invertible"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Flow, Mode};
    use rand::{Rng, SeedableRng};

    fn unit(n: usize, edges: &[(usize, usize)]) -> WeightedGraph {
        WeightedGraph::from_edges(n, Mode::Conductance, edges.iter().map(|&(u, v)| (u, v, 1.0))).unwrap()
    }

    /// Dense pseudo-inverse oracle via SVD.
    fn pinv_resistance(g: &WeightedGraph, s: usize, t: usize) -> f64 {
        let n = g.n();
        let l = g.dense_laplacian();
        let m = DMatrix::from_fn(n, n, |i, j| l[i][j]);
        let p = m.pseudo_inverse(1e-10).unwrap();
        p[(s, s)] + p[(t, t)] - 2.0 * p[(s, t)]
    }

    fn random_connected(n: usize, extra: usize, rng: &mut impl Rng) -> WeightedGraph {
        let mut g = WeightedGraph::new(n, Mode::Conductance);
        for v in 1..n {
            g.insert_edge(v, rng.gen_range(0..v), rng.gen_range(0.1..5.0)).unwrap();
        }
        for _ in 0..extra {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a != b {
                g.insert_edge(a, b, rng.gen_range(0.1..5.0)).unwrap();
            }
        }
        g
    }

    #[test]
    fn potential_examples() {
        let g = unit(2, &[(0, 1)]);
        let phi = solve_potentials(&g, &Demand::chi(2, 0, 1)).unwrap();
        assert!((phi.0[0] - 0.5).abs() < 1e-14 && (phi.0[1] + 0.5).abs() < 1e-14);

        let zero = solve_potentials(&g, &Demand::zeros(2)).unwrap();
        assert_eq!(zero.0, vec![0.0, 0.0]);

        let path = unit(3, &[(0, 1), (1, 2)]);
        let phi = solve_potentials(&path, &Demand::chi(3, 0, 2)).unwrap();
        for (a, b) in phi.0.iter().zip([1.0, 0.0, -1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn infeasible_demand_across_components() {
        let g = unit(4, &[(0, 1), (2, 3)]);
        assert!(matches!(
            solve_potentials(&g, &Demand::chi(4, 0, 2)),
            Err(Error::InfeasibleDemand(_))
        ));
        assert!(matches!(
            solve_potentials(&g, &Demand(vec![1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn resistance_examples() {
        assert!((effective_resistance(&unit(3, &[(0, 1), (1, 2)]), 0, 2).unwrap() - 2.0).abs() < 1e-14);
        let tri = unit(3, &[(0, 1), (1, 2), (0, 2)]);
        let r = effective_resistance(&tri, 0, 1).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-14);
        assert!((r - pinv_resistance(&tri, 0, 1)).abs() < 1e-12);
        assert_eq!(effective_resistance(&unit(4, &[(0, 1), (2, 3)]), 0, 3).unwrap(), f64::INFINITY);
        assert_eq!(effective_resistance(&tri, 2, 2).unwrap(), 0.0);
        assert_eq!(effective_resistance(&tri, 0, 9), Err(Error::UnknownVertex(9)));
    }

    #[test]
    fn direct_matches_pseudo_inverse_and_residual_is_small() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(2..40);
            let g = random_connected(n, 2 * n, &mut rng);
            let (s, t) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if s == t {
                continue;
            }
            let r = effective_resistance(&g, s, t).unwrap();
            let oracle = pinv_resistance(&g, s, t);
            assert!((r - oracle).abs() <= 1e-9 * oracle, "{r} vs {oracle}");

            let d = Demand::chi(n, s, t);
            let phi = solve_potentials(&g, &d).unwrap();
            let lphi = g.laplacian().apply(&phi.0).unwrap();
            let res = norm(&d.0.iter().zip(&lphi).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(res <= 1e-10 * norm(&d.0));
            assert!(phi.0.iter().sum::<f64>().abs() < 1e-10);
        }
    }

    #[test]
    fn cg_matches_direct() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 300;
        let g = random_connected(n, 600, &mut rng);
        let (_, comps) = split_components(&g);
        let c = &comps[0];
        let mut b = vec![0.0; n];
        b[3] = 1.0;
        b[200] = -1.0;
        let x1 = conjugate_gradient(n, &c.edges, &b, CG_TOLERANCE).unwrap();
        let x2 = solve_component(c, &b, CG_TOLERANCE).unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-7 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn pair_resistances_agree_with_single_solves() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut g = random_connected(25, 40, &mut rng);
        // second component
        let mut h = WeightedGraph::new(30, Mode::Conductance);
        for e in g.edges() {
            h.insert_edge(e.u, e.v, e.weight).unwrap();
        }
        h.insert_edge(26, 27, 2.0).unwrap();
        g = h;
        let pairs = vec![(0, 5), (3, 24), (26, 27), (0, 26), (4, 4)];
        let rs = pair_resistances(&g, &pairs).unwrap();
        for (&(s, t), r) in pairs.iter().zip(&rs) {
            let single = effective_resistance(&g, s, t).unwrap();
            if single.is_infinite() {
                assert!(r.is_infinite());
            } else {
                assert!((r - single).abs() <= 1e-9 * (1.0 + single));
            }
        }
    }

    #[test]
    fn energy_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.gen_range(3..30);
            let g = random_connected(n, n, &mut rng);
            let phi = solve_potentials(&g, &Demand::chi(n, 0, n - 1)).unwrap();
            let f = Flow::from_potential(&g, &phi);
            let r = phi.0[0] - phi.0[n - 1];
            assert!((f.energy(&g) - r).abs() <= 1e-9 * r);
            assert!((f.value(&g, 0) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rayleigh_monotonicity_and_triangle_inequality() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let n = rng.gen_range(4..20);
            let g = random_connected(n, n, &mut rng);
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
            let base = pair_resistances(&g, &pairs).unwrap();
            let r = |a: usize, b: usize| base[a * n + b];
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        assert!(r(a, b) <= r(a, c) + r(c, b) + 1e-9);
                    }
                }
            }
            let ids: Vec<_> = g.edges().map(|e| e.id).collect();
            for id in ids.into_iter().take(5) {
                let mut h = g.clone();
                h.delete_edge(id).unwrap();
                let after = pair_resistances(&h, &pairs).unwrap();
                for (x, y) in base.iter().zip(&after) {
                    assert!(*y >= *x - 1e-9 * x.max(1.0));
                }
            }
        }
    }
}
