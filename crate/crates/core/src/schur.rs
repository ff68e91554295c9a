//! Schur complements by Gaussian elimination and spectral sparsification by
//! effective-resistance sampling.
//!
//! [`approx_schur`] composes the two: eliminate every non-terminal exactly,
//! then sparsify the resulting terminal graph. Edges whose expected sample
//! multiplicity is at least one are kept deterministically at their exact
//! weight; the remaining leverage mass is sampled with replacement and
//! reweighted so the estimator stays unbiased.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Mode, WeightedGraph};
use crate::resistance::pair_resistances;

/// Default `C_s` in the sample budget `ceil(C_s k eps^-2 ln(n / delta))`.
pub const DEFAULT_SAMPLING_CONSTANT: f64 = 4.0;

/// Exact Schur complement onto a terminal set.
#[derive(Debug, Clone)]
pub struct SchurResult {
    pub terminals: Vec<usize>,
    /// Conductance graph on the input's id space; only terminals carry edges.
    pub graph: WeightedGraph,
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsifierCertificate {
    pub eps: f64,
    pub delta: f64,
    /// The sample budget `q`.
    pub samples: usize,
    pub seed: u64,
    /// Edges kept deterministically.
    pub kept: usize,
    /// Random draws spent on the remaining edges.
    pub drawn: usize,
    pub output_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsifyParams {
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    pub sampling_constant: f64,
}

impl SparsifyParams {
    pub fn new(eps: f64, delta: f64, seed: u64) -> Self {
        Self {
            eps,
            delta,
            seed,
            sampling_constant: DEFAULT_SAMPLING_CONSTANT,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.sampling_constant.is_nan() || self.sampling_constant <= 0.0 {
            return Err(Error::InvalidParameter("sampling constant must be positive".into()));
        }
        Ok(())
    }

    /// `ceil(C_s k eps^-2 ln(n / delta))`, at least 1.
    pub fn budget(&self, k: usize, n: usize) -> usize {
        let n = n.max(2) as f64;
        let q = self.sampling_constant * k as f64 / (self.eps * self.eps) * (n / self.delta).ln();
        (q.ceil() as usize).max(1)
    }
}

/// Splitmix-style seed derivation, stable across runs and platforms.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base ^ 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        z = z.wrapping_add(p.wrapping_mul(0xBF58_476D_1CE4_E5B9)).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

fn require_conductance(g: &WeightedGraph) -> Result<()> {
    if g.mode() != Mode::Conductance {
        return Err(Error::InvalidParameter(format!("expected a conductance graph, got {:?}", g.mode())));
    }
    Ok(())
}

/// Merged adjacency with in-place elimination.
struct Eliminator {
    adj: Vec<HashMap<usize, f64>>,
}

impl Eliminator {
    fn new(g: &WeightedGraph) -> Self {
        let mut adj: Vec<HashMap<usize, f64>> = vec![HashMap::new(); g.n()];
        for e in g.edges() {
            *adj[e.u].entry(e.v).or_insert(0.0) += e.weight;
            *adj[e.v].entry(e.u).or_insert(0.0) += e.weight;
        }
        Self { adj }
    }

    /// Eliminates `v`; returns the neighbours whose degree may have changed.
    fn eliminate(&mut self, v: usize) -> Result<Vec<usize>> {
        let mut row: Vec<(usize, f64)> = self.adj[v].drain().collect();
        row.sort_unstable_by_key(|&(a, _)| a);
        let total: f64 = row.iter().map(|&(_, w)| w).sum();
        for &(a, _) in &row {
            self.adj[a].remove(&v);
        }
        for (i, &(a, wa)) in row.iter().enumerate() {
            for &(b, wb) in &row[i + 1..] {
                let c = wa * wb / total;
                if c.is_nan() || c <= 0.0 {
                    return Err(Error::Degenerate { vertex: v, weight: c });
                }
                *self.adj[a].entry(b).or_insert(0.0) += c;
                *self.adj[b].entry(a).or_insert(0.0) += c;
            }
        }
        Ok(row.into_iter().map(|(a, _)| a).collect())
    }

    fn into_graph(self, n: usize) -> WeightedGraph {
        let mut g = WeightedGraph::new(n, Mode::Conductance);
        for (u, nb) in self.adj.iter().enumerate() {
            let mut row: Vec<_> = nb.iter().filter(|(&v, _)| v > u).map(|(&v, &w)| (v, w)).collect();
            row.sort_unstable_by_key(|&(v, _)| v);
            for (v, w) in row {
                g.insert_edge(u, v, w).expect("eliminated edge is valid");
            }
        }
        g
    }
}

/// Removes `v`, connecting each neighbour pair `(a, b)` with conductance
/// `w_a w_b / W` where `W` is the total conductance at `v`.
pub fn eliminate_vertex(g: &WeightedGraph, v: usize) -> Result<WeightedGraph> {
    require_conductance(g)?;
    if v >= g.n() {
        return Err(Error::UnknownVertex(v));
    }
    let mut el = Eliminator::new(g);
    el.eliminate(v)?;
    Ok(el.into_graph(g.n()))
}

fn check_terminals(g: &WeightedGraph, terminals: &[usize]) -> Result<Vec<bool>> {
    if terminals.is_empty() {
        return Err(Error::InvalidTerminals("terminal set is empty".into()));
    }
    let mut is_t = vec![false; g.n()];
    for &t in terminals {
        if t >= g.n() {
            return Err(Error::UnknownVertex(t));
        }
        is_t[t] = true;
    }
    Ok(is_t)
}

/// Eliminates every non-terminal in minimum-degree order (ties by id).
pub fn exact_schur(g: &WeightedGraph, terminals: &[usize]) -> Result<SchurResult> {
    require_conductance(g)?;
    let is_t = check_terminals(g, terminals)?;
    let mut el = Eliminator::new(g);
    let mut queue: BTreeSet<(usize, usize)> = (0..g.n())
        .filter(|&v| !is_t[v] && !el.adj[v].is_empty())
        .map(|v| (el.adj[v].len(), v))
        .collect();
    let mut order = Vec::with_capacity(queue.len());
    while let Some((_, v)) = queue.pop_first() {
        let before: Vec<(usize, usize)> = el.adj[v]
            .keys()
            .filter(|&&a| !is_t[a])
            .map(|&a| (el.adj[a].len(), a))
            .collect();
        for key in &before {
            queue.remove(key);
        }
        let touched = el.eliminate(v)?;
        for a in touched {
            if !is_t[a] {
                queue.insert((el.adj[a].len(), a));
            }
        }
        order.push(v);
    }
    let mut terms = terminals.to_vec();
    terms.sort_unstable();
    terms.dedup();
    Ok(SchurResult {
        terminals: terms,
        graph: el.into_graph(g.n()),
        order,
    })
}

/// Eliminates the non-terminals in the given order. Vertices not listed are
/// eliminated afterwards in id order.
pub fn exact_schur_with_order(g: &WeightedGraph, terminals: &[usize], order: &[usize]) -> Result<SchurResult> {
    require_conductance(g)?;
    let is_t = check_terminals(g, terminals)?;
    let mut done = vec![false; g.n()];
    let mut el = Eliminator::new(g);
    let mut used = Vec::new();
    for v in order.iter().copied().chain(0..g.n()) {
        if v >= g.n() {
            return Err(Error::UnknownVertex(v));
        }
        if is_t[v] || done[v] {
            continue;
        }
        done[v] = true;
        el.eliminate(v)?;
        used.push(v);
    }
    let mut terms = terminals.to_vec();
    terms.sort_unstable();
    terms.dedup();
    Ok(SchurResult {
        terminals: terms,
        graph: el.into_graph(g.n()),
        order: used,
    })
}

/// Spectral sparsification with the default sampling constant. The budget
/// uses the number of non-isolated vertices for both `k` and `n`.
pub fn sparsify_spectral(g: &WeightedGraph, eps: f64, delta: f64, seed: u64) -> Result<(WeightedGraph, SparsifierCertificate)> {
    let k = g.non_isolated().len();
    sparsify_with(g, &SparsifyParams::new(eps, delta, seed), k, k)
}

/// Leverage-score sampling with budget `params.budget(k, n)`.
pub fn sparsify_with(
    g: &WeightedGraph,
    params: &SparsifyParams,
    k: usize,
    n: usize,
) -> Result<(WeightedGraph, SparsifierCertificate)> {
    require_conductance(g)?;
    params.validate()?;
    let q = params.budget(k, n);
    let edges = g.merged_edges();
    let mut cert = SparsifierCertificate {
        eps: params.eps,
        delta: params.delta,
        samples: q,
        seed: params.seed,
        kept: 0,
        drawn: 0,
        output_edges: 0,
    };
    let mut out = WeightedGraph::new(g.n(), Mode::Conductance);
    if edges.is_empty() {
        return Ok((out, cert));
    }
    let pairs: Vec<(usize, usize)> = edges.iter().map(|&(u, v, _)| (u, v)).collect();
    let res = pair_resistances(g, &pairs)?;
    let lev: Vec<f64> = edges.iter().zip(&res).map(|(&(_, _, w), r)| (w * r).clamp(0.0, 1.0)).collect();
    let total: f64 = lev.iter().sum();
    let qf = q as f64;

    let mut rest = Vec::new();
    let mut rest_mass = 0.0;
    for (i, &(u, v, w)) in edges.iter().enumerate() {
        let p = lev[i] / total;
        if qf * p >= 1.0 {
            out.insert_edge(u, v, w)?;
            cert.kept += 1;
        } else {
            rest.push(i);
            rest_mass += p;
        }
    }
    if !rest.is_empty() && rest_mass > 0.0 {
        let draws = ((qf * rest_mass).floor() as usize).max(1);
        cert.drawn = draws;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut remaining = draws as u64;
        let mut mass_left = 1.0;
        for &i in &rest {
            if remaining == 0 {
                break;
            }
            let p = lev[i] / total / rest_mass;
            let share = (p / mass_left).clamp(0.0, 1.0);
            let c = if share >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, share).expect("valid binomial").sample(&mut rng)
            };
            mass_left -= p;
            remaining -= c;
            if c > 0 {
                let (u, v, w) = edges[i];
                out.insert_edge(u, v, w * c as f64 / (draws as f64 * p))?;
            }
        }
    }
    cert.output_edges = out.m();
    Ok((out, cert))
}

/// Exact Schur complement followed by spectral sparsification. The budget is
/// `ceil(C_s |K| eps^-2 ln(n / delta))` with `n` the number of non-isolated
/// vertices of `g`.
pub fn approx_schur(
    g: &WeightedGraph,
    terminals: &[usize],
    params: &SparsifyParams,
) -> Result<(WeightedGraph, SparsifierCertificate)> {
    let sc = exact_schur(g, terminals)?;
    let n = g.non_isolated().len().max(sc.terminals.len());
    sparsify_with(&sc.graph, params, sc.terminals.len(), n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub eps: f64,
    /// Vectors evaluated (random plus one indicator per edge of `a`).
    pub vectors: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Compares `x^T L_b x` with `x^T L_a x` on `trials` Gaussian vectors and on
/// the indicator `chi_{u,v}` of every merged edge of `a`.
pub fn verify_spectral(a: &WeightedGraph, b: &WeightedGraph, eps: f64, trials: usize, seed: u64) -> Result<SpectralReport> {
    if a.n() != b.n() {
        return Err(Error::IdSpaceMismatch(a.n(), b.n()));
    }
    let n = a.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors: Vec<Vec<f64>> = (0..trials)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for (u, v, _) in a.merged_edges() {
        let mut x = vec![0.0; n];
        x[u] = 1.0;
        x[v] = -1.0;
        vectors.push(x);
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut pass = true;
    for x in &vectors {
        let qa = a.laplacian().quadratic_form(x)?;
        let qb = b.laplacian().quadratic_form(x)?;
        if qa == 0.0 {
            if qb != 0.0 {
                pass = false;
                hi = f64::INFINITY;
            }
            continue;
        }
        let r = qb / qa;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if lo.is_infinite() {
        lo = 1.0;
        hi = hi.max(1.0);
    }
    let tol = 1e-12;
    pass &= lo >= 1.0 - eps - tol && hi <= 1.0 + eps + tol;
    Ok(SpectralReport {
        eps,
        vectors: vectors.len(),
        min_ratio: lo,
        max_ratio: hi,
        pass,
    })
}
