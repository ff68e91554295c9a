//! Incremental vertex activation: queries run on the subgraph induced by the
//! active vertex set `S`. The division is built once over all of `G`; an
//! activation recomputes the sketch of every region containing the vertex.
//!
//! Also hosts the OMv gadget: rows and columns of a boolean matrix become
//! vertices, and `u^T M v = 1` exactly when `s` and `t` are connected once the
//! rows in `u` and columns in `v` are activated.

use std::collections::BTreeMap;

use crate::eflow::EFlowKernel;
use crate::error::{Error, Result};
use crate::graph::{compact, Mode, WeightedGraph};
use crate::partition::{build_rdivision, DivisionParams, RDivision, Region, RegionId};
use crate::regional::{RegionKernel, RegionSketch};
use crate::schur::{derive_seed, SparsifierCertificate};

#[derive(Debug, Clone)]
pub struct SubgraphEFlow {
    kernel: EFlowKernel,
    graph: WeightedGraph,
    division: RDivision,
    active: Vec<bool>,
    sketches: BTreeMap<RegionId, RegionSketch<SparsifierCertificate>>,
    seed: u64,
    sparsify_calls: usize,
    last_activation_sparsify: usize,
}

impl SubgraphEFlow {
    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn division(&self) -> &RDivision {
        &self.division
    }

    pub fn is_active(&self, v: usize) -> bool {
        self.active.get(v).copied().unwrap_or(false)
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn sparsify_calls(&self) -> usize {
        self.sparsify_calls
    }

    pub fn last_activation_sparsify(&self) -> usize {
        self.last_activation_sparsify
    }

    pub fn sketch(&self, id: RegionId) -> Option<&RegionSketch<SparsifierCertificate>> {
        self.sketches.get(&id)
    }

    fn active_edges<'a>(&'a self, region: &'a Region) -> impl Iterator<Item = (usize, usize, f64)> + 'a {
        region
            .edge_refs(&self.graph)
            .filter(|e| self.active[e.u] && self.active[e.v])
            .map(|e| (e.u, e.v, e.weight))
    }

    fn resketch(&mut self, id: RegionId) -> Result<()> {
        let region = self.division.region(id).unwrap();
        let terminals: Vec<usize> = region.boundary().iter().copied().filter(|&v| self.active[v]).collect();
        let (local, ids) = compact(Mode::Conductance, self.active_edges(region), &terminals);
        let local_terms: Vec<usize> = terminals.iter().map(|t| ids.binary_search(t).unwrap()).collect();
        let seed = derive_seed(self.seed, &[id.0 as u64, self.sparsify_calls as u64]);
        let (h, cert) = self.kernel.sparsify(&local, &local_terms, self.graph.n(), seed)?;
        let edges = h.edges().map(|e| (ids[e.u], ids[e.v], e.weight)).collect();
        self.sketches.insert(
            id,
            RegionSketch {
                terminals,
                edges,
                cert,
                overridden: false,
            },
        );
        self.sparsify_calls += 1;
        self.last_activation_sparsify += 1;
        Ok(())
    }
}

/// Builds the division over all of `g`; the active set starts empty.
pub fn sg_new(g: WeightedGraph, r: usize, eps: f64, seed: u64) -> Result<SubgraphEFlow> {
    if g.mode() != Mode::Conductance {
        return Err(Error::InvalidParameter("subgraph structure needs a conductance graph".into()));
    }
    let kernel = EFlowKernel::new(eps)?;
    let division = build_rdivision(&g, DivisionParams::new(r).with_seed(seed))?;
    Ok(SubgraphEFlow {
        kernel,
        active: vec![false; g.n()],
        graph: g,
        division,
        sketches: BTreeMap::new(),
        seed,
        sparsify_calls: 0,
        last_activation_sparsify: 0,
    })
}

/// Activates `v` and recomputes the sketch of each region containing it.
pub fn sg_activate(st: &mut SubgraphEFlow, v: usize) -> Result<()> {
    if v >= st.graph.n() {
        return Err(Error::UnknownVertex(v));
    }
    if st.active[v] {
        return Err(Error::AlreadyActive(v));
    }
    st.active[v] = true;
    st.last_activation_sparsify = 0;
    for id in st.division.regions_of(v).to_vec() {
        st.resketch(id)?;
    }
    Ok(())
}

/// `(1 - eps/6) * R_H(s, t)` on `P_s[S] ∪ P_t[S] ∪ (other sketches)`.
pub fn sg_query(st: &SubgraphEFlow, s: usize, t: usize) -> Result<f64> {
    for x in [s, t] {
        if x >= st.graph.n() {
            return Err(Error::UnknownVertex(x));
        }
        if !st.active[x] {
            return Err(Error::Inactive(x));
        }
    }
    if s == t {
        return Err(Error::InvalidParameter(format!("query endpoints coincide ({s})")));
    }
    let (Some(&ps), Some(&pt)) = (st.division.regions_of(s).first(), st.division.regions_of(t).first()) else {
        return Ok(f64::INFINITY);
    };
    let own = if ps == pt { vec![ps] } else { vec![ps, pt] };
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for id in &own {
        edges.extend(st.active_edges(st.division.region(*id).unwrap()));
    }
    for (id, sk) in &st.sketches {
        if !own.contains(id) {
            edges.extend(sk.edges.iter().copied());
        }
    }
    let (h, ids) = compact(Mode::Conductance, edges, &[s, t]);
    let (ls, lt) = (ids.binary_search(&s).unwrap(), ids.binary_search(&t).unwrap());
    st.kernel.answer(&h, ls, lt)
}

/// Sketch recomputations needed to activate every vertex of `g` under
/// `division`: one per region containing each vertex.
pub fn activation_cost(division: &RDivision, n: usize) -> usize {
    (0..n).map(|v| division.regions_of(v).len()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OMvInstance {
    pub matrix: Vec<Vec<bool>>,
    pub graph: WeightedGraph,
}

impl OMvInstance {
    pub const S: usize = 0;
    pub const T: usize = 1;

    pub fn rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn cols(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn row_vertex(&self, i: usize) -> usize {
        2 + i
    }

    pub fn col_vertex(&self, j: usize) -> usize {
        2 + self.rows() + j
    }

    /// A fresh engine over the gadget with `s` and `t` active.
    pub fn engine(&self, r: usize, eps: f64, seed: u64) -> Result<SubgraphEFlow> {
        let mut st = sg_new(self.graph.clone(), r, eps, seed)?;
        sg_activate(&mut st, Self::S)?;
        sg_activate(&mut st, Self::T)?;
        Ok(st)
    }
}

/// Gadget graph: `s` joins every row vertex, `t` every column vertex, and
/// `(r_i, c_j)` is an edge iff `M[i][j]`. All weights are 1.
pub fn omv_build(matrix: &[Vec<bool>]) -> Result<OMvInstance> {
    let n1 = matrix.len();
    let n2 = matrix.first().map_or(0, Vec::len);
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidParameter("OMv matrix is empty".into()));
    }
    if let Some(row) = matrix.iter().find(|row| row.len() != n2) {
        return Err(Error::DimensionMismatch {
            expected: n2,
            got: row.len(),
        });
    }
    let mut g = WeightedGraph::new(n1 + n2 + 2, Mode::Conductance);
    for i in 0..n1 {
        g.insert_edge(OMvInstance::S, 2 + i, 1.0)?;
    }
    for (i, row) in matrix.iter().enumerate() {
        for (j, &bit) in row.iter().enumerate() {
            if bit {
                g.insert_edge(2 + i, 2 + n1 + j, 1.0)?;
            }
        }
    }
    for j in 0..n2 {
        g.insert_edge(2 + n1 + j, OMvInstance::T, 1.0)?;
    }
    Ok(OMvInstance {
        matrix: matrix.to_vec(),
        graph: g,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OMvAnswer {
    pub bit: bool,
    /// The `s`-`t` energy estimate; infinite when the bit is 0.
    pub energy: f64,
}

/// Activates the rows in `u` and the columns in `v`, then reports whether
/// the `s`-`t` energy is finite.
pub fn omv_answer(inst: &OMvInstance, u: &[bool], v: &[bool], engine: &mut SubgraphEFlow) -> Result<OMvAnswer> {
    if u.len() != inst.rows() {
        return Err(Error::DimensionMismatch {
            expected: inst.rows(),
            got: u.len(),
        });
    }
    if v.len() != inst.cols() {
        return Err(Error::DimensionMismatch {
            expected: inst.cols(),
            got: v.len(),
        });
    }
    let rows = u.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| inst.row_vertex(i));
    let cols = v.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| inst.col_vertex(j));
    let wanted: Vec<usize> = rows.chain(cols).collect();
    for x in wanted {
        if !engine.is_active(x) {
            sg_activate(engine, x)?;
        }
    }
    let energy = sg_query(engine, OMvInstance::S, OMvInstance::T)?;
    Ok(OMvAnswer {
        bit: energy.is_finite(),
        energy,
    })
}

/// Boolean `u^T M v`, computed directly.
pub fn omv_direct(matrix: &[Vec<bool>], u: &[bool], v: &[bool]) -> bool {
    matrix
        .iter()
        .enumerate()
        .any(|(i, row)| u[i] && row.iter().enumerate().any(|(j, &m)| m && v[j]))
}

/// Parses a dense 0/1 grid, one row per line, digits optionally separated
/// by whitespace. Blank lines and `#` comments are skipped.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<bool>>> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse {
                    line: k + 1,
                    msg: format!("unexpected character {other:?} in matrix"),
                }),
            })
            .collect::<Result<Vec<bool>>>()?;
        if let Some(first) = rows.first() {
            let first: &Vec<bool> = first;
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: k + 1,
                    msg: format!("row has {} entries, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "matrix is empty".into(),
        });
    }
    Ok(rows)
}

pub fn write_matrix(matrix: &[Vec<bool>]) -> String {
    let mut out = String::new();
    for row in matrix {
        let cells: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}
