//! Fully dynamic approximate all-pairs electrical flow: every region keeps
//! an approximate Schur complement onto its boundary, and a query returns
//! `(1 - eps/6) * R_H(s, t)` on the union graph `H`.

use crate::error::{Error, Result};
use crate::graph::{Action, EdgeId, Mode, WeightedGraph};
use crate::regional::{LifecycleParams, RegionKernel, Regional, WorstCase};
use crate::resistance::effective_resistance;
use crate::schur::{approx_schur, exact_schur, SparsifierCertificate, SparsifyParams, DEFAULT_SAMPLING_CONSTANT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EFlowKernel {
    pub eps: f64,
    pub sampling_constant: f64,
}

impl EFlowKernel {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
        }
        Ok(Self {
            eps,
            sampling_constant: DEFAULT_SAMPLING_CONSTANT,
        })
    }

    /// The one-sided scaling applied to every estimate.
    pub fn scale(&self) -> f64 {
        1.0 - self.eps / 6.0
    }
}

impl RegionKernel for EFlowKernel {
    type Cert = SparsifierCertificate;

    fn mode(&self) -> Mode {
        Mode::Conductance
    }

    fn sparsify(&self, region: &WeightedGraph, terminals: &[usize], n_global: usize, seed: u64) -> Result<(WeightedGraph, Self::Cert)> {
        if terminals.len() < 2 {
            let cert = SparsifierCertificate {
                eps: self.eps / 6.0,
                delta: 0.0,
                samples: 0,
                seed,
                kept: 0,
                drawn: 0,
                output_edges: 0,
            };
            return Ok((WeightedGraph::new(region.n(), Mode::Conductance), cert));
        }
        let n = n_global.max(2) as f64;
        let mut params = SparsifyParams::new(self.eps / 6.0, 1.0 / (n * n * n), seed);
        params.sampling_constant = self.sampling_constant;
        approx_schur(region, terminals, &params)
    }

    fn answer(&self, h: &WeightedGraph, s: usize, t: usize) -> Result<f64> {
        Ok(self.scale() * effective_resistance(h, s, t)?)
    }

    /// Eliminates the interior exactly, which leaves resistances between
    /// kept vertices unchanged and shrinks the system the solver sees.
    fn reduce_endpoint(&self, region: &WeightedGraph, keep: &[usize]) -> Result<Option<WeightedGraph>> {
        Ok(Some(exact_schur(region, keep)?.graph))
    }
}

pub type EFlowStructure = Regional<EFlowKernel>;
pub type EFlowScheduler = WorstCase<EFlowKernel>;

pub fn eflow_params(r: usize, seed: u64) -> LifecycleParams {
    LifecycleParams::new(r, seed)
}

/// Builds the structure with division parameter `r` and accuracy `eps`.
pub fn ef_new(g: WeightedGraph, r: usize, eps: f64, seed: u64) -> Result<EFlowStructure> {
    Regional::build(EFlowKernel::new(eps)?, g, eflow_params(r, seed))
}

pub fn ef_update(st: &mut EFlowStructure, action: Action) -> Result<()> {
    st.update(action).map(|_| ())
}

pub fn ef_query(st: &mut EFlowStructure, s: usize, t: usize) -> Result<f64> {
    st.query(s, t)
}

/// The lowest-id live edge between `u` and `v`, as a delete action.
pub fn delete_between(g: &WeightedGraph, u: usize, v: usize) -> Result<Action> {
    g.find_edge(u, v).map(Action::Delete).ok_or(Error::NoSuchEdge(u, v))
}

/// Deletes by id, for callers that track ids themselves.
pub fn delete_id(id: EdgeId) -> Action {
    Action::Delete(id)
}
