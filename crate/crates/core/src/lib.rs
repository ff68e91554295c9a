//! Dynamic vertex-sparsifier structures over r-divisions.
//!
//! A graph is cut into regions of at most `r` vertices. Each region keeps a
//! small graph on its boundary vertices that preserves the quantity of
//! interest (effective resistances, terminal cuts or distances), and a query
//! is answered on the union of the two regions holding the endpoints and the
//! compressed graphs of all other regions.

pub mod apsp;
pub mod eflow;
pub mod error;
pub mod gen;
pub mod graph;
pub mod maxflow;
pub mod oracles;
pub mod partition;
pub mod regional;
pub mod resistance;
pub mod schur;
pub mod script;
pub mod subgraph;

pub use error::{Error, Result};
pub use graph::{Action, ChangeKind, ChangeRecord, Demand, Edge, EdgeId, Flow, Mode, Potential, WeightedGraph};
