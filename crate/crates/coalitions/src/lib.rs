//! Overlapping community detection on simple undirected graphs.
//!
//! Communities are modelled as coalitions of a cooperative game whose pair
//! weights blend adjacency and common-neighbour information. A community is
//! kept only if it is *stable*: every member collects at least half of its
//! total weight inside the community. The crate provides
//!
//! * pair weight matrices: raw, approximate modular, and exact modular
//!   (raw minus its configuration-model expectation),
//! * exact configuration-model probabilities with an enumeration oracle,
//! * a steepest-ascent multi-start local search over Add/Remove/Swap moves,
//! * integer-programming model export (CPLEX LP text) and solution import,
//! * a brute-force optimizer for small instances,
//! * a benchmark generator with planted overlapping communities, and
//! * evaluation metrics (overlapping NMI, Omega index, bridge confusion).

pub mod error;
pub mod generator;
pub mod graph;
pub mod lse;
pub mod metrics;
pub mod milp;
pub mod null_model;
pub mod stability;
pub mod weights;

pub use error::{Error, Result};
pub use graph::{Graph, NodeId};
pub use stability::CommunityStructure;
pub use weights::{WeightMatrix, WeightVariant};
