//! Link prediction and random-walk navigability on weighted multiplex networks.
//!
//! A multiplex holds `N` physical nodes replicated across `L` layers. Layers
//! carry weighted flow graphs; replicas of one node are joined by coupling
//! weights. The crate parses flow edge lists, predicts missing links from
//! neighbours that are exclusive to a subset of layers, builds supra-transition
//! matrices for three walk strategies and measures how fast a walker covers
//! the network.

pub mod coverage;
pub mod edgelist;
pub mod error;
pub mod network;
pub mod pipeline;
pub mod predict;
pub mod spectral;
pub mod walk;

pub use error::{Error, Result};
pub use network::{build_multiplex, LayerId, LayerSubset, MultiplexNetwork, NodeId, NodeTable};
pub use walk::{build_supra_transition, Strategy, SupraTransitionMatrix};
