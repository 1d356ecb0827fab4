//! A CONGEST-model simulation engine and a library of shortcut-based
//! distributed approximation algorithms for single-source shortest paths,
//! distance labeling, and uncapacitated min-cost flow (transshipment),
//! together with the centralized oracles and statistical harnesses used to
//! check them at desk scale.

pub mod cluster;
pub mod config;
pub mod error;
pub mod fixed;
pub mod graph;
pub mod labeling;
pub mod ldd;
pub mod oracle;
pub mod partwise;
pub mod rng;
pub mod sim;
pub mod sssp;
pub mod transshipment;

pub use error::{Error, Result};
pub use fixed::Fx;
pub use graph::{EdgeId, VertexId, WeightedGraph};
