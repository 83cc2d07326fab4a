//! Structure inversion for Bayesian networks: compute inverse factorizations
//! for amortized inference and verify them against the forward model.

pub mod elimination;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod io;
pub mod independence;
pub mod inversion;
pub mod verification;
pub mod discrete;
pub mod masks;

pub use error::{Error, Result};
pub use graph::{BayesNet, UndirectedGraph, VarId};
