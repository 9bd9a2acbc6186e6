//! Cluster-expansion perturbation theory for weakly coupled quantum lattice systems.

pub mod acceptance;
#[cfg(feature = "cli")]
pub mod cli;
pub mod cluster;
pub mod error;
pub mod groundstate;
pub mod lattice;
pub mod linalg;
pub mod local;
pub mod model;
pub mod oneparticle;
pub mod oracle;
pub mod renorm;
pub mod scatter;
pub mod space;

pub use error::{Error, Result};
