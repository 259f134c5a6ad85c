pub mod cli;
pub mod copula;
pub mod data;
pub mod diagnose;
pub mod error;
pub mod geom;
pub mod marginal;
pub mod mcmc;
pub mod predict;
pub mod simulate;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
