//! PA-1SmT: unsupervised adaptation from one labeled source domain to
//! multiple unlabeled target domains via model-parameter dictionary
//! learning.
//!
//! The solver never sees source samples. The source side is reduced to a
//! single linear model `W_S`, and knowledge flows to each target clusterer
//! through a sparse reconstruction of `W_S` over the target model columns
//! plus a shared dictionary coupling the target models to each other.
//!
//! Modules:
//! - [`linalg`]: Sylvester/SPD solves, symmetric eigendecomposition.
//! - [`preprocess`]: z-score and Gaussian-kernel PCA.
//! - [`slmc`]: the soft large-margin clustering base learner and source
//!   model training.
//! - [`adapt`]: the joint multi-target solver.
//! - [`metrics`]: NMI and Rand index.
//! - [`io`], [`synth`], [`experiment`]: dataset IO, the synthetic
//!   multi-domain benchmark generator, and the experiment runner behind
//!   the CLI.

pub mod adapt;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod preprocess;
pub mod slmc;
pub mod synth;

#[cfg(test)]
pub(crate) mod test_util;

pub use error::{Error, Result};
