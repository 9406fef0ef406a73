//! Layer-wise representation analysis: CCA family, CKA, Procrustes, discrete
//! mutual information, linear probes, training-free speech tasks, SLU scoring
//! and cross-metric trend correlation.

pub mod cca;
pub mod dataio;
pub mod discretize;
mod error;
pub mod freetasks;
pub mod linalg;
pub mod linprobe;
pub mod report;
pub mod selfcheck;
pub mod simkernels;
pub mod slueval;
pub mod spanpool;
pub mod synth;
pub mod trends;

pub use error::{Error, Result};
pub use linalg::Mat;
