//! Multimodal mood-state classification pipeline.
//!
//! The library covers the full chain from frame-level descriptor tables to
//! evaluated multimodal decisions:
//!
//! - [`features`]: LLD ingestion, task segmentation, emotion grouping, and
//!   ten-functional summarization into fixed-length vectors.
//! - [`preprocess`]: train-fitted Z standardization, row L2 normalization,
//!   PCA, and extremely-randomized-tree feature selection.
//! - [`kelm`]: RBF-kernel extreme learning machines, unweighted and
//!   class-weighted, with the blend of the two selected on development UAR.
//! - [`fusion`]: majority voting, weighted-sum fusion of two or three
//!   models (Dirichlet-searched), early feature fusion, and the MM1 metric.
//! - [`eval`]: UAR, confusion matrices, YMRS class mapping, stratified fold
//!   plans, and task-level probability aggregation.
//! - [`pipeline`]: the pooled cross-validation protocol and hyperparameter
//!   grid search over the whole chain.
//!
//! Everything is deterministic given explicit seeds; no global state.

pub mod error;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod kelm;
pub mod pipeline;
pub mod preprocess;
pub mod types;

mod linalg;

pub use error::{Error, Result};
pub use types::{ClassSet, FeatureMatrix, Modality, ProbMatrix};
