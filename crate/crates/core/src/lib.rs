//! Fault detection by projections of the mutual information matrix.
//!
//! Each sliding window of a multivariate process is summarized by an `m×m`
//! matrix of pairwise mutual information estimated with the matrix-based
//! Rényi α-entropy functional. The window is projected onto that matrix's
//! eigenbasis, the four moments of the projected components form a detection
//! index, and the index's standardized distance from its training reference
//! is compared against an empirically calibrated control limit.
//!
//! Modules, bottom up:
//!
//! - [`entropy`]: Gram matrices, Rényi entropy, joint entropy, mutual information.
//! - [`mi_matrix`]: normalization, sliding windows, MI and covariance matrices.
//! - [`tcsa`]: eigenprojection, moment statistics, similarity index, control limit.
//! - [`detector`]: training, detection, root-cause ranking, model files.
//! - [`synth`]: seeded benchmark process with four fault types.
//! - [`eval`]: FDR/FAR scoring, PCA baselines, hyperparameter sweeps.

pub mod detector;
pub mod entropy;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod mi_matrix;
pub mod synth;
pub mod tcsa;

pub use detector::{detect, train, DetectionTrace, DetectorConfig, DetectorModel};
pub use entropy::{EntropyOrder, KernelConfig};
pub use error::{PmimError, Result};
pub use mi_matrix::{MIMatrix, MatrixSource, SeriesMatrix};
pub use tcsa::NormP;
