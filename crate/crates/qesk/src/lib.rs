//! Quantum-based entropic subtree kernels for graph classification.
//!
//! The toolkit computes Gram matrices over graph datasets from entropic
//! subtree representations: per-vertex Shannon entropies of the
//! continuous-time quantum walk's average mixing matrix, distributed over
//! Weisfeiler-Lehman refinement codes. A count-based subtree kernel is
//! included as the baseline, and a precomputed-kernel C-SVM with stratified
//! cross-validation evaluates both.
//!
//! Stages, bottom to top:
//!
//! * [`graphio`] — benchmark dataset ingestion (the four-file text layout);
//! * [`spectral`] — eigenspace projectors, average mixing matrix, entropies;
//! * [`wlrefine`] — label refinement with a dataset-wide codebook;
//! * [`features`] — per-graph entropic and count representations;
//! * [`kernel`] — pairwise kernels, Gram assembly, PSD verification;
//! * [`eval`] — SMO-based C-SVM and the cross-validation protocol;
//! * [`pipeline`] — dataset-level composition of the stages.

pub mod error;
pub mod eval;
pub mod features;
pub mod graphio;
pub mod kernel;
pub mod pipeline;
pub mod spectral;
pub mod wlrefine;

#[doc(hidden)]
pub mod testutil;

pub use error::{Error, Result};
