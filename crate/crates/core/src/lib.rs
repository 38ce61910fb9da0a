//! Single-pass randomized PCA and truncated SVD for matrices that are only
//! reachable as a stream of row blocks.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] holds the dense kernels (seeded Gaussian matrices, unpivoted
//!   Householder QR, one-sided Jacobi SVD, triangular solves, projectors).
//! * [`sketch`] is the streaming data model: row streams, the one-pass
//!   accumulation of `G = AΩ` and `H = AᵀG`, centering and file formats.
//! * [`rqb`] contains the factorizations built on top of a sketch: the blocked
//!   QB loop with re-orthogonalization, single-pass PCA, the two-pass basic
//!   scheme, the older single-pass baseline and the power-scheme refinement.
//! * [`synth`] builds test matrices with prescribed singular spectra, the
//!   exact reference SVD and accuracy metrics.
//! * [`cli`] implements the `spca` command line tool.

// `!(x > tol)` comparisons are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod linalg;
pub mod rqb;
pub mod sketch;
pub mod synth;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
