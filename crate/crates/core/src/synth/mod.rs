//! Synthetic test matrices with known spectra, the exact reference SVD and
//! accuracy metrics.

mod generator;
mod metrics;
mod spectrum;

pub use generator::{synth_matrix, synth_stream, SyntheticMatrix, SyntheticSource, SyntheticStream};
pub use metrics::{compare, exact_truncated_svd, MetricsReport, EXACT_SVD_LIMIT};
pub use spectrum::{spectrum_value, SpectrumSpec};
