//! Exact singular value spectra of 2D multi-channel convolution operators.
//!
//! On an `m x n` torus a convolution with `c_in` input and `c_out` output
//! channels is block diagonalized by the Fourier modes: its singular values
//! are the union of the singular values of `n * m` small complex symbols
//! `A_k = sum_y M_y exp(2 pi i <k, y>)`. [`pipeline::compute_spectrum`] is
//! the usual entry point; the FFT path and the explicit unrolled matrix are
//! provided as cross-checks, the latter also for zero-padded boundaries.

pub mod analysis;
pub mod bench;
pub mod cmatrix;
pub mod config;
pub mod error;
pub mod explicit;
pub mod fft;
pub mod io;
pub mod kernel;
pub mod pipeline;
pub mod rng;
pub mod spectrum;
pub mod svd;
pub mod symbol;

pub use cmatrix::ComplexMatrix;
pub use config::{ComputeOptions, MemoryBudget};
pub use error::{Error, NpyError, Result};
pub use explicit::{ExplicitConfig, ExplicitMatrix};
pub use kernel::{ConvKernel, Frequency, FrequencyGrid, KernelShape, Offset, Precision, SpatialDims};
pub use pipeline::compute_spectrum;
pub use spectrum::{Boundary, Method, PhaseTimings, SpectrumResult};
pub use symbol::{Layout, SymbolField};

pub use num_complex::Complex64;

/// Version string recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
