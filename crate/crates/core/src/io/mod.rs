//! File formats: NPY kernels, CSV tables and JSON run metadata.

pub mod csv;
pub mod meta;
pub mod npy;

pub use self::csv::{read_spectrum_csv, write_bench_csv, write_boundary_csv, write_spectrum_csv};
pub use meta::{write_run_metadata_json, RunMetadata};
pub use npy::{read_npy_kernel, write_npy_kernel};
