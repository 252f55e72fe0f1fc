use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectrum::{Boundary, Method, PhaseTimings, SpectrumResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimsMeta {
    pub height: usize,
    pub width: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelsMeta {
    pub c_in: usize,
    pub c_out: usize,
}

/// Provenance of one spectrum run, written next to its CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub method: Method,
    pub boundary: Boundary,
    pub dims: DimsMeta,
    pub channels: ChannelsMeta,
    pub sv_count: usize,
    pub timings: Option<PhaseTimings>,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub weights: Option<String>,
}

impl RunMetadata {
    pub fn from_spectrum(spectrum: &SpectrumResult) -> Self {
        Self {
            method: spectrum.method,
            boundary: spectrum.boundary,
            dims: DimsMeta {
                height: spectrum.dims.height,
                width: spectrum.dims.width,
            },
            channels: ChannelsMeta {
                c_in: spectrum.channels.0,
                c_out: spectrum.channels.1,
            },
            sv_count: spectrum.len(),
            timings: spectrum.timings,
            tool_version: crate::VERSION.to_string(),
            seed: None,
            workers: None,
            weights: None,
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn with_weights(mut self, weights: impl Into<String>) -> Self {
        self.weights = Some(weights.into());
        self
    }
}

pub fn write_run_metadata_json(meta: &RunMetadata, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, meta)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
