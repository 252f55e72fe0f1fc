//! Per-frequency symbols `A_k = sum_y M_y exp(2 pi i <k, y>)`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmatrix::ComplexMatrix;
use crate::config::ComputeOptions;
use crate::error::{Error, Result};
use crate::kernel::{ConvKernel, Frequency, FrequencyGrid, SpatialDims, Stencil};
use crate::spectrum::{PhaseClock, PhaseTimings};

/// Storage order of a [`SymbolField`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `data[block * c_out * c_in + o * c_in + i]`: every block is one
    /// consecutive row-major run.
    #[default]
    BlockContiguous,
    /// `data[(o * c_in + i) * blocks + block]`: one plane per channel pair,
    /// the natural output of per-pair 2D transforms.
    FrequencyStrided,
}

impl Layout {
    pub fn as_str(&self) -> &'static str {
        match self {
            Layout::BlockContiguous => "block_contiguous",
            Layout::FrequencyStrided => "frequency_strided",
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "block" | "block_contiguous" => Ok(Layout::BlockContiguous),
            "strided" | "frequency_strided" => Ok(Layout::FrequencyStrided),
            other => Err(Error::InvalidConfig(format!("unknown layout {other:?}"))),
        }
    }
}

/// Bytes needed to hold every symbol block of a field.
pub fn field_bytes(dims: SpatialDims, c_out: usize, c_in: usize) -> u64 {
    dims.points() as u64 * (c_out * c_in) as u64 * std::mem::size_of::<Complex64>() as u64
}

/// `n * m` complex `c_out x c_in` blocks, one per frequency of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolField {
    grid: FrequencyGrid,
    c_out: usize,
    c_in: usize,
    layout: Layout,
    data: Vec<Complex64>,
    timings: PhaseTimings,
}

impl SymbolField {
    pub(crate) fn from_parts(
        grid: FrequencyGrid,
        c_out: usize,
        c_in: usize,
        layout: Layout,
        data: Vec<Complex64>,
        timings: PhaseTimings,
    ) -> Self {
        debug_assert_eq!(data.len(), grid.len() * c_out * c_in);
        Self {
            grid,
            c_out,
            c_in,
            layout,
            data,
            timings,
        }
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn dims(&self) -> SpatialDims {
        self.grid.dims()
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Number of blocks, equal to the grid size.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn block_len(&self) -> usize {
        self.c_out * self.c_in
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Transform and copy time spent producing this field.
    pub fn build_timings(&self) -> PhaseTimings {
        self.timings
    }

    /// Borrowed block, available only for block-contiguous storage.
    pub fn block_slice(&self, index: usize) -> Option<&[Complex64]> {
        match self.layout {
            Layout::BlockContiguous => {
                let bl = self.block_len();
                self.data.get(index * bl..(index + 1) * bl)
            }
            Layout::FrequencyStrided => None,
        }
    }

    /// Writes block `index` row-major into `out`, whatever the layout.
    pub fn copy_block(&self, index: usize, out: &mut [Complex64]) {
        let bl = self.block_len();
        match self.layout {
            Layout::BlockContiguous => out.copy_from_slice(&self.data[index * bl..(index + 1) * bl]),
            Layout::FrequencyStrided => {
                let stride = self.len();
                for (e, slot) in out.iter_mut().enumerate() {
                    *slot = self.data[e * stride + index];
                }
            }
        }
    }

    pub fn block(&self, index: usize) -> ComplexMatrix {
        let mut out = vec![Complex64::new(0.0, 0.0); self.block_len()];
        self.copy_block(index, &mut out);
        ComplexMatrix::from_vec(self.c_out, self.c_in, out)
    }

    /// Re-stores the field in `layout`; the copy is timed and added to
    /// the field's `s_copy`.
    pub fn to_layout(&self, layout: Layout) -> SymbolField {
        if layout == self.layout {
            return self.clone();
        }
        let start = Instant::now();
        let data = transpose_storage(&self.data, self.len(), self.block_len(), layout);
        let mut timings = self.timings;
        timings.s_copy += start.elapsed().as_secs_f64();
        timings.s_total = timings.s_transform + timings.s_copy + timings.s_svd;
        SymbolField {
            data,
            layout,
            timings,
            ..*self
        }
    }
}

/// Converts between the two storage orders. `target` names the layout of
/// the result; the source is assumed to be the other one.
pub(crate) fn transpose_storage(src: &[Complex64], blocks: usize, block_len: usize, target: Layout) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    match target {
        Layout::FrequencyStrided => {
            out.par_chunks_mut(blocks).enumerate().for_each(|(e, plane)| {
                for (b, slot) in plane.iter_mut().enumerate() {
                    *slot = src[b * block_len + e];
                }
            });
        }
        Layout::BlockContiguous => {
            out.par_chunks_mut(block_len)
                .enumerate()
                .with_min_len(256)
                .for_each(|(b, block)| {
                    for (e, slot) in block.iter_mut().enumerate() {
                        *slot = src[e * blocks + b];
                    }
                });
        }
    }
    out
}

/// Accumulates `A_k` into `out` (row-major, zeroed here). Taps are summed in
/// stencil order, so the result is bit-reproducible.
#[inline]
pub(crate) fn symbol_into(stencil: &Stencil, k: Frequency, out: &mut [Complex64]) {
    out.fill(Complex64::new(0.0, 0.0));
    for tap in stencil.taps() {
        let (s, c) = k.phase(tap.offset).sin_cos();
        for (slot, &w) in out.iter_mut().zip(&tap.matrix) {
            slot.re += c * w;
            slot.im += s * w;
        }
    }
}

/// The `c_out x c_in` symbol of the stencil at frequency `k`.
pub fn symbol_at(stencil: &Stencil, k: Frequency) -> ComplexMatrix {
    let mut out = vec![Complex64::new(0.0, 0.0); stencil.c_out() * stencil.c_in()];
    symbol_into(stencil, k, &mut out);
    ComplexMatrix::from_vec(stencil.c_out(), stencil.c_in(), out)
}

/// Symbols of `kernel` over every frequency of the `dims` torus.
pub fn build_symbol_field(kernel: &ConvKernel, dims: SpatialDims, opts: &ComputeOptions) -> Result<SymbolField> {
    build_stencil_field(&kernel.stencil(), dims, opts)
}

/// As [`build_symbol_field`] for an arbitrary tap set.
pub fn build_stencil_field(stencil: &Stencil, dims: SpatialDims, opts: &ComputeOptions) -> Result<SymbolField> {
    let grid = FrequencyGrid::new(dims);
    let bl = stencil.c_out() * stencil.c_in();
    opts.memory_budget
        .check(field_bytes(dims, stencil.c_out(), stencil.c_in()))?;

    opts.run(|| {
        let mut clock = PhaseClock::default();
        let start = Instant::now();
        let mut data = vec![Complex64::new(0.0, 0.0); grid.len() * bl];
        data.par_chunks_mut(bl)
            .enumerate()
            .with_min_len(64)
            .for_each(|(idx, block)| symbol_into(stencil, grid.frequency(idx), block));
        clock.transform = start.elapsed();

        let mut field = SymbolField::from_parts(
            grid,
            stencil.c_out(),
            stencil.c_in(),
            Layout::BlockContiguous,
            data,
            clock.timings(),
        );
        if opts.layout == Layout::FrequencyStrided {
            field = field.to_layout(Layout::FrequencyStrided);
        }
        field
    })
}
