//! The unrolled convolution matrix, for periodic or zero-padded boundaries.
//!
//! Rows index outputs `(x1 * n + x2) * c_out + o`, columns index inputs
//! `(x1 * n + x2) * c_in + i`. Entry `(row(x, o), col(x + y, i))` holds
//! `weights[o, i, p, q]` for tap `(p, q)` at offset `y`.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::MemoryBudget;
use crate::error::{Error, Result};
use crate::kernel::{ConvKernel, SpatialDims, Stencil};
use crate::spectrum::{Boundary, Method, PhaseClock, SpectrumResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExplicitConfig {
    /// Largest row or column count accepted.
    pub max_dim: usize,
    pub memory_budget: MemoryBudget,
}

impl ExplicitConfig {
    pub const DEFAULT_MAX_DIM: usize = 20_000;

    pub fn check(&self, rows: usize, cols: usize) -> Result<()> {
        if rows > self.max_dim || cols > self.max_dim {
            return Err(Error::SizeCapExceeded {
                rows,
                cols,
                cap: self.max_dim,
            });
        }
        self.memory_budget
            .check((rows * cols * std::mem::size_of::<f64>()) as u64)
    }
}

impl Default for ExplicitConfig {
    fn default() -> Self {
        Self {
            max_dim: Self::DEFAULT_MAX_DIM,
            memory_budget: MemoryBudget::default(),
        }
    }
}

/// Coordinate-list form of the operator. Duplicate coordinates (taps that
/// alias on a small periodic grid) are summed on use.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitMatrix {
    rows: usize,
    cols: usize,
    boundary: Boundary,
    dims: SpatialDims,
    channels: (usize, usize),
    entries: Vec<(usize, usize, f64)>,
}

impl ExplicitMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn dims(&self) -> SpatialDims {
        self.dims
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut dense = DMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            dense[(r, c)] += v;
        }
        dense
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::ShapeMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.rows];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        Ok(y)
    }

    pub fn matvec_complex(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::ShapeMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        let mut y = vec![Complex64::new(0.0, 0.0); self.rows];
        for &(r, c, v) in &self.entries {
            y[r] += x[c] * v;
        }
        Ok(y)
    }

    /// Writes one `row col value` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()> {
        for &(r, c, v) in &self.entries {
            writeln!(out, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }
}

/// Unrolls `kernel` on the `dims` grid.
pub fn build_explicit(
    kernel: &ConvKernel,
    dims: SpatialDims,
    boundary: Boundary,
    cfg: &ExplicitConfig,
) -> Result<ExplicitMatrix> {
    build_explicit_stencil(&kernel.stencil(), dims, boundary, cfg)
}

pub fn build_explicit_stencil(
    stencil: &Stencil,
    dims: SpatialDims,
    boundary: Boundary,
    cfg: &ExplicitConfig,
) -> Result<ExplicitMatrix> {
    let (c_out, c_in) = (stencil.c_out(), stencil.c_in());
    let rows = dims.points() * c_out;
    let cols = dims.points() * c_in;
    if rows > cfg.max_dim || cols > cfg.max_dim {
        return Err(Error::SizeCapExceeded {
            rows,
            cols,
            cap: cfg.max_dim,
        });
    }
    if boundary == Boundary::Dirichlet {
        let (reach_r, reach_c) = stencil.reach();
        if reach_r >= dims.height as u64 || reach_c >= dims.width as u64 {
            return Err(Error::KernelLargerThanTorus {
                kernel_h: 2 * reach_r as usize + 1,
                kernel_w: 2 * reach_c as usize + 1,
                height: dims.height,
                width: dims.width,
            });
        }
    }

    let (m, n) = (dims.height as i64, dims.width as i64);
    let mut entries = Vec::with_capacity(rows * c_in * stencil.taps().len());
    for x1 in 0..m {
        for x2 in 0..n {
            let out_base = ((x1 * n + x2) as usize) * c_out;
            for tap in stencil.taps() {
                let (mut s1, mut s2) = (x1 + tap.offset.row, x2 + tap.offset.col);
                match boundary {
                    Boundary::Periodic => {
                        s1 = s1.rem_euclid(m);
                        s2 = s2.rem_euclid(n);
                    }
                    Boundary::Dirichlet => {
                        if !(0..m).contains(&s1) || !(0..n).contains(&s2) {
                            continue;
                        }
                    }
                }
                let in_base = ((s1 * n + s2) as usize) * c_in;
                for o in 0..c_out {
                    for i in 0..c_in {
                        entries.push((out_base + o, in_base + i, tap.matrix[o * c_in + i]));
                    }
                }
            }
        }
    }
    entries.sort_by_key(|&(r, c, _)| (r, c));

    Ok(ExplicitMatrix {
        rows,
        cols,
        boundary,
        dims,
        channels: (c_in, c_out),
        entries,
    })
}

/// Singular values of the densified matrix, descending.
pub fn dense_spectrum(matrix: &ExplicitMatrix, cfg: &ExplicitConfig) -> Result<SpectrumResult> {
    cfg.check(matrix.rows, matrix.cols)?;
    let mut clock = PhaseClock::default();
    let start = Instant::now();
    let dense = matrix.to_dense();
    let densified = Instant::now();
    clock.copy = densified - start;
    let values: Vec<f64> = nalgebra::SVD::new(dense, false, false)
        .singular_values
        .iter()
        .map(|v| v.max(0.0))
        .collect();
    clock.svd = densified.elapsed();
    Ok(
        SpectrumResult::from_unsorted(values, Method::Explicit, matrix.boundary, matrix.dims, matrix.channels)
            .with_timings(clock.timings()),
    )
}

/// A real `m x n x channels` feature map, flattened `(x1 * n + x2) * channels + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub dims: SpatialDims,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(dims: SpatialDims, channels: usize) -> Self {
        Self {
            dims,
            channels,
            data: vec![0.0; dims.points() * channels],
        }
    }

    pub fn from_fn(dims: SpatialDims, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.points() * channels);
        for x1 in 0..dims.height {
            for x2 in 0..dims.width {
                for c in 0..channels {
                    data.push(f(x1, x2, c));
                }
            }
        }
        Self { dims, channels, data }
    }

    #[inline]
    pub fn index(&self, x1: usize, x2: usize, c: usize) -> usize {
        (x1 * self.dims.width + x2) * self.channels + c
    }

    pub fn get(&self, x1: usize, x2: usize, c: usize) -> f64 {
        self.data[self.index(x1, x2, c)]
    }
}

/// Direct spatial evaluation of `(A f)(x) = sum_y M_y f(x + y)`.
pub fn apply_conv_reference(kernel: &ConvKernel, input: &FeatureMap, boundary: Boundary) -> Result<FeatureMap> {
    if input.channels != kernel.c_in() || input.data.len() != input.dims.points() * input.channels {
        return Err(Error::ShapeMismatch {
            expected: input.dims.points() * kernel.c_in(),
            found: input.data.len(),
        });
    }
    let dims = input.dims;
    let (m, n) = (dims.height as i64, dims.width as i64);
    let stencil = kernel.stencil();
    let (c_out, c_in) = (kernel.c_out(), kernel.c_in());
    let mut out = FeatureMap::zeros(dims, c_out);
    for x1 in 0..m {
        for x2 in 0..n {
            for tap in stencil.taps() {
                let (mut s1, mut s2) = (x1 + tap.offset.row, x2 + tap.offset.col);
                match boundary {
                    Boundary::Periodic => {
                        s1 = s1.rem_euclid(m);
                        s2 = s2.rem_euclid(n);
                    }
                    Boundary::Dirichlet => {
                        if !(0..m).contains(&s1) || !(0..n).contains(&s2) {
                            continue;
                        }
                    }
                }
                for o in 0..c_out {
                    let mut acc = 0.0;
                    for i in 0..c_in {
                        acc += tap.matrix[o * c_in + i] * input.get(s1 as usize, s2 as usize, i);
                    }
                    let idx = out.index(x1 as usize, x2 as usize, o);
                    out.data[idx] += acc;
                }
            }
        }
    }
    Ok(out)
}
