//! Convolution kernels, spatial extents and the frequency torus.
//!
//! A kernel is a real tensor indexed `(o, i, p, q)` with `o < c_out`,
//! `i < c_in`, `p < k_h`, `q < k_w`. Tensor index `(p, q)` sits at the
//! spatial offset `y(p, q) = (p - k_h / 2, q - k_w / 2)` relative to the
//! output position, and the operator acts as
//!
//! ```text
//! (A f)(x) = sum_{y in N} M_y f(x + y)
//! ```
//!
//! where `M_y` is the `c_out x c_in` slice of the weights at that offset.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Storage precision of the weights as they were supplied.
///
/// Computation always runs in `f64`; `F32` input is widened on load.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelShape {
    pub c_out: usize,
    pub c_in: usize,
    pub k_h: usize,
    pub k_w: usize,
}

impl KernelShape {
    pub fn new(c_out: usize, c_in: usize, k_h: usize, k_w: usize) -> Self {
        Self { c_out, c_in, k_h, k_w }
    }

    pub fn len(&self) -> usize {
        self.c_out * self.c_in * self.k_h * self.k_w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major flat index of `(o, i, p, q)`.
    #[inline]
    pub fn index(&self, o: usize, i: usize, p: usize, q: usize) -> usize {
        ((o * self.c_in + i) * self.k_h + p) * self.k_w + q
    }

    fn unravel(&self, flat: usize) -> [usize; 4] {
        let q = flat % self.k_w;
        let rest = flat / self.k_w;
        let p = rest % self.k_h;
        let rest = rest / self.k_h;
        [rest / self.c_in, rest % self.c_in, p, q]
    }

    fn check_nonzero(&self) -> Result<()> {
        for (value, what) in [
            (self.c_out, "c_out"),
            (self.c_in, "c_in"),
            (self.k_h, "k_h"),
            (self.k_w, "k_w"),
        ] {
            if value == 0 {
                return Err(Error::ZeroDimension { what });
            }
        }
        Ok(())
    }
}

impl fmt::Display for KernelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.c_out, self.c_in, self.k_h, self.k_w)
    }
}

/// Checks that a weight buffer forms a valid kernel of the given shape.
pub fn validate_kernel(shape: &KernelShape, weights: &[f64]) -> Result<()> {
    shape.check_nonzero()?;
    if weights.len() != shape.len() {
        return Err(Error::ShapeMismatch {
            expected: shape.len(),
            found: weights.len(),
        });
    }
    if let Some(flat) = weights.iter().position(|w| !w.is_finite()) {
        return Err(Error::NonFiniteWeight {
            index: shape.unravel(flat),
            value: weights[flat],
        });
    }
    Ok(())
}

/// Spatial offset of a kernel tap, `(row, col)` = `(y1, y2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Offset {
    pub row: i64,
    pub col: i64,
}

impl Offset {
    pub const fn new(row: i64, col: i64) -> Self {
        Self { row, col }
    }
}

/// Offsets `y(p, q) = (p - floor(k_h/2), q - floor(k_w/2))` in row-major
/// tensor order. Even extents lean towards negative offsets.
pub fn neighborhood_offsets(k_h: usize, k_w: usize) -> Vec<Offset> {
    let ch = (k_h / 2) as i64;
    let cw = (k_w / 2) as i64;
    (0..k_h as i64)
        .flat_map(|p| (0..k_w as i64).map(move |q| Offset::new(p - ch, q - cw)))
        .collect()
}

/// A validated, immutable convolution kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    shape: KernelShape,
    weights: Vec<f64>,
    precision: Precision,
}

impl ConvKernel {
    pub fn new(shape: KernelShape, weights: Vec<f64>) -> Result<Self> {
        validate_kernel(&shape, &weights)?;
        Ok(Self {
            shape,
            weights,
            precision: Precision::F64,
        })
    }

    /// Widens single-precision weights; the source precision is remembered.
    pub fn from_f32(shape: KernelShape, weights: &[f32]) -> Result<Self> {
        let widened = weights.iter().map(|&w| w as f64).collect();
        let mut kernel = Self::new(shape, widened)?;
        kernel.precision = Precision::F32;
        Ok(kernel)
    }

    pub fn from_fn(shape: KernelShape, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Result<Self> {
        shape.check_nonzero()?;
        let mut weights = Vec::with_capacity(shape.len());
        for o in 0..shape.c_out {
            for i in 0..shape.c_in {
                for p in 0..shape.k_h {
                    for q in 0..shape.k_w {
                        weights.push(f(o, i, p, q));
                    }
                }
            }
        }
        Self::new(shape, weights)
    }

    /// The pointwise identity on `channels` channels.
    pub fn identity(channels: usize) -> Result<Self> {
        Self::from_fn(KernelShape::new(channels, channels, 1, 1), |o, i, _, _| {
            if o == i {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn c_out(&self) -> usize {
        self.shape.c_out
    }

    pub fn c_in(&self) -> usize {
        self.shape.c_in
    }

    pub fn k_h(&self) -> usize {
        self.shape.k_h
    }

    pub fn k_w(&self) -> usize {
        self.shape.k_w
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, p: usize, q: usize) -> f64 {
        self.weights[self.shape.index(o, i, p, q)]
    }

    /// Multiplies every weight by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        let weights = self.weights.iter().map(|w| w * alpha).collect();
        Self::new(self.shape, weights)
    }

    /// Spatially reversed kernel: tap `(p, q)` moves to `(k_h-1-p, k_w-1-q)`.
    pub fn flipped(&self) -> Self {
        let s = self.shape;
        Self::from_fn(s, |o, i, p, q| self.weight(o, i, s.k_h - 1 - p, s.k_w - 1 - q))
            .expect("flipping preserves validity")
    }

    /// Sum of squared weights, i.e. `sum_y ||M_y||_F^2`.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// The kernel as a list of `(offset, M_y)` taps with the default centering.
    pub fn stencil(&self) -> Stencil {
        let s = self.shape;
        let offsets = neighborhood_offsets(s.k_h, s.k_w);
        let taps = offsets
            .into_iter()
            .enumerate()
            .map(|(flat, offset)| {
                let (p, q) = (flat / s.k_w, flat % s.k_w);
                let mut matrix = Vec::with_capacity(s.c_out * s.c_in);
                for o in 0..s.c_out {
                    for i in 0..s.c_in {
                        matrix.push(self.weight(o, i, p, q));
                    }
                }
                Tap { offset, matrix }
            })
            .collect();
        Stencil {
            c_out: s.c_out,
            c_in: s.c_in,
            taps,
        }
    }
}

/// One multiplication matrix `M_y` (row-major `c_out x c_in`) at offset `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tap {
    pub offset: Offset,
    pub matrix: Vec<f64>,
}

/// The neighborhood model of a kernel: taps in row-major tensor order.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    c_out: usize,
    c_in: usize,
    taps: Vec<Tap>,
}

impl Stencil {
    pub fn new(c_out: usize, c_in: usize, taps: Vec<Tap>) -> Result<Self> {
        if c_out == 0 {
            return Err(Error::ZeroDimension { what: "c_out" });
        }
        if c_in == 0 {
            return Err(Error::ZeroDimension { what: "c_in" });
        }
        for tap in &taps {
            if tap.matrix.len() != c_out * c_in {
                return Err(Error::ShapeMismatch {
                    expected: c_out * c_in,
                    found: tap.matrix.len(),
                });
            }
        }
        Ok(Self { c_out, c_in, taps })
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    /// Adds `shift` to every offset.
    pub fn shifted(&self, shift: Offset) -> Self {
        let taps = self
            .taps
            .iter()
            .map(|t| Tap {
                offset: Offset::new(t.offset.row + shift.row, t.offset.col + shift.col),
                matrix: t.matrix.clone(),
            })
            .collect();
        Self { taps, ..*self }
    }

    /// Largest `|y|` per axis, `(rows, cols)`.
    pub fn reach(&self) -> (u64, u64) {
        self.taps.iter().fold((0, 0), |(r, c), t| {
            (r.max(t.offset.row.unsigned_abs()), c.max(t.offset.col.unsigned_abs()))
        })
    }
}

/// Extent of the periodic grid: `width = n` columns, `height = m` rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpatialDims {
    pub width: usize,
    pub height: usize,
}

impl SpatialDims {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::ZeroDimension { what: "width" });
        }
        if height == 0 {
            return Err(Error::ZeroDimension { what: "height" });
        }
        Ok(Self { width, height })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    /// Number of grid points `n * m`.
    pub fn points(&self) -> usize {
        self.width * self.height
    }
}

impl fmt::Display for SpatialDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// A point `k = (i/m, j/n)` of the dual torus.
///
/// The first component pairs with the row offset `y1` (an axis of length
/// `m`), the second with the column offset `y2` (length `n`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frequency {
    pub row: f64,
    pub col: f64,
}

impl Frequency {
    pub const ZERO: Frequency = Frequency { row: 0.0, col: 0.0 };

    pub fn new(row: f64, col: f64) -> Self {
        Self { row, col }
    }

    /// `2 pi <k, y>`.
    #[inline]
    pub fn phase(&self, y: Offset) -> f64 {
        std::f64::consts::TAU * (self.row * y.row as f64 + self.col * y.col as f64)
    }
}

/// All well-defined frequencies of an `m x n` torus, row-major in `(i, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrequencyGrid {
    dims: SpatialDims,
}

impl FrequencyGrid {
    pub fn new(dims: SpatialDims) -> Self {
        Self { dims }
    }

    pub fn dims(&self) -> SpatialDims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.points()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(i, j)` of the frequency at flat position `index`.
    #[inline]
    pub fn indices(&self, index: usize) -> (usize, usize) {
        (index / self.dims.width, index % self.dims.width)
    }

    #[inline]
    pub fn flat(&self, i: usize, j: usize) -> usize {
        i * self.dims.width + j
    }

    #[inline]
    pub fn frequency(&self, index: usize) -> Frequency {
        let (i, j) = self.indices(index);
        Frequency::new(i as f64 / self.dims.height as f64, j as f64 / self.dims.width as f64)
    }

    /// Flat index of `-k mod 1`.
    pub fn negated(&self, index: usize) -> usize {
        let (i, j) = self.indices(index);
        let ni = (self.dims.height - i) % self.dims.height;
        let nj = (self.dims.width - j) % self.dims.width;
        self.flat(ni, nj)
    }

    pub fn iter(&self) -> impl Iterator<Item = Frequency> + '_ {
        (0..self.len()).map(|idx| self.frequency(idx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_3x3_centered() {
        let offs = neighborhood_offsets(3, 3);
        assert_eq!(offs.len(), 9);
        assert_eq!(offs[4], Offset::new(0, 0));
        let rows: Vec<i64> = offs.iter().map(|o| o.row).collect();
        assert_eq!(rows, vec![-1, -1, -1, 0, 0, 0, 1, 1, 1]);
        let cols: Vec<i64> = offs.iter().map(|o| o.col).collect();
        assert_eq!(cols, vec![-1, 0, 1, -1, 0, 1, -1, 0, 1]);
    }

    #[test]
    fn offsets_pointwise() {
        assert_eq!(neighborhood_offsets(1, 1), vec![Offset::new(0, 0)]);
    }

    #[test]
    fn offsets_even_extent_lean_negative() {
        let offs = neighborhood_offsets(4, 3);
        assert_eq!(offs.len(), 12);
        let mut rows: Vec<i64> = offs.iter().map(|o| o.row).collect();
        rows.dedup();
        assert_eq!(rows, vec![-2, -1, 0, 1]);
        let cols: Vec<i64> = offs[..3].iter().map(|o| o.col).collect();
        assert_eq!(cols, vec![-1, 0, 1]);
    }

    #[test]
    fn validate_accepts_identity() {
        let k = ConvKernel::identity(2).unwrap();
        assert!(validate_kernel(&k.shape(), k.weights()).is_ok());
    }

    #[test]
    fn validate_reports_nan_index() {
        let shape = KernelShape::new(2, 2, 3, 3);
        let mut w = vec![0.5; shape.len()];
        w[shape.index(0, 0, 1, 1)] = f64::NAN;
        match validate_kernel(&shape, &w) {
            Err(Error::NonFiniteWeight { index, .. }) => assert_eq!(index, [0, 0, 1, 1]),
            other => panic!("unexpected {other:?}"),
        }
        w[shape.index(0, 0, 1, 1)] = 0.0;
        w[shape.index(1, 0, 2, 1)] = f64::INFINITY;
        match ConvKernel::new(shape, w) {
            Err(Error::NonFiniteWeight { index, .. }) => assert_eq!(index, [1, 0, 2, 1]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_zero_dims() {
        let shape = KernelShape::new(0, 1, 3, 3);
        assert!(matches!(
            validate_kernel(&shape, &[]),
            Err(Error::ZeroDimension { what: "c_out" })
        ));
        assert!(matches!(
            ConvKernel::from_fn(KernelShape::new(1, 1, 0, 3), |_, _, _, _| 1.0),
            Err(Error::ZeroDimension { what: "k_h" })
        ));
    }

    #[test]
    fn validate_rejects_wrong_length() {
        let shape = KernelShape::new(1, 1, 3, 3);
        assert!(matches!(
            validate_kernel(&shape, &[1.0; 8]),
            Err(Error::ShapeMismatch { expected: 9, found: 8 })
        ));
    }

    #[test]
    fn stencil_slices_follow_tensor_order() {
        let shape = KernelShape::new(2, 3, 3, 2);
        let k = ConvKernel::from_fn(shape, |o, i, p, q| (1000 * o + 100 * i + 10 * p + q) as f64).unwrap();
        let st = k.stencil();
        assert_eq!(st.taps().len(), 6);
        let tap = &st.taps()[3]; // (p, q) = (1, 1)
        assert_eq!(tap.offset, Offset::new(0, 0));
        assert_eq!(tap.matrix[3 + 2], 1211.0);
    }

    #[test]
    fn flip_reverses_offsets() {
        let shape = KernelShape::new(1, 1, 3, 3);
        let k = ConvKernel::from_fn(shape, |_, _, p, q| (3 * p + q) as f64).unwrap();
        let f = k.flipped();
        assert_eq!(f.weight(0, 0, 0, 0), 8.0);
        assert_eq!(f.weight(0, 0, 2, 1), 1.0);
    }

    #[test]
    fn grid_layout_and_negation() {
        let dims = SpatialDims::new(4, 6).unwrap();
        let grid = FrequencyGrid::new(dims);
        assert_eq!(grid.len(), 24);
        let k = grid.frequency(grid.flat(5, 3));
        assert_eq!(k, Frequency::new(5.0 / 6.0, 0.75));
        for idx in 0..grid.len() {
            let neg = grid.negated(idx);
            assert_eq!(grid.negated(neg), idx);
            let (a, b) = (grid.frequency(idx), grid.frequency(neg));
            assert!(((a.row + b.row) % 1.0).abs() < 1e-15);
            assert!(((a.col + b.col) % 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_points_are_distinct_and_in_unit_square() {
        let grid = FrequencyGrid::new(SpatialDims::new(5, 3).unwrap());
        let pts: Vec<Frequency> = grid.iter().collect();
        assert_eq!(pts.len(), 15);
        for (a, p) in pts.iter().enumerate() {
            assert!((0.0..1.0).contains(&p.row) && (0.0..1.0).contains(&p.col));
            for q in &pts[a + 1..] {
                assert_ne!(p, q);
            }
        }
    }
}
