//! Dense complex SVD of symbol blocks by one-sided (Hestenes) Jacobi, and
//! assembly of the global spectrum from a [`SymbolField`].
//!
//! The `min(c_out, c_in)` vectors of length `max(c_out, c_in)` (columns of
//! `A` when `c_out > c_in`, rows of `A` otherwise) are rotated pairwise
//! until mutually orthogonal. Their norms are the singular values; the
//! accumulated rotations give the other factor.

use std::ops::Range;
use std::sync::Mutex;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cmatrix::ComplexMatrix;
use crate::config::ComputeOptions;
use crate::error::{Error, Result};
use crate::kernel::{Frequency, SpatialDims};
use crate::spectrum::{sort_descending, Boundary, Method, PhaseClock, SpectrumResult};
use crate::symbol::SymbolField;

pub const DEFAULT_MAX_SWEEPS: usize = 100;

/// Factors `A = U diag(sigma) V*` of one block, `sigma` descending.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSvd {
    /// `c_out x r`, orthonormal columns.
    pub u: ComplexMatrix,
    pub sigma: Vec<f64>,
    /// `c_in x r`, orthonormal columns.
    pub v: ComplexMatrix,
}

impl BlockSvd {
    pub fn rank_bound(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let r = self.sigma.len();
        let us = ComplexMatrix::from_fn(self.u.rows(), r, |row, c| self.u[(row, c)] * self.sigma[c]);
        us.matmul(&self.v.adjoint())
    }

    pub fn at(self, frequency: Frequency, index: (usize, usize)) -> SvdTriplet {
        SvdTriplet {
            frequency,
            index,
            u: self.u,
            sigma: self.sigma,
            v: self.v,
        }
    }
}

/// Per-frequency SVD factors, tagged with the frequency they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdTriplet {
    pub frequency: Frequency,
    /// `(i, j)` on the frequency grid.
    pub index: (usize, usize),
    pub u: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Scratch buffers for one worker. Vectors are stored split into real and
/// imaginary planes so the inner loops vectorize.
#[derive(Debug, Default)]
pub struct JacobiWorkspace {
    re: Vec<f64>,
    im: Vec<f64>,
    wre: Vec<f64>,
    wim: Vec<f64>,
    norms: Vec<f64>,
    gather: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug)]
struct Orientation {
    /// Rows of `A` are the working vectors.
    rows: bool,
    count: usize,
    len: usize,
}

impl Orientation {
    fn of(c_out: usize, c_in: usize) -> Self {
        if c_out <= c_in {
            Orientation {
                rows: true,
                count: c_out,
                len: c_in,
            }
        } else {
            Orientation {
                rows: false,
                count: c_in,
                len: c_out,
            }
        }
    }
}

#[derive(Debug)]
struct NotConverged;

impl JacobiWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn load(&mut self, block: &[Complex64], c_out: usize, c_in: usize, accumulate: bool) -> Orientation {
        let o = Orientation::of(c_out, c_in);
        let total = o.count * o.len;
        self.re.resize(total, 0.0);
        self.im.resize(total, 0.0);
        if o.rows {
            for (idx, z) in block.iter().enumerate() {
                self.re[idx] = z.re;
                self.im[idx] = z.im;
            }
        } else {
            for r in 0..c_out {
                for c in 0..c_in {
                    let z = block[r * c_in + c];
                    self.re[c * o.len + r] = z.re;
                    self.im[c * o.len + r] = z.im;
                }
            }
        }
        self.norms.resize(o.count, 0.0);
        if accumulate {
            let w = o.count * o.count;
            self.wre.clear();
            self.wre.resize(w, 0.0);
            self.wim.clear();
            self.wim.resize(w, 0.0);
            for d in 0..o.count {
                self.wre[d * o.count + d] = 1.0;
            }
        }
        o
    }

    fn orthogonalize(&mut self, o: Orientation, accumulate: bool, max_sweeps: usize) -> Result<(), NotConverged> {
        let (count, len) = (o.count, o.len);
        if count < 2 {
            return Ok(());
        }
        let tol = f64::EPSILON * len as f64;
        let tol2 = tol * tol;
        for _ in 0..max_sweeps {
            for k in 0..count {
                let span = k * len..(k + 1) * len;
                self.norms[k] = sum_sq(&self.re[span.clone()], &self.im[span]);
            }
            let mut rotated = false;
            for p in 0..count - 1 {
                for q in p + 1..count {
                    let alpha = self.norms[p];
                    let beta = self.norms[q];
                    let (xpr, xqr) = pair_mut(&mut self.re, p, q, len);
                    let (xpi, xqi) = pair_mut(&mut self.im, p, q, len);
                    let (gr, gi) = dot_conj(xpr, xpi, xqr, xqi);
                    let g2 = gr * gr + gi * gi;
                    // Written so that NaN falls through to a rotation and
                    // eventually exhausts the sweep budget.
                    if g2 <= tol2 * (alpha * beta) {
                        continue;
                    }
                    let g = g2.sqrt();
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * g);
                    let t = if zeta.abs() > 1e150 {
                        0.5 / zeta
                    } else {
                        zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    // exp(-i arg(gamma))
                    let (er, ei) = (gr / g, -gi / g);
                    rotate(xpr, xpi, xqr, xqi, c, s, er, ei);
                    self.norms[p] = alpha - t * g;
                    self.norms[q] = beta + t * g;
                    if accumulate {
                        let (wpr, wqr) = pair_mut(&mut self.wre, p, q, count);
                        let (wpi, wqi) = pair_mut(&mut self.wim, p, q, count);
                        rotate(wpr, wpi, wqr, wqi, c, s, er, ei);
                    }
                }
            }
            if !rotated {
                return Ok(());
            }
        }
        Err(NotConverged)
    }

    fn vector_norms(&mut self, o: Orientation) {
        for k in 0..o.count {
            let span = k * o.len..(k + 1) * o.len;
            self.norms[k] = sum_sq(&self.re[span.clone()], &self.im[span]).sqrt();
        }
    }
}

#[inline]
fn pair_mut(buf: &mut [f64], p: usize, q: usize, len: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (head, tail) = buf.split_at_mut(q * len);
    (&mut head[p * len..(p + 1) * len], &mut tail[..len])
}

#[inline]
fn sum_sq(re: &[f64], im: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut cr = re.chunks_exact(4);
    let mut ci = im.chunks_exact(4);
    for (a, b) in (&mut cr).zip(&mut ci) {
        for l in 0..4 {
            acc[l] += a[l] * a[l] + b[l] * b[l];
        }
    }
    let mut tail = 0.0;
    for (a, b) in cr.remainder().iter().zip(ci.remainder()) {
        tail += a * a + b * b;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `x_p^H x_q` as `(re, im)`.
#[inline]
fn dot_conj(pr: &[f64], pi: &[f64], qr: &[f64], qi: &[f64]) -> (f64, f64) {
    let n = pr.len();
    let (pr, pi, qr, qi) = (&pr[..n], &pi[..n], &qr[..n], &qi[..n]);
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let body = n - n % 4;
    let mut l = 0;
    while l < body {
        for lane in 0..4 {
            let (a, b, c, d) = (pr[l + lane], pi[l + lane], qr[l + lane], qi[l + lane]);
            re[lane] += a * c + b * d;
            im[lane] += a * d - b * c;
        }
        l += 4;
    }
    let (mut tr, mut ti) = (0.0, 0.0);
    for l in body..n {
        tr += pr[l] * qr[l] + pi[l] * qi[l];
        ti += pr[l] * qi[l] - pi[l] * qr[l];
    }
    (
        (re[0] + re[1]) + (re[2] + re[3]) + tr,
        (im[0] + im[1]) + (im[2] + im[3]) + ti,
    )
}

/// `x_p <- c x_p - s e x_q`, `x_q <- s x_p + c e x_q` with `e = er + i ei`.
#[inline]
#[allow(clippy::too_many_arguments)]
fn rotate(pr: &mut [f64], pi: &mut [f64], qr: &mut [f64], qi: &mut [f64], c: f64, s: f64, er: f64, ei: f64) {
    let n = pr.len();
    let (pi, qr, qi) = (&mut pi[..n], &mut qr[..n], &mut qi[..n]);
    for l in 0..n {
        let tr = er * qr[l] - ei * qi[l];
        let ti = er * qi[l] + ei * qr[l];
        let (ar, ai) = (pr[l], pi[l]);
        pr[l] = c * ar - s * tr;
        pi[l] = c * ai - s * ti;
        qr[l] = s * ar + c * tr;
        qi[l] = s * ai + c * ti;
    }
}

/// Singular values of a row-major `c_out x c_in` block, written descending
/// into `out[..min(c_out, c_in)]`.
pub fn block_singular_values(
    block: &[Complex64],
    c_out: usize,
    c_in: usize,
    ws: &mut JacobiWorkspace,
    max_sweeps: usize,
    out: &mut [f64],
) -> Result<()> {
    let o = ws.load(block, c_out, c_in, false);
    ws.orthogonalize(o, false, max_sweeps)
        .map_err(|_| Error::ConvergenceFailure {
            sweeps: max_sweeps,
            frequency: None,
        })?;
    ws.vector_norms(o);
    out[..o.count].copy_from_slice(&ws.norms[..o.count]);
    sort_descending(&mut out[..o.count]);
    Ok(())
}

/// Full SVD of one block with the default sweep cap.
pub fn svd_block(block: &ComplexMatrix) -> Result<BlockSvd> {
    svd_block_with(block, &mut JacobiWorkspace::new(), DEFAULT_MAX_SWEEPS)
}

pub fn svd_block_with(block: &ComplexMatrix, ws: &mut JacobiWorkspace, max_sweeps: usize) -> Result<BlockSvd> {
    let (c_out, c_in) = (block.rows(), block.cols());
    let o = ws.load(block.as_slice(), c_out, c_in, true);
    ws.orthogonalize(o, true, max_sweeps)
        .map_err(|_| Error::ConvergenceFailure {
            sweeps: max_sweeps,
            frequency: None,
        })?;
    ws.vector_norms(o);
    let (count, len) = (o.count, o.len);

    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| ws.norms[b].total_cmp(&ws.norms[a]));
    let sigma: Vec<f64> = order.iter().map(|&k| ws.norms[k]).collect();

    // Normalized working vectors, columns of a len x count matrix.
    let mut q = ComplexMatrix::zeros(len, count);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let null_floor = smax * len as f64 * f64::EPSILON;
    let mut null_cols = Vec::new();
    for (col, &k) in order.iter().enumerate() {
        let s = ws.norms[k];
        if s > null_floor && s > 0.0 {
            for l in 0..len {
                q[(l, col)] = Complex64::new(ws.re[k * len + l], ws.im[k * len + l]) / s;
            }
        } else {
            null_cols.push(col);
        }
    }
    complete_orthonormal(&mut q, &null_cols);

    let w = ComplexMatrix::from_fn(count, count, |row, col| {
        let k = order[col];
        Complex64::new(ws.wre[k * count + row], ws.wim[k * count + row])
    });

    // Rows orientation: A^T = Q S W^H, so A = conj(W) S conj(Q)^H.
    let (u, v) = if o.rows { (w.conj(), q.conj()) } else { (q, w) };
    Ok(BlockSvd { u, sigma, v })
}

/// Replaces the listed columns of `q` by unit vectors orthogonal to every
/// other column (classical Gram-Schmidt, applied twice).
fn complete_orthonormal(q: &mut ComplexMatrix, null_cols: &[usize]) {
    if null_cols.is_empty() {
        return;
    }
    let (len, count) = (q.rows(), q.cols());
    let mut accepted: Vec<usize> = (0..count).filter(|c| !null_cols.contains(c)).collect();
    let mut candidate = 0;
    for &col in null_cols {
        loop {
            assert!(candidate < len, "orthonormal completion ran out of basis vectors");
            let mut v = vec![Complex64::new(0.0, 0.0); len];
            v[candidate] = Complex64::new(1.0, 0.0);
            candidate += 1;
            for _ in 0..2 {
                for &a in &accepted {
                    let proj: Complex64 = (0..len).map(|l| q[(l, a)].conj() * v[l]).sum();
                    for (l, slot) in v.iter_mut().enumerate() {
                        *slot -= proj * q[(l, a)];
                    }
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.5 {
                for (l, z) in v.into_iter().enumerate() {
                    q[(l, col)] = z / norm;
                }
                accepted.push(col);
                break;
            }
        }
    }
}

/// Singular values of blocks `range` of `field`, written consecutively into
/// `out` (`r` values per block, each run descending). This is the unit of
/// work that callers partition across workers.
pub fn field_singular_values(
    field: &SymbolField,
    range: Range<usize>,
    ws: &mut JacobiWorkspace,
    max_sweeps: usize,
    out: &mut [f64],
) -> Result<()> {
    let (c_out, c_in) = (field.c_out(), field.c_in());
    let r = c_out.min(c_in);
    let mut gather = std::mem::take(&mut ws.gather);
    gather.resize(field.block_len(), Complex64::new(0.0, 0.0));
    let mut result = Ok(());
    for (slot, idx) in out.chunks_exact_mut(r).zip(range) {
        let block = match field.block_slice(idx) {
            Some(b) => b,
            None => {
                field.copy_block(idx, &mut gather);
                &gather
            }
        };
        if let Err(e) = block_singular_values(block, c_out, c_in, ws, max_sweeps, slot) {
            result = Err(attach_frequency(e, field.grid().indices(idx)));
            break;
        }
    }
    ws.gather = gather;
    result
}

pub(crate) fn attach_frequency(err: Error, at: (usize, usize)) -> Error {
    match err {
        Error::ConvergenceFailure { sweeps, .. } => Error::ConvergenceFailure {
            sweeps,
            frequency: Some(at),
        },
        other => other,
    }
}

/// Keeps the error with the smallest block index so the reported failure
/// does not depend on scheduling.
#[derive(Default)]
pub(crate) struct FirstError(Mutex<Option<(usize, Error)>>);

impl FirstError {
    pub fn record(&self, index: usize, err: Error) {
        let mut slot = self.0.lock().expect("poisoned");
        if slot.as_ref().is_none_or(|(i, _)| index < *i) {
            *slot = Some((index, err));
        }
    }

    pub fn into_result(self) -> Result<()> {
        match self.0.into_inner().expect("poisoned") {
            Some((_, e)) => Err(e),
            None => Ok(()),
        }
    }
}

/// Spectrum of a field plus, unless values-only, the per-frequency factors.
#[derive(Clone, Debug)]
pub struct FieldSpectrum {
    pub spectrum: SpectrumResult,
    pub triplets: Option<Vec<SvdTriplet>>,
}

/// Concatenates every block's singular values and sorts them descending.
///
/// With `values_only` no rotations are accumulated. Timings combine the
/// field's own build cost with the SVD phase measured here.
pub fn spectrum_from_field(
    field: &SymbolField,
    values_only: bool,
    method: Method,
    opts: &ComputeOptions,
) -> Result<FieldSpectrum> {
    let (c_out, c_in) = (field.c_out(), field.c_in());
    let r = c_out.min(c_in);
    let blocks = field.len();
    let max_sweeps = opts.max_sweeps;
    const CHUNK: usize = 64;

    opts.run(|| {
        let start = Instant::now();
        let errors = FirstError::default();
        let mut values = vec![0.0; blocks * r];
        let triplets = if values_only {
            values
                .par_chunks_mut(r * CHUNK)
                .enumerate()
                .for_each_init(JacobiWorkspace::new, |ws, (chunk, out)| {
                    let first = chunk * CHUNK;
                    let range = first..(first + CHUNK).min(blocks);
                    if let Err(e) = field_singular_values(field, range, ws, max_sweeps, out) {
                        errors.record(first, e);
                    }
                });
            None
        } else {
            let grid = field.grid();
            let triplets: Vec<Option<SvdTriplet>> = (0..blocks)
                .into_par_iter()
                .with_min_len(16)
                .map_init(JacobiWorkspace::new, |ws, idx| {
                    match svd_block_with(&field.block(idx), ws, max_sweeps) {
                        Ok(svd) => Some(svd.at(grid.frequency(idx), grid.indices(idx))),
                        Err(e) => {
                            errors.record(idx, attach_frequency(e, grid.indices(idx)));
                            None
                        }
                    }
                })
                .collect();
            let triplets: Vec<SvdTriplet> = triplets.into_iter().flatten().collect();
            for (slot, t) in values.chunks_exact_mut(r).zip(&triplets) {
                slot.copy_from_slice(&t.sigma);
            }
            Some(triplets)
        };
        errors.into_result()?;
        values.par_sort_by(|a, b| b.total_cmp(a));

        let mut clock = PhaseClock::default();
        clock.absorb(&field.build_timings());
        clock.svd += start.elapsed();
        let spectrum = SpectrumResult::from_sorted(values, method, Boundary::Periodic, field.dims(), (c_in, c_out))
            .with_timings(clock.timings());
        Ok(FieldSpectrum { spectrum, triplets })
    })?
}

/// Global singular vector of the periodic operator for column `column` of
/// a per-frequency factor:
/// `v(x, c) = exp(2 pi i <k, x>) W[c, column] / sqrt(n m)`, flattened as
/// `(x1 * n + x2) * channels + c`.
pub fn materialize_singular_vector(
    triplet: &SvdTriplet,
    column: usize,
    side: Side,
    dims: SpatialDims,
) -> Result<Vec<Complex64>> {
    let factor = match side {
        Side::Left => &triplet.u,
        Side::Right => &triplet.v,
    };
    if column >= factor.cols() {
        return Err(Error::IndexOutOfRange {
            index: column,
            len: factor.cols(),
        });
    }
    let channels = factor.rows();
    let scale = 1.0 / (dims.points() as f64).sqrt();
    let k = triplet.frequency;
    let mut out = Vec::with_capacity(dims.points() * channels);
    for x1 in 0..dims.height {
        for x2 in 0..dims.width {
            let theta = std::f64::consts::TAU * (k.row * x1 as f64 + k.col * x2 as f64);
            let wave = Complex64::from_polar(scale, theta);
            for c in 0..channels {
                out.push(wave * factor[(c, column)]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        ComplexMatrix::from_fn(rows, cols, |_, _| Complex64::new(next(), next()))
    }

    fn assert_factorization(a: &ComplexMatrix, svd: &BlockSvd) {
        let r = a.rows().min(a.cols());
        assert_eq!(svd.sigma.len(), r);
        assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        let eye = ComplexMatrix::identity(r);
        assert!(svd.u.adjoint().matmul(&svd.u).max_abs_diff(&eye) < 1e-10);
        assert!(svd.v.adjoint().matmul(&svd.v).max_abs_diff(&eye) < 1e-10);
        let err = svd.reconstruct().max_abs_diff(a);
        assert!(err <= 1e-10 * a.frobenius_norm().max(1.0), "reconstruction error {err}");
    }

    #[test]
    fn identity_block() {
        let svd = svd_block(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(svd.sigma, vec![1.0, 1.0]);
        assert_factorization(&ComplexMatrix::identity(2), &svd);
    }

    #[test]
    fn scalar_block() {
        let a = ComplexMatrix::from_vec(1, 1, vec![Complex64::new(-1.0 / 3.0, 0.0)]);
        let svd = svd_block(&a).unwrap();
        assert_eq!(svd.sigma, vec![1.0 / 3.0]);
        assert_factorization(&a, &svd);
    }

    #[test]
    fn random_shapes_factor() {
        for (seed, &(r, c)) in [(3, 2), (2, 3), (5, 5), (1, 4), (4, 1), (16, 16), (7, 12)]
            .iter()
            .enumerate()
        {
            let a = lcg_matrix(r, c, seed as u64 + 11);
            assert_factorization(&a, &svd_block(&a).unwrap());
        }
    }

    #[test]
    fn rank_deficient_block_completes_basis() {
        // Rank one: outer product of two vectors.
        let x = [
            Complex64::new(1.0, 2.0),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.0, 1.0),
        ];
        let y = [Complex64::new(0.3, -0.1), Complex64::new(2.0, 0.5)];
        let a = ComplexMatrix::from_fn(3, 2, |r, c| x[r] * y[c].conj());
        let svd = svd_block(&a).unwrap();
        assert!(svd.sigma[1] < 1e-14);
        assert_factorization(&a, &svd);

        let zero = ComplexMatrix::zeros(2, 3);
        let svd = svd_block(&zero).unwrap();
        assert_eq!(svd.sigma, vec![0.0, 0.0]);
        assert_factorization(&zero, &svd);
    }

    #[test]
    fn values_only_matches_full_bitwise() {
        for &(r, c) in &[(3, 5), (6, 4), (8, 8)] {
            let a = lcg_matrix(r, c, 99);
            let full = svd_block(&a).unwrap();
            let mut out = vec![0.0; r.min(c)];
            block_singular_values(a.as_slice(), r, c, &mut JacobiWorkspace::new(), 100, &mut out).unwrap();
            assert_eq!(out, full.sigma);
        }
    }

    #[test]
    fn nan_block_hits_sweep_cap() {
        let mut a = lcg_matrix(3, 3, 5);
        a[(1, 2)] = Complex64::new(f64::NAN, 0.0);
        let err = svd_block(&a).unwrap_err();
        assert!(matches!(err, Error::ConvergenceFailure { sweeps: 100, .. }));
    }

    #[test]
    fn materialize_rejects_bad_column() {
        let svd = svd_block(&ComplexMatrix::identity(2)).unwrap();
        let t = svd.at(Frequency::ZERO, (0, 0));
        let dims = SpatialDims::square(2).unwrap();
        assert!(matches!(
            materialize_singular_vector(&t, 2, Side::Left, dims),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn materialized_constant_mode() {
        let svd = svd_block(&ComplexMatrix::identity(2)).unwrap();
        let t = svd.at(Frequency::ZERO, (0, 0));
        let dims = SpatialDims::new(4, 2).unwrap();
        let v = materialize_singular_vector(&t, 0, Side::Right, dims).unwrap();
        assert_eq!(v.len(), 16);
        let expect = 1.0 / 8f64.sqrt();
        for x in 0..8 {
            assert!((v[2 * x] - Complex64::new(expect, 0.0)).norm() < 1e-15);
            assert!(v[2 * x + 1].norm() < 1e-15);
        }
    }
}
