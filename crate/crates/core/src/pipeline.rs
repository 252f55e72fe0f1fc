//! End-to-end spectrum computation for each method.
//!
//! Values-only LFA with block-contiguous storage never materializes the
//! whole symbol field: workers build a chunk of blocks into a private buffer
//! and factor it immediately, so memory is bounded by the output spectrum.
//! Every other configuration builds the full [`SymbolField`] first.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::ComputeOptions;
use crate::error::{Error, Result};
use crate::explicit::{build_explicit, dense_spectrum, ExplicitConfig};
use crate::fft::fft_symbol_field;
use crate::kernel::{ConvKernel, FrequencyGrid, SpatialDims, Stencil};
use crate::spectrum::{Boundary, Method, PhaseClock, SpectrumResult};
use crate::svd::{
    attach_frequency, block_singular_values, spectrum_from_field, FieldSpectrum, FirstError, JacobiWorkspace,
};
use crate::symbol::{build_symbol_field, symbol_into, Layout};

/// Blocks handled per work item.
const CHUNK: usize = 64;

/// Spectrum of `kernel` on the `dims` grid by `method`.
///
/// Only the explicit method supports [`Boundary::Dirichlet`]. Singular
/// vectors are returned for LFA and FFT when `opts.values_only` is false.
pub fn compute_spectrum(
    kernel: &ConvKernel,
    dims: SpatialDims,
    method: Method,
    boundary: Boundary,
    opts: &ComputeOptions,
    explicit_cfg: &ExplicitConfig,
) -> Result<FieldSpectrum> {
    if boundary == Boundary::Dirichlet && method != Method::Explicit {
        return Err(Error::InvalidConfig(format!(
            "the {method} method is periodic only; use the explicit method for dirichlet boundaries"
        )));
    }
    match method {
        Method::Lfa => lfa_spectrum(kernel, dims, opts),
        Method::Fft => {
            let field = fft_symbol_field(kernel, dims, opts)?;
            spectrum_from_field(&field, opts.values_only, Method::Fft, opts)
        }
        Method::Explicit => {
            let start = Instant::now();
            let matrix = build_explicit(kernel, dims, boundary, explicit_cfg)?;
            let built = start.elapsed();
            let mut spectrum = dense_spectrum(&matrix, explicit_cfg)?;
            if let Some(t) = spectrum.timings {
                let mut clock = PhaseClock {
                    transform: built,
                    ..Default::default()
                };
                clock.absorb(&t);
                spectrum.timings = Some(clock.timings());
            }
            Ok(FieldSpectrum {
                spectrum,
                triplets: None,
            })
        }
    }
}

/// LFA spectrum, streamed when possible.
pub fn lfa_spectrum(kernel: &ConvKernel, dims: SpatialDims, opts: &ComputeOptions) -> Result<FieldSpectrum> {
    if opts.values_only && opts.layout == Layout::BlockContiguous {
        let spectrum = lfa_streaming(&kernel.stencil(), dims, opts)?;
        return Ok(FieldSpectrum {
            spectrum,
            triplets: None,
        });
    }
    let field = build_symbol_field(kernel, dims, opts)?;
    spectrum_from_field(&field, opts.values_only, Method::Lfa, opts)
}

/// Values-only LFA without a resident symbol field.
///
/// Symbol construction and block SVDs interleave inside each chunk. Both are
/// timed per worker, and the wall time of the parallel section is split
/// between the transform and SVD phases in proportion to those sums. The
/// final sort counts as SVD time. Values are bit-identical to
/// [`spectrum_from_field`] on a materialized field.
pub fn lfa_streaming(stencil: &Stencil, dims: SpatialDims, opts: &ComputeOptions) -> Result<SpectrumResult> {
    let grid = FrequencyGrid::new(dims);
    let (c_out, c_in) = (stencil.c_out(), stencil.c_in());
    let (bl, r) = (c_out * c_in, c_out.min(c_in));
    let blocks = grid.len();
    let max_sweeps = opts.max_sweeps;
    opts.memory_budget
        .check((blocks * r * std::mem::size_of::<f64>()) as u64)?;

    opts.run(|| {
        let start = Instant::now();
        let transform_ns = AtomicU64::new(0);
        let svd_ns = AtomicU64::new(0);
        let errors = FirstError::default();
        let mut values = vec![0.0; blocks * r];
        values.par_chunks_mut(r * CHUNK).enumerate().for_each_init(
            || (JacobiWorkspace::new(), vec![Complex64::new(0.0, 0.0); bl * CHUNK]),
            |(ws, buf), (chunk, out)| {
                let first = chunk * CHUNK;
                let count = out.len() / r;
                let t0 = Instant::now();
                for (b, block) in buf.chunks_exact_mut(bl).take(count).enumerate() {
                    symbol_into(stencil, grid.frequency(first + b), block);
                }
                let t1 = Instant::now();
                for (b, (block, slot)) in buf.chunks_exact(bl).zip(out.chunks_exact_mut(r)).enumerate() {
                    if let Err(e) = block_singular_values(block, c_out, c_in, ws, max_sweeps, slot) {
                        let idx = first + b;
                        errors.record(idx, attach_frequency(e, grid.indices(idx)));
                        break;
                    }
                }
                transform_ns.fetch_add((t1 - t0).as_nanos() as u64, Ordering::Relaxed);
                svd_ns.fetch_add(t1.elapsed().as_nanos() as u64, Ordering::Relaxed);
            },
        );
        let swept = Instant::now();
        errors.into_result()?;
        values.par_sort_by(|a, b| b.total_cmp(a));

        let parallel = swept - start;
        let (tr, sv) = (transform_ns.into_inner() as f64, svd_ns.into_inner() as f64);
        let share = if tr + sv > 0.0 { tr / (tr + sv) } else { 0.0 };
        let transform = Duration::from_secs_f64(parallel.as_secs_f64() * share).min(parallel);
        let clock = PhaseClock {
            transform,
            copy: Duration::ZERO,
            svd: (parallel - transform) + swept.elapsed(),
        };
        Ok(
            SpectrumResult::from_sorted(values, Method::Lfa, Boundary::Periodic, dims, (c_in, c_out))
                .with_timings(clock.timings()),
        )
    })?
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelShape;
    use crate::rng::{random_kernel, Distribution};

    #[test]
    fn streaming_matches_materialized_bitwise() {
        let k = random_kernel(KernelShape::new(5, 3, 3, 3), 9, Distribution::Normal).unwrap();
        let dims = SpatialDims::new(12, 11).unwrap();
        let opts = ComputeOptions::default().with_workers(2);
        let streamed = lfa_streaming(&k.stencil(), dims, &opts).unwrap();
        let field = build_symbol_field(&k, dims, &opts).unwrap();
        let full = spectrum_from_field(&field, true, Method::Lfa, &opts).unwrap();
        assert_eq!(streamed.values(), full.spectrum.values());
        assert_eq!(streamed.len(), 12 * 11 * 3);
        assert!(streamed.timings.unwrap().reconciliation_error() < 1e-9);
    }

    #[test]
    fn dirichlet_requires_explicit() {
        let k = ConvKernel::identity(1).unwrap();
        let dims = SpatialDims::square(4).unwrap();
        for m in [Method::Lfa, Method::Fft] {
            let err = compute_spectrum(
                &k,
                dims,
                m,
                Boundary::Dirichlet,
                &ComputeOptions::default(),
                &ExplicitConfig::default(),
            )
            .unwrap_err();
            assert!(matches!(err, Error::InvalidConfig(_)));
        }
    }

    #[test]
    fn streaming_reports_convergence_failure_location() {
        let k = ConvKernel::new(KernelShape::new(2, 2, 1, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let opts = ComputeOptions {
            max_sweeps: 0,
            ..Default::default()
        };
        let err = lfa_streaming(&k.stencil(), SpatialDims::square(3).unwrap(), &opts).unwrap_err();
        assert!(matches!(
            err,
            Error::ConvergenceFailure {
                sweeps: 0,
                frequency: Some((0, 0))
            }
        ));
    }

    #[test]
    fn explicit_timings_include_assembly() {
        let k = random_kernel(KernelShape::new(2, 2, 3, 3), 3, Distribution::Uniform).unwrap();
        let out = compute_spectrum(
            &k,
            SpatialDims::square(4).unwrap(),
            Method::Explicit,
            Boundary::Dirichlet,
            &ComputeOptions::default(),
            &ExplicitConfig::default(),
        )
        .unwrap();
        let t = out.spectrum.timings.unwrap();
        assert!(t.s_transform > 0.0 && t.s_svd > 0.0);
        assert!(t.reconciliation_error() < 1e-9);
        assert_eq!(out.spectrum.len(), 32);
    }
}
