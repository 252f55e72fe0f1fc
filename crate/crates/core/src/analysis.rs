//! Spectrum statistics, distribution distances and the boundary study.

use serde::{Deserialize, Serialize};

use crate::config::ComputeOptions;
use crate::error::{Error, Result};
use crate::explicit::ExplicitConfig;
use crate::kernel::{ConvKernel, SpatialDims};
use crate::pipeline::compute_spectrum;
use crate::spectrum::{Boundary, Method, SpectrumResult};

pub const HISTOGRAM_BINS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub max: f64,
    pub min: f64,
    pub count: usize,
    /// `max / min`, infinite when `min` is zero.
    pub cond: f64,
    pub mean: f64,
    /// Counts over [`HISTOGRAM_BINS`] equal bins spanning `[0, max]`; the
    /// last bin is closed.
    pub histogram: Vec<u64>,
}

pub fn spectral_summary(spectrum: &SpectrumResult) -> Result<SpectralSummary> {
    summarize_values(spectrum.values())
}

/// As [`spectral_summary`] for a descending slice.
pub fn summarize_values(values: &[f64]) -> Result<SpectralSummary> {
    let (&max, &min) = match (values.first(), values.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::EmptySpectrum),
    };
    let mut histogram = vec![0u64; HISTOGRAM_BINS];
    for &v in values {
        let bin = if max > 0.0 {
            ((v / max * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        };
        histogram[bin] += 1;
    }
    Ok(SpectralSummary {
        max,
        min,
        count: values.len(),
        cond: if min == 0.0 { f64::INFINITY } else { max / min },
        mean: values.iter().sum::<f64>() / values.len() as f64,
        histogram,
    })
}

pub fn wasserstein1(a: &SpectrumResult, b: &SpectrumResult) -> Result<f64> {
    wasserstein1_values(a.values(), b.values())
}

/// Quantile-coupling W1 of two descending samples: the shorter one is
/// resampled by linear interpolation at the longer one's quantile positions
/// `t_i = i / (N - 1)`, then absolute differences are averaged.
pub fn wasserstein1_values(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let n = long.len();
    let total: f64 = long
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - interpolate(short, i, n)).abs())
        .sum();
    Ok(total / n as f64)
}

/// Value of `values` at quantile `i / (n - 1)`. The position is formed from
/// integers so that exact grid points hit samples without rounding.
fn interpolate(values: &[f64], i: usize, n: usize) -> f64 {
    let len = values.len();
    if len == 1 || n == 1 {
        return values[0];
    }
    let (num, den) = (i * (len - 1), n - 1);
    let lo = num / den;
    if lo >= len - 1 {
        return values[len - 1];
    }
    let frac = (num - lo * den) as f64 / den as f64;
    if frac == 0.0 {
        values[lo]
    } else {
        values[lo] + frac * (values[lo + 1] - values[lo])
    }
}

/// One grid size of the boundary comparison: the zero-padded spectrum
/// against the periodic one on the same grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub n: usize,
    pub m: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub method: Method,
    pub boundary: Boundary,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub w1_vs_periodic: f64,
    pub count: usize,
    /// Largest value of the periodic (LFA) spectrum on the same grid.
    pub periodic_sigma_max: f64,
    /// `|sigma_max^P - sigma_max^D| / sigma_max^P`.
    pub rel_sigma_max_diff: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BoundaryOptions {
    /// Also emit a row comparing the periodic explicit matrix to LFA, which
    /// should show zero distance.
    pub periodic_self_check: bool,
}

/// Periodic LFA versus Dirichlet explicit spectra for each grid.
pub fn boundary_compare(
    kernel: &ConvKernel,
    dims_list: &[SpatialDims],
    opts: &ComputeOptions,
    explicit_cfg: &ExplicitConfig,
    options: BoundaryOptions,
) -> Result<Vec<BoundaryRow>> {
    let mut rows = Vec::new();
    for &dims in dims_list {
        let periodic = compute_spectrum(kernel, dims, Method::Lfa, Boundary::Periodic, opts, explicit_cfg)?.spectrum;
        let mut arms = vec![Boundary::Dirichlet];
        if options.periodic_self_check {
            arms.push(Boundary::Periodic);
        }
        for boundary in arms {
            let other = compute_spectrum(kernel, dims, Method::Explicit, boundary, opts, explicit_cfg)?.spectrum;
            rows.push(boundary_row(&periodic, &other)?);
        }
    }
    Ok(rows)
}

/// Comparison row for `other` measured against the periodic spectrum.
pub fn boundary_row(periodic: &SpectrumResult, other: &SpectrumResult) -> Result<BoundaryRow> {
    let (p_max, o_max, o_min) = match (periodic.max(), other.max(), other.min()) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::EmptySpectrum),
    };
    Ok(BoundaryRow {
        n: other.dims.width,
        m: other.dims.height,
        c_in: other.channels.0,
        c_out: other.channels.1,
        method: other.method,
        boundary: other.boundary,
        sigma_max: o_max,
        sigma_min: o_min,
        w1_vs_periodic: wasserstein1(periodic, other)?,
        count: other.len(),
        periodic_sigma_max: p_max,
        rel_sigma_max_diff: if p_max > 0.0 {
            (p_max - o_max).abs() / p_max
        } else {
            0.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_averaging_values() {
        let s = summarize_values(&[1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 9.0]).unwrap();
        assert_eq!(s.max, 1.0);
        assert_eq!(s.min, 1.0 / 9.0);
        assert!((s.cond - 9.0).abs() < 1e-14);
        assert_eq!(s.count, 4);
        assert_eq!(s.histogram.iter().sum::<u64>(), 4);
        assert_eq!(s.histogram[HISTOGRAM_BINS - 1], 1);
        assert_eq!(s.histogram[21], 2);
    }

    #[test]
    fn summary_edge_cases() {
        assert!(matches!(summarize_values(&[]), Err(Error::EmptySpectrum)));
        let s = summarize_values(&[2.0, 0.0]).unwrap();
        assert!(s.cond.is_infinite());
        let z = summarize_values(&[0.0, 0.0]).unwrap();
        assert_eq!(z.histogram[0], 2);
    }

    #[test]
    fn w1_hand_values() {
        assert_eq!(wasserstein1_values(&[1.0, 1.0], &[1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(wasserstein1_values(&[3.0, 2.0, 1.0], &[3.0, 2.0, 1.0]).unwrap(), 0.0);
        // (2, 0) resampled at t = 0, 1/2, 1 is (2, 1, 0).
        let d = wasserstein1_values(&[2.0, 1.0, 0.0], &[2.0, 0.0]).unwrap();
        assert!(d.abs() < 1e-15);
        assert!(matches!(wasserstein1_values(&[], &[1.0]), Err(Error::EmptySpectrum)));
    }

    #[test]
    fn w1_single_point() {
        assert_eq!(wasserstein1_values(&[3.0, 1.0], &[2.0]).unwrap(), 1.0);
    }
}
