use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::SpatialDims;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lfa,
    Fft,
    Explicit,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lfa => "lfa",
            Method::Fft => "fft",
            Method::Explicit => "explicit",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lfa" => Ok(Method::Lfa),
            "fft" => Ok(Method::Fft),
            "explicit" => Ok(Method::Explicit),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

impl Boundary {
    pub fn as_str(&self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Dirichlet => "dirichlet",
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "periodic" => Ok(Boundary::Periodic),
            "dirichlet" => Ok(Boundary::Dirichlet),
            other => Err(Error::InvalidConfig(format!("unknown boundary {other:?}"))),
        }
    }
}

/// Wall-clock split of one spectrum computation, in seconds.
///
/// `s_total` is measured from the first to the last timestamp and every
/// instant in between is attributed to exactly one phase, so the phases
/// sum to the total up to nanosecond rounding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub s_transform: f64,
    pub s_svd: f64,
    pub s_copy: f64,
    pub s_total: f64,
}

impl PhaseTimings {
    pub fn from_durations(transform: Duration, copy: Duration, svd: Duration) -> Self {
        Self {
            s_transform: transform.as_secs_f64(),
            s_svd: svd.as_secs_f64(),
            s_copy: copy.as_secs_f64(),
            s_total: (transform + copy + svd).as_secs_f64(),
        }
    }

    /// `|s_total - (s_transform + s_svd + s_copy)|`.
    pub fn reconciliation_error(&self) -> f64 {
        (self.s_total - (self.s_transform + self.s_svd + self.s_copy)).abs()
    }
}

/// Accumulates phase durations from back-to-back timestamps.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct PhaseClock {
    pub transform: Duration,
    pub copy: Duration,
    pub svd: Duration,
}

impl PhaseClock {
    pub fn timings(&self) -> PhaseTimings {
        PhaseTimings::from_durations(self.transform, self.copy, self.svd)
    }

    pub fn absorb(&mut self, other: &PhaseTimings) {
        self.transform += Duration::from_secs_f64(other.s_transform);
        self.copy += Duration::from_secs_f64(other.s_copy);
        self.svd += Duration::from_secs_f64(other.s_svd);
    }
}

/// The multiset of singular values of a convolution operator, sorted
/// descending, with the provenance of how it was computed.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    values: Vec<f64>,
    pub method: Method,
    pub boundary: Boundary,
    pub dims: SpatialDims,
    /// `(c_in, c_out)`.
    pub channels: (usize, usize),
    pub timings: Option<PhaseTimings>,
}

impl SpectrumResult {
    /// Sorts `values` descending (stable) and wraps them.
    ///
    /// Panics if any value is negative or NaN; every producer in this crate
    /// emits norms.
    pub fn from_unsorted(
        mut values: Vec<f64>,
        method: Method,
        boundary: Boundary,
        dims: SpatialDims,
        channels: (usize, usize),
    ) -> Self {
        sort_descending(&mut values);
        Self::from_sorted(values, method, boundary, dims, channels)
    }

    pub fn from_sorted(
        values: Vec<f64>,
        method: Method,
        boundary: Boundary,
        dims: SpatialDims,
        channels: (usize, usize),
    ) -> Self {
        assert!(values.iter().all(|v| *v >= 0.0), "singular values must be nonnegative");
        assert!(
            values.windows(2).all(|w| w[0] >= w[1]),
            "singular values must be sorted descending"
        );
        Self {
            values,
            method,
            boundary,
            dims,
            channels,
            timings: None,
        }
    }

    pub fn with_timings(mut self, timings: PhaseTimings) -> Self {
        self.timings = Some(timings);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> Option<f64> {
        self.values.first().copied()
    }

    pub fn min(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Expected number of values for this method and shape.
    pub fn expected_len(method: Method, dims: SpatialDims, channels: (usize, usize)) -> usize {
        let (c_in, c_out) = channels;
        match method {
            Method::Lfa | Method::Fft => dims.points() * c_in.min(c_out),
            Method::Explicit => (dims.points() * c_in).min(dims.points() * c_out),
        }
    }

    /// Largest `|a_i - b_i| / max(|a_i|, |b_i|, floor)` over matching positions.
    pub fn max_relative_difference(&self, other: &SpectrumResult, floor: f64) -> Option<f64> {
        if self.len() != other.len() {
            return None;
        }
        Some(
            self.values
                .iter()
                .zip(other.values())
                .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
                .fold(0.0, f64::max),
        )
    }
}

/// Stable descending sort under the IEEE total order.
pub fn sort_descending(values: &mut [f64]) {
    values.sort_by(|a, b| b.total_cmp(a));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timings_reconcile() {
        let t = PhaseTimings::from_durations(
            Duration::from_nanos(1_234_567),
            Duration::from_nanos(10),
            Duration::from_nanos(98_765_432),
        );
        assert!(t.reconciliation_error() < 1e-12);
    }

    #[test]
    fn parse_round_trip() {
        for m in [Method::Lfa, Method::Fft, Method::Explicit] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("svd".parse::<Method>().is_err());
        assert_eq!("dirichlet".parse::<Boundary>().unwrap(), Boundary::Dirichlet);
    }

    #[test]
    fn sorts_on_construction() {
        let dims = SpatialDims::new(2, 1).unwrap();
        let s = SpectrumResult::from_unsorted(vec![0.5, 2.0, 0.0, 1.0], Method::Lfa, Boundary::Periodic, dims, (2, 2));
        assert_eq!(s.values(), &[2.0, 1.0, 0.5, 0.0]);
        assert_eq!(SpectrumResult::expected_len(Method::Lfa, dims, (2, 3)), 4);
    }
}
