//! Seeded kernel generator.
//!
//! The stream is ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`), whose
//! output is fixed by its reference specification and therefore identical
//! across platforms. Floats are derived from raw `u64` words with explicit
//! formulas so another language can reproduce them from the same stream:
//!
//! * uniform: `u = (w >> 11) * 2^-53` in `[0, 1)`, mapped to `2u - 1`;
//! * normal: Box-Muller on two uniforms, `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`
//!   followed by the matching `sin` value.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{ConvKernel, KernelShape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Standard normal.
    Normal,
    /// Uniform on `[-1, 1)`.
    Uniform,
}

impl Distribution {
    pub fn as_str(&self) -> &'static str {
        match self {
            Distribution::Normal => "normal",
            Distribution::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(Distribution::Normal),
            "uniform" => Ok(Distribution::Uniform),
            other => Err(Error::InvalidConfig(format!("unknown distribution {other:?}"))),
        }
    }
}

/// Portable sampler over a ChaCha20 stream.
pub struct KernelRng {
    inner: ChaCha20Rng,
    spare_normal: Option<f64>,
}

impl KernelRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha20Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_symmetric(&mut self) -> f64 {
        2.0 * self.unit() - 1.0
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.unit();
        let u2 = self.unit();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare_normal = Some(r * s);
        r * c
    }

    pub fn sample(&mut self, dist: Distribution) -> f64 {
        match dist {
            Distribution::Normal => self.normal(),
            Distribution::Uniform => self.uniform_symmetric(),
        }
    }
}

/// Kernel with i.i.d. entries drawn in row-major `(o, i, p, q)` order.
pub fn random_kernel(shape: KernelShape, seed: u64, dist: Distribution) -> Result<ConvKernel> {
    let mut rng = KernelRng::new(seed);
    ConvKernel::from_fn(shape, |_, _, _, _| rng.sample(dist))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_kernel() {
        let shape = KernelShape::new(4, 3, 3, 3);
        let a = random_kernel(shape, 42, Distribution::Normal).unwrap();
        let b = random_kernel(shape, 42, Distribution::Normal).unwrap();
        let c = random_kernel(shape, 43, Distribution::Normal).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_ne!(a.weights(), c.weights());
    }

    #[test]
    fn uniform_range() {
        let k = random_kernel(KernelShape::new(8, 8, 3, 3), 7, Distribution::Uniform).unwrap();
        assert!(k.weights().iter().all(|w| (-1.0..1.0).contains(w)));
    }

    #[test]
    fn normal_moments() {
        let mut rng = KernelRng::new(1);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn parse_distribution() {
        assert_eq!("uniform".parse::<Distribution>().unwrap(), Distribution::Uniform);
        assert!("cauchy".parse::<Distribution>().is_err());
    }
}
