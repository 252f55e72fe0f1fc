#![allow(dead_code)]

use conv_spectra::rng::{random_kernel, Distribution};
use conv_spectra::{Complex64, ConvKernel, KernelShape};

pub fn kernel(c_out: usize, c_in: usize, k: usize, seed: u64) -> ConvKernel {
    random_kernel(KernelShape::new(c_out, c_in, k, k), seed, Distribution::Normal).unwrap()
}

/// Largest elementwise `|a - b| / max(|a|, |b|)`; infinite on length mismatch.
pub fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let scale = x.abs().max(y.abs());
            if scale == 0.0 {
                0.0
            } else {
                (x - y).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Dense singular values through nalgebra, descending.
pub fn nalgebra_singular_values(m: nalgebra::DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}
