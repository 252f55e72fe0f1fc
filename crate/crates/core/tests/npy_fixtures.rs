//! NPY files produced by numpy itself.

use std::path::PathBuf;

use conv_spectra::io::npy::{encode_npy, read_npy, NpyData};
use conv_spectra::io::{read_npy_kernel, write_npy_kernel};
use conv_spectra::{Error, KernelShape, NpyError, Precision};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn reads_numpy_f64() {
    let k = read_npy_kernel(fixture("kernel_f64.npy")).unwrap();
    assert_eq!(k.shape(), KernelShape::new(2, 3, 2, 2));
    assert_eq!(k.precision(), Precision::F64);
    // np.arange(24) * 0.25 - 1.5
    for (i, w) in k.weights().iter().enumerate() {
        assert_eq!(*w, i as f64 * 0.25 - 1.5);
    }
}

#[test]
fn reads_numpy_f32_widened() {
    let k = read_npy_kernel(fixture("kernel_f32.npy")).unwrap();
    assert_eq!(k.precision(), Precision::F32);
    let text = std::fs::read_to_string(fixture("kernel_f32_values.txt")).unwrap();
    let expected: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(k.weights(), &expected[..]);
}

#[test]
fn writer_reproduces_numpy_bytes() {
    for name in ["kernel_f64.npy", "kernel_f32.npy"] {
        let original = std::fs::read(fixture(name)).unwrap();
        let k = read_npy_kernel(fixture(name)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join(name);
        write_npy_kernel(&k, &out).unwrap();
        assert_eq!(std::fs::read(&out).unwrap(), original, "{name}");
        assert_eq!(encode_npy(&read_npy(fixture(name)).unwrap()), original);
    }
}

#[test]
fn rejects_unsupported_arrays() {
    let err = |name: &str| match read_npy_kernel(fixture(name)) {
        Err(Error::Npy(e)) => e,
        other => panic!("{name}: {other:?}"),
    };
    assert_eq!(err("kernel_fortran.npy"), NpyError::FortranOrderUnsupported);
    assert_eq!(err("matrix_2d.npy"), NpyError::ShapeRankNot4(2));
    assert_eq!(err("kernel_i32.npy"), NpyError::UnsupportedDescr("<i4".into()));
    assert!(matches!(
        read_npy(fixture("matrix_2d.npy")).unwrap().data,
        NpyData::F64(_)
    ));
}
