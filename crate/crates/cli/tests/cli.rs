use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use conv_spectra::io::{read_npy_kernel, read_spectrum_csv, write_npy_kernel};
use conv_spectra::ConvKernel;
use sha2::{Digest, Sha256};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_conv-spectra"));
    cmd.env_remove("CONV_SPECTRA_MEM_BUDGET_GIB");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, c: usize, seed: u64, dist: &str) -> PathBuf {
    let path = dir.join(name);
    let (c, seed) = (c.to_string(), seed.to_string());
    let out = run(&[
        "gen-kernel",
        "--cout",
        &c,
        "--cin",
        &c,
        "--kh",
        "3",
        "--kw",
        "3",
        "--seed",
        &seed,
        "--dist",
        dist,
        "--out",
        path_str(&path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn identity(dir: &Path, c: usize) -> PathBuf {
    let path = dir.join("id.npy");
    write_npy_kernel(&ConvKernel::identity(c).unwrap(), &path).unwrap();
    path
}

fn singvals(weights: &Path, n: usize, method: &str, boundary: &str, out: &Path) -> Output {
    let n = n.to_string();
    run(&[
        "singvals",
        "--weights",
        path_str(weights),
        "--height",
        &n,
        "--width",
        &n,
        "--method",
        method,
        "--boundary",
        boundary,
        "--values-only",
        "--out",
        path_str(out),
    ])
}

fn sha(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

#[test]
fn identity_kernel_gives_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let w = identity(dir.path(), 2);
    let csv = dir.path().join("s.csv");
    let out = singvals(&w, 4, "lfa", "periodic", &csv);
    assert_eq!(code(&out), 0);
    let values = read_spectrum_csv(&csv).unwrap();
    assert_eq!(values.len(), 32);
    assert!(values.iter().all(|v| (v - 1.0).abs() <= 1e-12));
    let meta: String = std::fs::read_to_string(dir.path().join("s.json")).unwrap();
    assert!(meta.contains("\"sv_count\": 32"));
    assert!(meta.contains("\"method\": \"lfa\""));
}

#[test]
fn fft_csv_matches_lfa_csv() {
    let dir = tempfile::tempdir().unwrap();
    let w = gen(dir.path(), "k.npy", 3, 9, "normal");
    let (a, b) = (dir.path().join("lfa.csv"), dir.path().join("fft.csv"));
    assert_eq!(code(&singvals(&w, 6, "lfa", "periodic", &a)), 0);
    assert_eq!(code(&singvals(&w, 6, "fft", "periodic", &b)), 0);
    let (a, b) = (read_spectrum_csv(&a).unwrap(), read_spectrum_csv(&b).unwrap());
    assert_eq!(a.len(), 108);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-8 * x.abs());
    }
}

#[test]
fn explicit_dirichlet_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let w = gen(dir.path(), "k.npy", 2, 4, "normal");
    let (d, p) = (dir.path().join("d.csv"), dir.path().join("p.csv"));
    assert_eq!(code(&singvals(&w, 4, "explicit", "dirichlet", &d)), 0);
    assert_eq!(code(&singvals(&w, 4, "lfa", "periodic", &p)), 0);
    let (d, p) = (read_spectrum_csv(&d).unwrap(), read_spectrum_csv(&p).unwrap());
    assert_eq!(d.len(), 32);
    assert!(d.windows(2).all(|w| w[0] >= w[1]));
    assert_ne!(d, p);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let w = gen(dir.path(), "k.npy", 2, 1, "normal");
    assert_eq!(code(&run(&["singvals", "--height", "4", "--width", "4"])), 2);
    assert_eq!(code(&run(&["compare-boundary", "--sizes", "4"])), 2);
    let csv = dir.path().join("x.csv");
    for method in ["lfa", "fft"] {
        let out = singvals(&w, 4, method, "dirichlet", &csv);
        assert_eq!(code(&out), 2);
        assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    }
    assert_eq!(code(&singvals(&w, 4, "svd", "periodic", &csv)), 2);
    assert_eq!(
        code(&run(&[
            "singvals",
            "--weights",
            "missing.npy",
            "--height",
            "4",
            "--width",
            "4"
        ])),
        2
    );
    let out = dir.path().join("z.npy");
    assert_eq!(
        code(&run(&[
            "gen-kernel",
            "--cout",
            "0",
            "--cin",
            "1",
            "--out",
            path_str(&out)
        ])),
        2
    );
}

#[test]
fn explicit_size_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let w = gen(dir.path(), "k.npy", 16, 2, "normal");
    let out = singvals(&w, 64, "explicit", "periodic", &dir.path().join("x.csv"));
    assert_eq!(code(&out), 3);
    let out = run(&["compare-boundary", "--weights", path_str(&w), "--sizes", "4,64"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn memory_budget_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let w = gen(dir.path(), "k.npy", 4, 2, "normal");
    let args = [
        "singvals",
        "--weights",
        path_str(&w),
        "--height",
        "8",
        "--width",
        "8",
        "--method",
        "explicit",
    ];
    let out = bin()
        .args(args)
        .env("CONV_SPECTRA_MEM_BUDGET_GIB", "1e-6")
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
    let out = bin()
        .args(args)
        .env("CONV_SPECTRA_MEM_BUDGET_GIB", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn gen_kernel_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.npy", 4, 42, "normal");
    let b = gen(dir.path(), "b.npy", 4, 42, "normal");
    let c = gen(dir.path(), "c.npy", 4, 43, "normal");
    assert_eq!(sha(&a), sha(&b));
    assert_ne!(sha(&a), sha(&c));
}

#[test]
fn gen_kernel_shapes_and_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let scalar = dir.path().join("s.npy");
    let out = run(&[
        "gen-kernel",
        "--cout",
        "1",
        "--cin",
        "1",
        "--kh",
        "1",
        "--kw",
        "1",
        "--seed",
        "5",
        "--out",
        path_str(&scalar),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_npy_kernel(&scalar).unwrap().weights().len(), 1);

    let u = read_npy_kernel(gen(dir.path(), "u.npy", 8, 3, "uniform")).unwrap();
    assert_eq!(u.weights().len(), 8 * 8 * 9);
    assert!(u.weights().iter().all(|w| (-1.0..1.0).contains(w)));
    assert!(u.weights().iter().any(|&w| w < -0.5) && u.weights().iter().any(|&w| w > 0.5));
}

#[test]
fn compare_boundary_identity_rows() {
    let dir = tempfile::tempdir().unwrap();
    let w = identity(dir.path(), 1);
    let csv = dir.path().join("b.csv");
    let out = run(&[
        "compare-boundary",
        "--weights",
        path_str(&w),
        "--sizes",
        "4",
        "--out",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let f: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&f[..6], ["4", "4", "1", "1", "explicit", "dirichlet"]);
    let num = |i: usize| f[i].parse::<f64>().unwrap();
    // Both operators are the identity, so every column agrees exactly.
    assert_eq!((num(6), num(7), num(8), num(10)), (1.0, 1.0, 0.0, 1.0));
}

#[test]
fn bench_smoke_and_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = run(&[
        "bench",
        "--methods",
        "lfa",
        "--sizes",
        "4",
        "--channels",
        "2",
        "--repeats",
        "1",
        "--warmup",
        "0",
        "--out",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("lfa,4,4,2,2,block_contiguous,0,"));

    let out = run(&[
        "bench",
        "--methods",
        "lfa,fft",
        "--sizes",
        "8",
        "--channels",
        "2",
        "--repeats",
        "2",
        "--warmup",
        "0",
        "--layout",
        "both",
        "--out",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.ends_with(",layouts_identical")));
    assert!(rows.iter().any(|r| r.contains(",frequency_strided,")));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fft/lfa"));
}

#[test]
fn bench_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.conf");
    std::fs::write(
        &cfg,
        "# small run\nmethods = lfa, explicit\nsizes = 4\nchannels = 16\nrepeats = 3\nwarmup = 0\n",
    )
    .unwrap();
    let csv = dir.path().join("bench.csv");
    let out = run(&[
        "bench",
        "--config",
        path_str(&cfg),
        "--repeats",
        "1",
        "--channels",
        "1",
        "--out",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("explicit,4,4,1,1,") && rows[1].ends_with(",explicit_matches_lfa"));
}

#[test]
fn bench_skips_infeasible_explicit_cells() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let args = [
        "bench",
        "--methods",
        "lfa,explicit",
        "--sizes",
        "64",
        "--channels",
        "8",
        "--repeats",
        "1",
        "--warmup",
        "0",
        "--out",
        path_str(&csv),
    ];
    assert_eq!(code(&run(&args)), 3);
    let mut skipping = args.to_vec();
    skipping.push("--skip-infeasible");
    let out = run(&skipping);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped explicit"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2);
}
