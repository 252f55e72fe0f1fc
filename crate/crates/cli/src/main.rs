use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conv_spectra::analysis::{boundary_compare, BoundaryOptions};
use conv_spectra::bench::{ratio_table, run_bench, scaling_fit, BenchConfig, LayoutSelection};
use conv_spectra::io::csv::{write_boundary, write_spectrum};
use conv_spectra::io::{read_npy_kernel, write_bench_csv, write_npy_kernel, write_run_metadata_json, RunMetadata};
use conv_spectra::rng::{random_kernel, Distribution};
use conv_spectra::{
    compute_spectrum, Boundary, ComputeOptions, Error, ExplicitConfig, KernelShape, MemoryBudget, Method, Result,
    SpatialDims,
};

/// Exact singular value spectra of 2D multi-channel convolutions.
#[derive(Parser)]
#[command(name = "conv-spectra", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Singular values of one kernel on one grid.
    Singvals(SingvalsArgs),
    /// Periodic LFA against zero-padded explicit spectra over several grid sizes.
    CompareBoundary(CompareBoundaryArgs),
    /// Timed runs over sizes and channel counts.
    Bench(BenchArgs),
    /// Seeded random kernel written as NPY.
    GenKernel(GenKernelArgs),
}

#[derive(Args)]
struct SingvalsArgs {
    /// Weights as a rank-4 NPY array `(c_out, c_in, k_h, k_w)`.
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    height: usize,
    #[arg(long)]
    width: usize,
    #[arg(long, default_value = "lfa")]
    method: Method,
    /// `dirichlet` requires `--method explicit`.
    #[arg(long, default_value = "periodic")]
    boundary: Boundary,
    /// Skip accumulating singular vectors.
    #[arg(long)]
    values_only: bool,
    /// Worker threads; 0 uses every available core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Spectrum CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run metadata JSON; defaults to the CSV path with a `.json` extension.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct CompareBoundaryArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Square grid sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Comparison CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add a periodic explicit row per size, which should match LFA exactly.
    #[arg(long)]
    self_check: bool,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// `key = value` settings file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    channels: Option<Vec<usize>>,
    #[arg(long)]
    kernel_size: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    /// `block`, `strided` or `both`.
    #[arg(long)]
    layout: Option<LayoutSelection>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dist: Option<Distribution>,
    /// Skip explicit cells that exceed the size cap or memory budget.
    #[arg(long)]
    skip_infeasible: bool,
    /// Record CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenKernelArgs {
    #[arg(long)]
    cout: usize,
    #[arg(long)]
    cin: usize,
    #[arg(long, default_value_t = 3)]
    kh: usize,
    #[arg(long, default_value_t = 3)]
    kw: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "normal")]
    dist: Distribution,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Singvals(a) => singvals(a),
        Command::CompareBoundary(a) => compare_boundary(a),
        Command::Bench(a) => bench(a),
        Command::GenKernel(a) => gen_kernel(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn budgets() -> Result<(MemoryBudget, ExplicitConfig)> {
    let budget = MemoryBudget::from_env()?;
    let explicit = ExplicitConfig {
        memory_budget: budget,
        ..ExplicitConfig::default()
    };
    Ok((budget, explicit))
}

/// Buffered writer on `path`, or on standard output.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn singvals(a: SingvalsArgs) -> Result<()> {
    let (memory_budget, explicit) = budgets()?;
    let kernel = read_npy_kernel(&a.weights)?;
    let dims = SpatialDims::new(a.width, a.height)?;
    let opts = ComputeOptions {
        workers: a.workers,
        memory_budget,
        values_only: a.values_only,
        ..ComputeOptions::default()
    };
    let spectrum = compute_spectrum(&kernel, dims, a.method, a.boundary, &opts, &explicit)?.spectrum;

    let mut out = output(a.out.as_deref())?;
    write_spectrum(&spectrum, &mut out)?;
    out.flush()?;

    let meta_path = a.meta.or_else(|| a.out.as_ref().map(|p| p.with_extension("json")));
    if let Some(path) = meta_path {
        let meta = RunMetadata::from_spectrum(&spectrum)
            .with_workers(opts.effective_workers())
            .with_weights(a.weights.display().to_string());
        write_run_metadata_json(&meta, path)?;
    }
    Ok(())
}

fn compare_boundary(a: CompareBoundaryArgs) -> Result<()> {
    let (memory_budget, explicit) = budgets()?;
    let kernel = read_npy_kernel(&a.weights)?;
    let dims = a
        .sizes
        .iter()
        .map(|&n| SpatialDims::square(n))
        .collect::<Result<Vec<_>>>()?;
    let opts = ComputeOptions {
        workers: a.workers,
        memory_budget,
        ..ComputeOptions::default()
    };
    let options = BoundaryOptions {
        periodic_self_check: a.self_check,
    };
    let rows = boundary_compare(&kernel, &dims, &opts, &explicit, options)?;
    let mut out = output(a.out.as_deref())?;
    write_boundary(&rows, &mut out)?;
    out.flush()?;
    if a.out.is_some() {
        println!(
            "{:>6} {:>10} {:>14} {:>14} {:>14} {:>10}",
            "n", "boundary", "sigma_max", "periodic_max", "w1", "rel_max"
        );
        for r in &rows {
            println!(
                "{:>6} {:>10} {:>14.6e} {:>14.6e} {:>14.6e} {:>10.3e}",
                r.n, r.boundary, r.sigma_max, r.periodic_sigma_max, r.w1_vs_periodic, r.rel_sigma_max_diff
            );
        }
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let (memory_budget, explicit) = budgets()?;
    let mut cfg = match &a.config {
        Some(path) => BenchConfig::from_file(path)?,
        None => BenchConfig::default(),
    };
    cfg.memory_budget = memory_budget;
    cfg.explicit.memory_budget = explicit.memory_budget;
    if let Some(v) = a.methods {
        cfg.methods = v;
    }
    if let Some(v) = a.sizes {
        cfg.sizes = v;
    }
    if let Some(v) = a.channels {
        cfg.channels = v;
    }
    if let Some(v) = a.kernel_size {
        cfg.kernel_size = v;
    }
    if let Some(v) = a.repeats {
        cfg.repeats = v;
    }
    if let Some(v) = a.warmup {
        cfg.warmup = v;
    }
    if let Some(v) = a.layout {
        cfg.layouts = v;
    }
    if let Some(v) = a.workers {
        cfg.workers = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.dist {
        cfg.distribution = v;
    }
    cfg.skip_infeasible |= a.skip_infeasible;

    let run = run_bench(&cfg)?;
    write_bench_csv(&run.records, &a.out)?;
    for s in &run.skipped {
        eprintln!("skipped {} n={} c={}: {}", s.method, s.n, s.channels, s.reason);
    }

    let ratios = ratio_table(&run.records);
    if !ratios.is_empty() {
        println!(
            "{:>6} {:>6} {:>6} {:>12} {:>12} {:>8}",
            "n", "m", "c", "s_lfa", "s_fft", "fft/lfa"
        );
        for r in &ratios {
            println!(
                "{:>6} {:>6} {:>6} {:>12.6} {:>12.6} {:>8.3}",
                r.n, r.m, r.c_in, r.s_lfa, r.s_fft, r.ratio
            );
        }
    }
    match scaling_fit(&run.records) {
        Ok(fits) => {
            for f in fits {
                println!(
                    "{} {} exponent {:.3} over {} points",
                    f.method,
                    f.axis.as_str(),
                    f.exponent,
                    f.points.len()
                );
            }
        }
        Err(Error::InsufficientPoints { .. }) => {}
        Err(e) => return Err(e),
    }
    Ok(())
}

fn gen_kernel(a: GenKernelArgs) -> Result<()> {
    let kernel = random_kernel(KernelShape::new(a.cout, a.cin, a.kh, a.kw), a.seed, a.dist)?;
    write_npy_kernel(&kernel, &a.out)
}
