//! Phase-split timing harness: repeated spectrum runs over a grid of sizes,
//! channel counts, methods and layouts, plus log-log scaling fits.
//!
//! Each timed run spans kernel transformation through the last singular
//! value (values-only mode); the phase split comes from the method itself.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ComputeOptions, MemoryBudget};
use crate::error::{Error, Result};
use crate::explicit::ExplicitConfig;
use crate::kernel::{ConvKernel, KernelShape, SpatialDims};
use crate::pipeline::compute_spectrum;
use crate::rng::{random_kernel, Distribution};
use crate::spectrum::{Boundary, Method, SpectrumResult};
use crate::svd::spectrum_from_field;
use crate::symbol::{build_symbol_field, Layout};

/// Runs whose SVD phase is shorter than this give unreliable layout timings.
pub const MIN_LAYOUT_SVD_SECONDS: f64 = 0.1;

/// What a record's spectrum was verified against, if anything.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    #[default]
    None,
    /// Explicit periodic spectrum matched the LFA spectrum of the same cell.
    ExplicitMatchesLfa,
    /// Block-contiguous and frequency-strided runs gave bit-identical spectra.
    LayoutsIdentical,
}

impl Check {
    pub fn as_str(&self) -> &'static str {
        match self {
            Check::None => "none",
            Check::ExplicitMatchesLfa => "explicit_matches_lfa",
            Check::LayoutsIdentical => "layouts_identical",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: Method,
    /// Width.
    pub n: usize,
    /// Height.
    pub m: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub layout: Layout,
    pub repeat_index: usize,
    pub s_transform: f64,
    pub s_copy: f64,
    pub s_svd: f64,
    pub s_total: f64,
    pub sv_count: usize,
    pub worker_count: usize,
    pub warmup: bool,
    pub check: Check,
}

impl BenchRecord {
    pub fn from_spectrum(
        spectrum: &SpectrumResult,
        layout: Layout,
        repeat_index: usize,
        worker_count: usize,
        warmup: bool,
    ) -> Self {
        let t = spectrum.timings.unwrap_or_default();
        Self {
            method: spectrum.method,
            n: spectrum.dims.width,
            m: spectrum.dims.height,
            c_in: spectrum.channels.0,
            c_out: spectrum.channels.1,
            layout,
            repeat_index,
            s_transform: t.s_transform,
            s_copy: t.s_copy,
            s_svd: t.s_svd,
            s_total: t.s_total,
            sv_count: spectrum.len(),
            worker_count,
            warmup,
            check: Check::None,
        }
    }
}

/// Which layouts a bench run covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayoutSelection {
    Block,
    Strided,
    Both,
}

impl LayoutSelection {
    pub fn layouts(&self) -> Vec<Layout> {
        match self {
            LayoutSelection::Block => vec![Layout::BlockContiguous],
            LayoutSelection::Strided => vec![Layout::FrequencyStrided],
            LayoutSelection::Both => vec![Layout::BlockContiguous, Layout::FrequencyStrided],
        }
    }
}

impl FromStr for LayoutSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "both" => Ok(LayoutSelection::Both),
            other => Ok(match other.parse::<Layout>()? {
                Layout::BlockContiguous => LayoutSelection::Block,
                Layout::FrequencyStrided => LayoutSelection::Strided,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    /// Square grid sides.
    pub sizes: Vec<usize>,
    /// `c_in = c_out` values.
    pub channels: Vec<usize>,
    pub kernel_size: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub layouts: LayoutSelection,
    pub workers: usize,
    pub seed: u64,
    pub distribution: Distribution,
    /// Skip explicit cells that exceed the size cap or memory budget
    /// instead of failing.
    pub skip_infeasible: bool,
    pub explicit: ExplicitConfig,
    /// Relative tolerance of the explicit-versus-LFA cross-check.
    pub cross_check_rtol: f64,
    pub memory_budget: MemoryBudget,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Lfa, Method::Fft],
            sizes: vec![256, 512],
            channels: vec![16],
            kernel_size: 3,
            repeats: 3,
            warmup: 1,
            layouts: LayoutSelection::Block,
            workers: 0,
            seed: 0,
            distribution: Distribution::Normal,
            skip_infeasible: false,
            explicit: ExplicitConfig::default(),
            cross_check_rtol: 1e-6,
            memory_budget: MemoryBudget::default(),
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {s:?}")))
        })
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

impl BenchConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "methods" => self.methods = parse_list(key, value)?,
            "sizes" => self.sizes = parse_list(key, value)?,
            "channels" => self.channels = parse_list(key, value)?,
            "kernel_size" => self.kernel_size = parse_one(key, value)?,
            "repeats" => self.repeats = parse_one(key, value)?,
            "warmup" => self.warmup = parse_one(key, value)?,
            "layout" => self.layouts = value.parse()?,
            "workers" => self.workers = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "dist" | "distribution" => self.distribution = value.parse()?,
            "skip_infeasible" => self.skip_infeasible = parse_one(key, value)?,
            "explicit_max_dim" => self.explicit.max_dim = parse_one(key, value)?,
            "rtol" => self.cross_check_rtol = parse_one(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown bench setting {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.methods.is_empty() || self.sizes.is_empty() || self.channels.is_empty() {
            return bad("methods, sizes and channels must be non-empty");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.sizes.contains(&0) || self.channels.contains(&0) || self.kernel_size == 0 {
            return bad("sizes, channels and kernel_size must be positive");
        }
        Ok(())
    }

    fn options(&self, layout: Layout) -> ComputeOptions {
        ComputeOptions {
            workers: self.workers,
            layout,
            memory_budget: self.memory_budget,
            values_only: true,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkippedCell {
    pub method: Method,
    pub n: usize,
    pub channels: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchRun {
    pub records: Vec<BenchRecord>,
    pub skipped: Vec<SkippedCell>,
}

/// Runs every cell of `cfg` sequentially.
///
/// Explicit cells are cross-checked against LFA before their records are
/// kept; when both layouts are requested their spectra must agree bit for
/// bit.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchRun> {
    cfg.validate()?;
    let mut run = BenchRun::default();
    let workers = cfg.options(Layout::BlockContiguous).effective_workers();
    for &n in &cfg.sizes {
        let dims = SpatialDims::square(n)?;
        for &c in &cfg.channels {
            let kernel = random_kernel(
                KernelShape::new(c, c, cfg.kernel_size, cfg.kernel_size),
                cfg.seed,
                cfg.distribution,
            )?;
            let mut reference: Option<SpectrumResult> = None;
            for &method in &cfg.methods {
                let layouts = match method {
                    Method::Explicit => vec![Layout::BlockContiguous],
                    _ => cfg.layouts.layouts(),
                };
                let mut per_layout: Vec<(Vec<BenchRecord>, SpectrumResult)> = Vec::new();
                for layout in layouts {
                    let opts = cfg.options(layout);
                    let mut records = Vec::new();
                    let mut last = None;
                    for i in 0..cfg.warmup + cfg.repeats {
                        let warmup = i < cfg.warmup;
                        let out = compute_spectrum(&kernel, dims, method, Boundary::Periodic, &opts, &cfg.explicit);
                        let spectrum = match out {
                            Ok(s) => s.spectrum,
                            Err(e @ (Error::SizeCapExceeded { .. } | Error::AllocationFailure { .. }))
                                if method == Method::Explicit && cfg.skip_infeasible =>
                            {
                                log::warn!("skipping explicit cell n={n} c={c}: {e}");
                                run.skipped.push(SkippedCell {
                                    method,
                                    n,
                                    channels: c,
                                    reason: e.to_string(),
                                });
                                break;
                            }
                            Err(e) => return Err(e),
                        };
                        let repeat = if warmup { i } else { i - cfg.warmup };
                        records.push(BenchRecord::from_spectrum(&spectrum, layout, repeat, workers, warmup));
                        last = Some(spectrum);
                    }
                    let Some(spectrum) = last else { continue };
                    if method == Method::Explicit {
                        let lfa = match &reference {
                            Some(r) => r.clone(),
                            None => {
                                compute_spectrum(
                                    &kernel,
                                    dims,
                                    Method::Lfa,
                                    Boundary::Periodic,
                                    &cfg.options(Layout::BlockContiguous),
                                    &cfg.explicit,
                                )?
                                .spectrum
                            }
                        };
                        let diff = spectrum
                            .max_relative_difference(&lfa, f64::MIN_POSITIVE)
                            .unwrap_or(f64::INFINITY);
                        if diff > cfg.cross_check_rtol {
                            return Err(Error::CrossCheckFailed {
                                what: format!("explicit vs lfa at n={n} c={c}"),
                                max_relative: diff,
                            });
                        }
                        records.iter_mut().for_each(|r| r.check = Check::ExplicitMatchesLfa);
                    }
                    if method == Method::Lfa && layout == Layout::BlockContiguous {
                        reference = Some(spectrum.clone());
                    }
                    per_layout.push((records, spectrum));
                }
                if per_layout.len() == 2 {
                    let (a, b) = (&per_layout[0].1, &per_layout[1].1);
                    if a.values() != b.values() {
                        return Err(Error::CrossCheckFailed {
                            what: format!("{method} layouts at n={n} c={c}"),
                            max_relative: a.max_relative_difference(b, f64::MIN_POSITIVE).unwrap_or(f64::INFINITY),
                        });
                    }
                    for (records, _) in &mut per_layout {
                        records.iter_mut().for_each(|r| r.check = Check::LayoutsIdentical);
                    }
                }
                run.records.extend(per_layout.into_iter().flat_map(|(r, _)| r));
            }
        }
    }
    Ok(run)
}

/// Paired runs on a materialized field in each layout.
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutExperiment {
    pub block_contiguous: BenchRecord,
    pub frequency_strided: BenchRecord,
    pub spectra_identical: bool,
    /// Set when an SVD phase was too short for meaningful timings.
    pub warning: Option<String>,
}

/// LFA spectrum with the whole field resident, once per layout. The
/// strided field is produced by a timed conversion counted as copy time.
pub fn layout_experiment(kernel: &ConvKernel, dims: SpatialDims, opts: &ComputeOptions) -> Result<LayoutExperiment> {
    let workers = opts.effective_workers();
    let mut runs = Vec::new();
    for layout in [Layout::BlockContiguous, Layout::FrequencyStrided] {
        let opts = opts.clone().with_layout(layout).with_values_only(true);
        let field = build_symbol_field(kernel, dims, &opts)?;
        let spectrum = spectrum_from_field(&field, true, crate::spectrum::Method::Lfa, &opts)?.spectrum;
        drop(field);
        runs.push((
            BenchRecord::from_spectrum(&spectrum, layout, 0, workers, false),
            spectrum,
        ));
    }
    let (strided, strided_spectrum) = runs.pop().unwrap();
    let (block, block_spectrum) = runs.pop().unwrap();
    if block_spectrum.values() != strided_spectrum.values() {
        return Err(Error::CrossCheckFailed {
            what: format!("layout experiment at {dims}"),
            max_relative: block_spectrum
                .max_relative_difference(&strided_spectrum, f64::MIN_POSITIVE)
                .unwrap_or(f64::INFINITY),
        });
    }
    let shortest = block.s_svd.min(strided.s_svd);
    let warning = (shortest < MIN_LAYOUT_SVD_SECONDS).then(|| {
        let msg = format!(
            "SVD phase of {shortest:.3} s at {dims} is below {MIN_LAYOUT_SVD_SECONDS} s; layout timings are noise-dominated"
        );
        log::warn!("{msg}");
        msg
    });
    let tag = |mut r: BenchRecord| {
        r.check = Check::LayoutsIdentical;
        r
    };
    Ok(LayoutExperiment {
        block_contiguous: tag(block),
        frequency_strided: tag(strided),
        spectra_identical: true,
        warning,
    })
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct CellKey {
    method: &'static str,
    layout: &'static str,
    n: usize,
    m: usize,
    c_in: usize,
    c_out: usize,
}

/// Median phase times of the timed (non-warmup) repeats of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMedian {
    pub method: Method,
    pub layout: Layout,
    pub n: usize,
    pub m: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub repeats: usize,
    pub s_transform: f64,
    pub s_copy: f64,
    pub s_svd: f64,
    pub s_total: f64,
}

pub fn cell_medians(records: &[BenchRecord]) -> Vec<CellMedian> {
    let mut cells: BTreeMap<CellKey, Vec<&BenchRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.warmup) {
        let key = CellKey {
            method: r.method.as_str(),
            layout: r.layout.as_str(),
            n: r.n,
            m: r.m,
            c_in: r.c_in,
            c_out: r.c_out,
        };
        cells.entry(key).or_default().push(r);
    }
    cells
        .into_values()
        .map(|rs| {
            let med = |f: fn(&BenchRecord) -> f64| median(&mut rs.iter().map(|r| f(r)).collect::<Vec<_>>()).unwrap();
            let first = rs[0];
            CellMedian {
                method: first.method,
                layout: first.layout,
                n: first.n,
                m: first.m,
                c_in: first.c_in,
                c_out: first.c_out,
                repeats: rs.len(),
                s_transform: med(|r| r.s_transform),
                s_copy: med(|r| r.s_copy),
                s_svd: med(|r| r.s_svd),
                s_total: med(|r| r.s_total),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n: usize,
    pub m: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub s_lfa: f64,
    pub s_fft: f64,
    /// `s_fft / s_lfa` on median totals.
    pub ratio: f64,
}

/// FFT-to-LFA runtime ratio per cell, block-contiguous runs only.
pub fn ratio_table(records: &[BenchRecord]) -> Vec<RatioRow> {
    let medians = cell_medians(records);
    let find = |method: Method, c: &CellMedian| {
        medians
            .iter()
            .find(|x| {
                x.method == method
                    && x.layout == Layout::BlockContiguous
                    && (x.n, x.m, x.c_in, x.c_out) == (c.n, c.m, c.c_in, c.c_out)
            })
            .map(|x| x.s_total)
    };
    medians
        .iter()
        .filter(|c| c.method == Method::Lfa && c.layout == Layout::BlockContiguous)
        .filter_map(|c| {
            let s_fft = find(Method::Fft, c)?;
            Some(RatioRow {
                n: c.n,
                m: c.m,
                c_in: c.c_in,
                c_out: c.c_out,
                s_lfa: c.s_total,
                s_fft,
                ratio: s_fft / c.s_total,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingAxis {
    /// Grid side length `sqrt(n m)`, channels fixed.
    Spatial,
    /// Channel count `sqrt(c_in c_out)`, grid fixed.
    Channel,
}

impl ScalingAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScalingAxis::Spatial => "spatial",
            ScalingAxis::Channel => "channel",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub method: Method,
    pub axis: ScalingAxis,
    /// Least-squares slope of `ln s_total` against `ln x`.
    pub exponent: f64,
    /// `(x, median s_total)` pairs used.
    pub points: Vec<(f64, f64)>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

const MIN_FIT_POINTS: usize = 3;

/// Exponent of `method` along `axis`, fitted on median totals of
/// block-contiguous cells. The other axis must be held fixed; the largest
/// group sharing it is used.
pub fn fit_axis(records: &[BenchRecord], method: Method, axis: ScalingAxis) -> Result<ScalingFit> {
    let mut groups: BTreeMap<(usize, usize), BTreeMap<u64, (f64, f64)>> = BTreeMap::new();
    for c in cell_medians(records)
        .into_iter()
        .filter(|c| c.method == method && c.layout == Layout::BlockContiguous)
    {
        let (fixed, x) = match axis {
            ScalingAxis::Spatial => ((c.c_in, c.c_out), ((c.n * c.m) as f64).sqrt()),
            ScalingAxis::Channel => ((c.n, c.m), ((c.c_in * c.c_out) as f64).sqrt()),
        };
        groups.entry(fixed).or_default().insert(x.to_bits(), (x, c.s_total));
    }
    let best = groups.into_values().max_by_key(|g| g.len()).unwrap_or_default();
    if best.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints {
            method: method.to_string(),
            axis: axis.as_str(),
            found: best.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let points: Vec<(f64, f64)> = best.into_values().collect();
    Ok(ScalingFit {
        method,
        axis,
        exponent: loglog_slope(&points),
        points,
    })
}

/// Every fit the records support. Fails when some method supports none.
pub fn scaling_fit(records: &[BenchRecord]) -> Result<Vec<ScalingFit>> {
    let methods: BTreeSet<&'static str> = records.iter().map(|r| r.method.as_str()).collect();
    let mut fits = Vec::new();
    for name in methods {
        let method: Method = name.parse()?;
        let spatial = fit_axis(records, method, ScalingAxis::Spatial);
        let channel = fit_axis(records, method, ScalingAxis::Channel);
        match (spatial, channel) {
            (Err(e), Err(_)) => return Err(e),
            (s, c) => fits.extend(s.into_iter().chain(c)),
        }
    }
    Ok(fits)
}
