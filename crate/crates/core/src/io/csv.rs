//! Plain comma-separated tables. No field ever needs quoting.
//!
//! Floats are printed as `{:.16e}`, 17 significant digits, which parses
//! back to the identical `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::analysis::BoundaryRow;
use crate::bench::BenchRecord;
use crate::error::{Error, Result};
use crate::spectrum::SpectrumResult;

pub const SPECTRUM_HEADER: &str = "index,sigma";
pub const BENCH_HEADER: &str = "method,n,m,c_in,c_out,layout,repeat_index,s_transform,s_copy,s_svd,s_total,sv_count,worker_count,warmup_flag,check";
pub const BOUNDARY_HEADER: &str =
    "n,m,c_in,c_out,method,boundary,sigma_max,sigma_min,w1_vs_periodic,count,periodic_sigma_max,rel_sigma_max_diff";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_spectrum<W: Write>(spectrum: &SpectrumResult, out: &mut W) -> Result<()> {
    writeln!(out, "{SPECTRUM_HEADER}")?;
    for (i, v) in spectrum.values().iter().enumerate() {
        writeln!(out, "{i},{v:.16e}")?;
    }
    Ok(())
}

pub fn write_spectrum_csv(spectrum: &SpectrumResult, path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    write_spectrum(spectrum, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Values column of a file written by [`write_spectrum_csv`].
pub fn read_spectrum_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == SPECTRUM_HEADER => {}
        other => {
            return Err(Error::InvalidConfig(format!(
                "expected header {SPECTRUM_HEADER:?}, found {other:?}"
            )))
        }
    }
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let value = line
            .split_once(',')
            .and_then(|(_, v)| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: malformed row {line:?}", lineno + 2)))?;
        values.push(value);
    }
    Ok(values)
}

pub fn write_bench<W: Write>(records: &[BenchRecord], out: &mut W) -> Result<()> {
    writeln!(out, "{BENCH_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.9},{:.9},{:.9},{:.9},{},{},{},{}",
            r.method,
            r.n,
            r.m,
            r.c_in,
            r.c_out,
            r.layout,
            r.repeat_index,
            r.s_transform,
            r.s_copy,
            r.s_svd,
            r.s_total,
            r.sv_count,
            r.worker_count,
            r.warmup,
            r.check
        )?;
    }
    Ok(())
}

pub fn write_bench_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    write_bench(records, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_boundary<W: Write>(rows: &[BoundaryRow], out: &mut W) -> Result<()> {
    writeln!(out, "{BOUNDARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
            r.n,
            r.m,
            r.c_in,
            r.c_out,
            r.method,
            r.boundary,
            r.sigma_max,
            r.sigma_min,
            r.w1_vs_periodic,
            r.count,
            r.periodic_sigma_max,
            r.rel_sigma_max_diff
        )?;
    }
    Ok(())
}

pub fn write_boundary_csv(rows: &[BoundaryRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    write_boundary(rows, &mut out)?;
    out.flush()?;
    Ok(())
}
