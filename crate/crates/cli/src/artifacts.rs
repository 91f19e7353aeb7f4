//! On-disk artifact formats shared between subcommands.
//!
//! A solve writes grid snapshots plus an index; the analysis subcommands
//! read them back without manual editing. All floats are written in
//! scientific notation with fixed precision so identical runs produce
//! byte-identical files: snapshots keep 17 significant digits (exact f64
//! round-trip), derived tables keep 12.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use badapt_core::wavelet::GridSamples2;
use badapt_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Provenance of a solve run, consumed by the analysis subcommands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub command: String,
    pub domain: String,
    pub grid_level: usize,
    pub horizon_time: f64,
    pub step_dt: f64,
    pub scheme: String,
    pub seed: u64,
}

/// One retained snapshot: its position in the march, its time, and the
/// file (relative to the index) holding the grid samples or coefficients.
#[derive(Debug, Clone)]
pub struct IndexRow {
    pub index: usize,
    pub time: f64,
    pub file: String,
}

pub fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Dependency(format!("cannot open artifact {}: {e}", path.display()))
    })
}

pub fn write_run_meta(dir: &Path, meta: &RunMeta) -> Result<()> {
    let mut w = create(dir, "run.json")?;
    let text = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(w, "{text}")?;
    Ok(())
}

pub fn read_run_meta(dir: &Path) -> Result<RunMeta> {
    let r = open(&dir.join("run.json"))?;
    serde_json::from_reader(r)
        .map_err(|e| Error::Dependency(format!("run.json is not readable: {e}")))
}

/// Writes grid samples as a one-line header carrying the geometry followed
/// by one value per line in row-major order.
pub fn write_grid_snapshot(dir: &Path, name: &str, s: &GridSamples2) -> Result<()> {
    let mut w = create(dir, name)?;
    writeln!(
        w,
        "# origin_x={:.17e} origin_y={:.17e} spacing={:.17e} nx={} ny={}",
        s.origin[0], s.origin[1], s.spacing, s.nx, s.ny
    )?;
    for v in &s.v {
        writeln!(w, "{v:.17e}")?;
    }
    Ok(())
}

pub fn read_grid_snapshot(path: &Path) -> Result<GridSamples2> {
    let r = open(path)?;
    let mut lines = r.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Shape(format!("snapshot {} is empty", path.display())))?;
    let mut origin = [0.0f64; 2];
    let mut spacing = 0.0f64;
    let (mut nx, mut ny) = (0usize, 0usize);
    for part in header.trim_start_matches('#').split_whitespace() {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Shape(format!("malformed snapshot header field {part}")))?;
        let bad = |e| Error::Shape(format!("snapshot header field {part}: {e}"));
        match key {
            "origin_x" => origin[0] = value.parse().map_err(|e| bad(format!("{e}")))?,
            "origin_y" => origin[1] = value.parse().map_err(|e| bad(format!("{e}")))?,
            "spacing" => spacing = value.parse().map_err(|e| bad(format!("{e}")))?,
            "nx" => nx = value.parse().map_err(|e| bad(format!("{e}")))?,
            "ny" => ny = value.parse().map_err(|e| bad(format!("{e}")))?,
            other => return Err(Error::Shape(format!("unknown snapshot header key {other}"))),
        }
    }
    let mut v = Vec::with_capacity(nx * ny);
    for line in lines {
        let line = line?;
        v.push(line.trim().parse::<f64>().map_err(|e| {
            Error::Shape(format!("snapshot {} has a bad value line: {e}", path.display()))
        })?);
    }
    if v.len() != nx * ny || nx == 0 {
        return Err(Error::Shape(format!(
            "snapshot {} declares {nx}x{ny} nodes but holds {} values",
            path.display(),
            v.len()
        )));
    }
    Ok(GridSamples2 { origin, spacing, nx, ny, v })
}

pub fn write_index(dir: &Path, name: &str, rows: &[IndexRow]) -> Result<()> {
    let mut w = create(dir, name)?;
    writeln!(w, "index,time,file")?;
    for row in rows {
        writeln!(w, "{},{:.12e},{}", row.index, row.time, row.file)?;
    }
    Ok(())
}

pub fn read_index(dir: &Path, name: &str) -> Result<Vec<IndexRow>> {
    let path = dir.join(name);
    let r = open(&path)?;
    let mut rows = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let bad = || Error::Shape(format!("{name} line {} is malformed: {line}", lineno + 1));
        let index = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let time = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let file = parts.next().ok_or_else(bad)?.to_string();
        rows.push(IndexRow { index, time, file });
    }
    if rows.is_empty() {
        return Err(Error::Dependency(format!("{} lists no snapshots", path.display())));
    }
    Ok(rows)
}

pub fn write_norms(dir: &Path, rows: &[(usize, f64, f64)]) -> Result<()> {
    let mut w = create(dir, "norms.csv")?;
    writeln!(w, "index,time,l2_norm")?;
    for (i, t, n) in rows {
        writeln!(w, "{i},{t:.12e},{n:.12e}")?;
    }
    Ok(())
}

/// Reads `(time, l2 norm)` pairs back from `norms.csv`.
pub fn read_norms(dir: &Path) -> Result<Vec<(f64, f64)>> {
    let path = dir.join("norms.csv");
    let r = open(&path)?;
    let mut rows = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let bad = || Error::Shape(format!("norms.csv line {} is malformed: {line}", lineno + 1));
        let _index: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let time = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let norm = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        rows.push((time, norm));
    }
    if rows.is_empty() {
        return Err(Error::Dependency(format!("{} lists no norms", path.display())));
    }
    Ok(rows)
}

pub fn snapshot_file_name(index: usize) -> String {
    format!("snapshot_{index:06}.csv")
}

pub fn coeffs_file_name(index: usize) -> String {
    format!("coeffs_{index:06}.csv")
}

/// Resolves an index row's file relative to the directory the index lives in.
pub fn resolve(dir: &Path, file: &str) -> PathBuf {
    dir.join(file)
}
