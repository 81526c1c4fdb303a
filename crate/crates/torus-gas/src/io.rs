//! On-disk formats. Fields and configurations travel as CSV, reports as
//! JSON wrapped in a schema-versioned envelope, kernel coefficients as a
//! one-row-per-mode table. Floats are written in shortest round-trip form,
//! so a write/read cycle is bit-exact on one platform.

use crate::error::{Error, Result};
use crate::grid::{GridField, TorusGrid, MAX_DIM};
use crate::kernel::Kernel;
use crate::particles::Configuration;
use serde::Serialize;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// Envelope around every JSON summary.
#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    report: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, command: &str, report: &T) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, &Summary { schema_version: SCHEMA_VERSION, command, report })
        .map_err(|e| data_error(path, e.to_string()))
}

/// One CSV with a header row and one serialized record per row.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| data_error(path, e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| data_error(path, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Grid field layout: `d,T,n` header with its value row, then a `value`
/// column holding the samples in row-major lexicographic order.
pub fn write_field_csv(path: &Path, field: &GridField) -> Result<()> {
    let g = field.grid();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "d,T,n")?;
    writeln!(w, "{},{:?},{}", g.d(), g.side(), g.n())?;
    writeln!(w, "value")?;
    for v in field.values() {
        writeln!(w, "{v:?}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_csv(path: &Path) -> Result<GridField> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| data_error(path, format!("missing {what}")))
    };
    expect_header(path, &next("header")?, "d,T,n")?;
    let meta = next("grid row")?;
    let parts: Vec<&str> = meta.split(',').collect();
    if parts.len() != 3 {
        return Err(data_error(path, format!("grid row `{meta}` needs d,T,n")));
    }
    let d = parse::<usize>(path, parts[0])?;
    let side = parse::<f64>(path, parts[1])?;
    let n = parse::<usize>(path, parts[2])?;
    expect_header(path, &next("value header")?, "value")?;
    let grid = TorusGrid::new(d, side, n)?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        values.push(parse::<f64>(path, &line?)?);
    }
    if values.len() != grid.len() {
        return Err(data_error(
            path,
            format!("{} values for a grid of {}", values.len(), grid.len()),
        ));
    }
    GridField::new(grid, values)
}

/// Configuration layout: header `x0[,x1[,x2]]`, one point per row. The
/// torus side is not stored; it comes from the run configuration.
pub fn write_config_csv(path: &Path, config: &Configuration) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let cols: Vec<String> = (0..config.d()).map(|a| format!("x{a}")).collect();
    writeln!(w, "{}", cols.join(","))?;
    for p in config.points() {
        let row: Vec<String> = (0..config.d()).map(|a| format!("{:?}", p[a])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_config_csv(path: &Path, side: f64) -> Result<Configuration> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| data_error(path, "empty file".into()))?;
    let d = header.split(',').count();
    let want: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    expect_header(path, &header, &want.join(","))?;
    if d > MAX_DIM {
        return Err(data_error(path, format!("{d} coordinate columns, at most {MAX_DIM}")));
    }
    let mut points = Vec::new();
    for line in lines {
        let line = line?;
        let mut p = [0.0; MAX_DIM];
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != d {
            return Err(data_error(path, format!("row `{line}` has {} columns, want {d}", parts.len())));
        }
        for (a, part) in parts.iter().enumerate() {
            p[a] = parse::<f64>(path, part)?;
        }
        points.push(p);
    }
    Configuration::new(points, d, side)
}

/// Kernel coefficient table: header `m0[,m1[,m2]],ghat`, one row per lattice
/// mode, every mode of the grid present exactly once.
pub fn write_kernel_table(path: &Path, kernel: &Kernel) -> Result<()> {
    let g = kernel.grid();
    let mut w = BufWriter::new(File::create(path)?);
    let mut cols: Vec<String> = (0..g.d()).map(|a| format!("m{a}")).collect();
    cols.push("ghat".into());
    writeln!(w, "{}", cols.join(","))?;
    for idx in 0..g.len() {
        let m = g.lattice_of(idx);
        let mut row: Vec<String> = (0..g.d()).map(|a| m[a].to_string()).collect();
        row.push(format!("{:?}", kernel.ghat()[idx]));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_kernel_table(path: &Path, grid: TorusGrid) -> Result<Kernel> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| data_error(path, "empty file".into()))?;
    let mut want: Vec<String> = (0..grid.d()).map(|a| format!("m{a}")).collect();
    want.push("ghat".into());
    expect_header(path, &header, &want.join(","))?;
    let mut entries = Vec::new();
    for line in lines {
        let line = line?;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != grid.d() + 1 {
            return Err(data_error(
                path,
                format!("row `{line}` has {} columns, want {}", parts.len(), grid.d() + 1),
            ));
        }
        let mut m = [0i64; MAX_DIM];
        for a in 0..grid.d() {
            m[a] = parse::<i64>(path, parts[a])?;
        }
        entries.push((m, parse::<f64>(path, parts[grid.d()])?));
    }
    Kernel::from_table(grid, &entries)
}

fn expect_header(path: &Path, got: &str, want: &str) -> Result<()> {
    if got.trim() == want {
        Ok(())
    } else {
        Err(data_error(path, format!("header `{got}`, want `{want}`")))
    }
}

fn parse<T: std::str::FromStr>(path: &Path, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| data_error(path, format!("cannot parse `{s}`")))
}

fn data_error(path: &Path, message: String) -> Error {
    Error::Config { path: path.display().to_string(), message }
}
