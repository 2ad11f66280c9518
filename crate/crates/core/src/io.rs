//! Plain-text file formats.
//!
//! Grid files:
//!
//! ```text
//! psipi-grid v1 <dim> <nx> [ny]
//! <nx floats>        one line per row, ny rows
//! ```
//!
//! Coincidence maps are CSV next to a JSON sidecar holding [`MapMetadata`].
//! A 1D map is an `N×N` matrix without header; a 2D map is one row per
//! ordered pixel pair under the header `x,y,x_prime,y_prime,value`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::imaging::{CoincidenceMap, MapMetadata, ModeGrid, PhaseField};
use crate::scalar::Real;

pub const GRID_MAGIC: &str = "psipi-grid";
pub const GRID_VERSION: &str = "v1";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

pub fn format_grid<T: Real>(field: &PhaseField<T>) -> String {
    let g = field.grid;
    let mut out = if g.dimension == 1 {
        format!("{GRID_MAGIC} {GRID_VERSION} 1 {}\n", g.nx)
    } else {
        format!("{GRID_MAGIC} {GRID_VERSION} 2 {} {}\n", g.nx, g.ny)
    };
    for row in field.values.chunks(g.nx) {
        let line: Vec<String> = row.iter().map(|v| format!("{}", v.as_f64())).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parse a grid file. Pitch and magnification are not stored and take
/// their defaults.
pub fn parse_grid<T: Real>(text: &str) -> Result<PhaseField<T>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty grid file"))?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.len() < 4 || tok[0] != GRID_MAGIC || tok[1] != GRID_VERSION {
        return Err(parse_err(1, format!("expected `{GRID_MAGIC} {GRID_VERSION} <dim> <nx> [ny]`")));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| parse_err(1, format!("bad size `{s}`")));
    let grid = match (tok[2], tok.len()) {
        ("1", 4) => ModeGrid::one_d(num(tok[3])?),
        ("2", 5) => ModeGrid::two_d(num(tok[3])?, num(tok[4])?),
        _ => return Err(parse_err(1, "dimension must be `1 <nx>` or `2 <nx> <ny>`")),
    }
    .map_err(|e| parse_err(1, e.to_string()))?;
    let mut values = Vec::with_capacity(grid.n_pixels());
    let mut rows = 0;
    for (i, line) in lines {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| parse_err(i + 1, format!("bad number `{s}`"))))
            .collect::<Result<_>>()?;
        if row.len() != grid.nx {
            return Err(parse_err(i + 1, format!("expected {} values, found {}", grid.nx, row.len())));
        }
        values.extend(row.into_iter().map(T::lit));
        rows += 1;
    }
    if rows != grid.ny {
        return Err(parse_err(text.lines().count(), format!("expected {} rows, found {rows}", grid.ny)));
    }
    PhaseField::new(grid, values)
}

pub fn write_grid<T: Real>(path: impl AsRef<Path>, field: &PhaseField<T>) -> Result<()> {
    fs::write(path, format_grid(field))?;
    Ok(())
}

pub fn read_grid<T: Real>(path: impl AsRef<Path>) -> Result<PhaseField<T>> {
    parse_grid(&fs::read_to_string(path)?)
}

/// `map.csv` → `map.json`.
pub fn sidecar_path(csv: impl AsRef<Path>) -> PathBuf {
    csv.as_ref().with_extension("json")
}

pub fn write_map<T: Real>(csv_path: impl AsRef<Path>, map: &CoincidenceMap<T>) -> Result<()> {
    let csv_path = csv_path.as_ref();
    let g = map.meta.grid;
    let n = g.n_pixels();
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(csv_path)?;
    if g.dimension == 1 {
        for p in 0..n {
            w.write_record((0..n).map(|q| format!("{}", map.get(p, q).as_f64())))?;
        }
    } else {
        w.write_record(["x", "y", "x_prime", "y_prime", "value"])?;
        for p in 0..n {
            let (x, y) = g.coords(p);
            for q in 0..n {
                let (xp, yp) = g.coords(q);
                w.write_record([
                    x.to_string(),
                    y.to_string(),
                    xp.to_string(),
                    yp.to_string(),
                    format!("{}", map.get(p, q).as_f64()),
                ])?;
            }
        }
    }
    w.flush()?;
    write_json(sidecar_path(csv_path), &map.meta)
}

pub fn read_map<T: Real>(csv_path: impl AsRef<Path>) -> Result<CoincidenceMap<T>> {
    let csv_path = csv_path.as_ref();
    let meta: MapMetadata = read_json(sidecar_path(csv_path))?;
    meta.grid.validate()?;
    let g = meta.grid;
    let n = g.n_pixels();
    let mut values = vec![T::zero(); n * n];
    let mut r = csv::ReaderBuilder::new().has_headers(g.dimension == 2).from_path(csv_path)?;
    let num = |s: &str, line: usize| s.trim().parse::<f64>().map_err(|_| parse_err(line, format!("bad number `{s}`")));
    let mut seen = 0usize;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if g.dimension == 1 {
            if rec.len() != n || i >= n {
                return Err(parse_err(line, format!("expected {n} rows of {n} values")));
            }
            for (q, field) in rec.iter().enumerate() {
                values[i * n + q] = T::lit(num(field, line)?);
            }
            seen += n;
        } else {
            if rec.len() != 5 {
                return Err(parse_err(line, "expected x,y,x_prime,y_prime,value"));
            }
            let idx = |k: usize, lim: usize| -> Result<usize> {
                let v = rec[k].trim().parse::<usize>().map_err(|_| parse_err(line, format!("bad index `{}`", &rec[k])))?;
                if v >= lim {
                    return Err(parse_err(line, format!("index {v} out of range")));
                }
                Ok(v)
            };
            let p = g.index(idx(0, g.nx)?, idx(1, g.ny)?);
            let q = g.index(idx(2, g.nx)?, idx(3, g.ny)?);
            values[p * n + q] = T::lit(num(&rec[4], line)?);
            seen += 1;
        }
    }
    if seen != n * n {
        return Err(parse_err(0, format!("map holds {seen} values, grid needs {}", n * n)));
    }
    CoincidenceMap::new(values, meta)
}

pub fn write_json<S: Serialize>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<D: DeserializeOwned>(path: impl AsRef<Path>) -> Result<D> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
