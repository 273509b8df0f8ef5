//! Text file formats: the `SPNODAL1` field file, the metrics CSV, plot
//! exports, flat `key = value` configs and JSON reports.
//!
//! Numbers are written with `{:e}`, the shortest representation that parses
//! back to the same `f64`, so every file round-trips bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::discretization::{DomainKind, Field, GridDomain};
use crate::error::{Error, Result};
use crate::minimizer::IterationRecord;

pub const FIELD_MAGIC: &str = "SPNODAL1";

pub const METRICS_COLUMNS: [&str; 9] = [
    "iter",
    "J",
    "grad_norm",
    "t",
    "s",
    "norm_plus",
    "norm_minus",
    "nonlocal",
    "cross",
];

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn parse_num(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad number `{s}` for {what}")))
}

/// Field file text: header lines `SPNODAL1`, `kind`, `n`, `extent`,
/// `spacing`, `values`, then one value per line in node-index order.
pub fn format_field(d: &GridDomain, u: &Field) -> Result<String> {
    d.check(u)?;
    let mut out = String::with_capacity(24 * u.len() + 128);
    let _ = writeln!(out, "{FIELD_MAGIC}");
    let _ = writeln!(out, "kind {}", d.kind());
    let _ = writeln!(out, "n {}", d.n());
    let _ = writeln!(out, "extent {}", num(d.extent()));
    let _ = writeln!(out, "spacing {}", num(d.h()));
    let _ = writeln!(out, "values {}", u.len());
    for v in u.values() {
        out.push_str(&num(*v));
        out.push('\n');
    }
    Ok(out)
}

fn header_value<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::Parse(format!("field file ends before `{key}`")))?;
    line.strip_prefix(key)
        .filter(|rest| rest.starts_with(' '))
        .map(str::trim)
        .ok_or_else(|| Error::Parse(format!("expected `{key} ...`, found `{line}`")))
}

pub fn parse_field(text: &str) -> Result<(GridDomain, Field)> {
    let mut lines = text.lines();
    match lines.next() {
        Some(m) if m.trim() == FIELD_MAGIC => {}
        other => {
            return Err(Error::Parse(format!(
                "missing {FIELD_MAGIC} magic, found {other:?}"
            )))
        }
    }
    let kind = DomainKind::from_str(header_value(lines.next(), "kind")?)?;
    let n: usize = header_value(lines.next(), "n")?
        .parse()
        .map_err(|_| Error::Parse("bad node count".into()))?;
    let extent = parse_num(header_value(lines.next(), "extent")?, "extent")?;
    let spacing = parse_num(header_value(lines.next(), "spacing")?, "spacing")?;
    let count: usize = header_value(lines.next(), "values")?
        .parse()
        .map_err(|_| Error::Parse("bad value count".into()))?;
    let d = GridDomain::build(kind, n, extent)?;
    if (spacing - d.h()).abs() > 1e-12 * d.h() {
        return Err(Error::Parse(format!(
            "spacing {spacing} does not match the grid ({})",
            d.h()
        )));
    }
    if count != d.len() {
        return Err(Error::Parse(format!(
            "{count} values declared, grid has {} nodes",
            d.len()
        )));
    }
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| parse_num(l, &format!("node {i}")))
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != count {
        return Err(Error::Parse(format!(
            "{count} values declared, {} found",
            values.len()
        )));
    }
    let u = d.field(values)?;
    Ok((d, u))
}

pub fn write_field(path: &Path, d: &GridDomain, u: &Field) -> Result<()> {
    fs::write(path, format_field(d, u)?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<(GridDomain, Field)> {
    parse_field(&fs::read_to_string(path)?)
}

pub fn format_metrics(history: &[IterationRecord]) -> String {
    let mut out = METRICS_COLUMNS.join(",");
    out.push('\n');
    for r in history {
        let row = [
            r.j,
            r.grad_norm,
            r.t,
            r.s,
            r.norm_plus,
            r.norm_minus,
            r.nonlocal,
            r.cross,
        ];
        out.push_str(&r.iter.to_string());
        for v in row {
            out.push(',');
            out.push_str(&num(v));
        }
        out.push('\n');
    }
    out
}

/// Rows of a metrics CSV as `(iter, [J, grad_norm, t, s, norm_plus,
/// norm_minus, nonlocal, cross])`.
pub fn parse_metrics(text: &str) -> Result<Vec<(usize, [f64; 8])>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.split(',').map(str::trim).ne(METRICS_COLUMNS) {
        return Err(Error::Parse(format!(
            "unexpected metrics header `{header}`"
        )));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != METRICS_COLUMNS.len() {
                return Err(Error::Parse(format!(
                    "metrics row has {} cells: `{l}`",
                    cells.len()
                )));
            }
            let iter = cells[0]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad iteration `{}`", cells[0])))?;
            let mut row = [0.0; 8];
            for (k, c) in cells[1..].iter().enumerate() {
                row[k] = parse_num(c, METRICS_COLUMNS[k + 1])?;
            }
            Ok((iter, row))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    /// Legacy VTK structured points (3D grids).
    Vtk,
    /// Two columns `r u` (radial grids).
    Columns,
}

impl ExportFormat {
    /// The plot format suited to a domain kind.
    pub fn for_kind(kind: DomainKind) -> Self {
        if kind.is_radial() {
            ExportFormat::Columns
        } else {
            ExportFormat::Vtk
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "vtk" => Ok(ExportFormat::Vtk),
            "columns" | "txt" | "dat" => Ok(ExportFormat::Columns),
            other => Err(Error::Parse(format!("unknown export format `{other}`"))),
        }
    }
}

fn title(d: &GridDomain) -> String {
    format!(
        "spnodal kind={} n={} extent={}",
        d.kind(),
        d.n(),
        num(d.extent())
    )
}

fn parse_title(line: &str) -> Result<GridDomain> {
    let mut kind = None;
    let mut n = None;
    let mut extent = None;
    for tok in line.split_whitespace() {
        match tok.split_once('=') {
            Some(("kind", v)) => kind = Some(DomainKind::from_str(v)?),
            Some(("n", v)) => n = v.parse::<usize>().ok(),
            Some(("extent", v)) => extent = Some(parse_num(v, "extent")?),
            _ => {}
        }
    }
    match (kind, n, extent) {
        (Some(k), Some(n), Some(e)) => GridDomain::build(k, n, e),
        _ => Err(Error::Parse(format!(
            "missing grid description in `{line}`"
        ))),
    }
}

pub fn export(d: &GridDomain, u: &Field, format: ExportFormat) -> Result<String> {
    d.check(u)?;
    match (format, d.kind().is_radial()) {
        (ExportFormat::Vtk, false) => Ok(export_vtk(d, u)),
        (ExportFormat::Columns, true) => Ok(export_columns(d, u)),
        (f, _) => Err(Error::InvalidArgument(format!(
            "{f:?} export does not apply to {} grids",
            d.kind()
        ))),
    }
}

/// Only the interior nodes are stored; the Dirichlet layer is implied.
fn export_vtk(d: &GridDomain, u: &Field) -> String {
    let n = d.n();
    let origin = d.coordinates(0)[0];
    let mut out = String::with_capacity(24 * u.len() + 256);
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{}", title(d));
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(out, "DIMENSIONS {n} {n} {n}");
    let o = num(origin);
    let _ = writeln!(out, "ORIGIN {o} {o} {o}");
    let h = num(d.h());
    let _ = writeln!(out, "SPACING {h} {h} {h}");
    let _ = writeln!(out, "POINT_DATA {}", u.len());
    let _ = writeln!(out, "SCALARS u double 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    for v in u.values() {
        out.push_str(&num(*v));
        out.push('\n');
    }
    out
}

fn export_columns(d: &GridDomain, u: &Field) -> String {
    let mut out = format!("# {}\n# r u\n", title(d));
    for (k, v) in u.values().iter().enumerate() {
        let _ = writeln!(out, "{} {}", num(d.node_radius(k)), num(*v));
    }
    out
}

/// Reads back either plot format.
pub fn import(text: &str) -> Result<(GridDomain, Field)> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("");
    if first.starts_with("# vtk") {
        let d = parse_title(lines.next().unwrap_or(""))?;
        let mut count = None;
        let mut values = Vec::with_capacity(d.len());
        let mut in_data = false;
        for l in lines {
            let l = l.trim();
            if in_data {
                if !l.is_empty() {
                    values.push(parse_num(l, "point data")?);
                }
            } else if let Some(c) = l.strip_prefix("POINT_DATA ") {
                count = c.trim().parse::<usize>().ok();
            } else if l.starts_with("LOOKUP_TABLE") {
                in_data = true;
            }
        }
        if count != Some(values.len()) {
            return Err(Error::Parse(format!(
                "POINT_DATA {count:?} but {} values",
                values.len()
            )));
        }
        let u = d.field(values)?;
        Ok((d, u))
    } else if let Some(rest) = first.strip_prefix("# ") {
        let d = parse_title(rest)?;
        let values = lines
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| {
                let mut cols = l.split_whitespace();
                let _r = cols.next();
                parse_num(cols.next().unwrap_or(""), "u column")
            })
            .collect::<Result<Vec<f64>>>()?;
        let u = d.field(values)?;
        Ok((d, u))
    } else {
        Err(Error::Parse("not a VTK or two-column export".into()))
    }
}

/// `key = value` pairs in file order. `#` starts a comment; blank lines
/// are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!(
                "line {}: expected `key = value`, found `{raw}`",
                no + 1
            ))
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key", no + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn format_key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    pairs
        .into_iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports are plain data");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_text_round_trips_awkward_values() {
        let d = GridDomain::build_radial_grid(7, 1.5).unwrap();
        let vals = vec![
            1e-300,
            -0.1,
            1.0 / 3.0,
            f64::MAX,
            -f64::MIN_POSITIVE,
            0.0,
            42.0,
        ];
        let u = d.field(vals.clone()).unwrap();
        let (d2, u2) = parse_field(&format_field(&d, &u).unwrap()).unwrap();
        assert_eq!(d2.key(), d.key());
        for (a, b) in u2.values().iter().zip(&vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_field_file_is_rejected() {
        let d = GridDomain::build_radial_grid(5, 1.0).unwrap();
        let text = format_field(&d, &d.zeros()).unwrap();
        let cut: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(parse_field(&cut).is_err());
        assert!(parse_field(&text.replace(FIELD_MAGIC, "SPNODAL0")).is_err());
    }

    #[test]
    fn key_values_skip_comments() {
        let kv = parse_key_values("# c\np = 5\n\n n=31 # trailing\n").unwrap();
        assert_eq!(
            kv,
            vec![("p".into(), "5".into()), ("n".into(), "31".into())]
        );
        assert!(parse_key_values("p 5").is_err());
    }

    #[test]
    fn export_rejects_mismatched_format() {
        let d = GridDomain::build_radial_grid(5, 1.0).unwrap();
        assert!(export(&d, &d.zeros(), ExportFormat::Vtk).is_err());
    }
}
