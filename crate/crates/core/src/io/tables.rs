//! CSV tables and small key-value files.
//!
//! Floats are written with `{}`, the shortest representation that parses
//! back to the same value, so every table round-trips exactly.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::inference::FitReport;
use crate::stats::CovarianceRows;

/// Per-pixel images sharing one index column.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTable {
    pub columns: Vec<String>,
    /// One vector per column, all of equal length.
    pub values: Vec<Vec<f64>>,
}

impl ImageTable {
    pub fn new() -> Self {
        Self {
            columns: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn with(mut self, name: &str, values: &[f64]) -> Self {
        self.columns.push(name.to_string());
        self.values.push(values.to_vec());
        self
    }

    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(&self.values[i])
    }

    /// Like [`column`](Self::column) but an error names the file.
    pub fn require(&self, name: &str, origin: &Path) -> Result<&[f64]> {
        self.column(name).ok_or_else(|| Error::Parse {
            what: origin.display().to_string(),
            message: format!("missing column `{name}`"),
        })
    }
}

impl Default for ImageTable {
    fn default() -> Self {
        Self::new()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Display) -> Error {
    Error::Parse {
        what: format!("{}:{line}", path.display()),
        message: message.to_string(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_image_table(path: &Path, table: &ImageTable) -> Result<()> {
    let len = table.len();
    if table.values.iter().any(|v| v.len() != len) {
        return Err(Error::ShapeMismatch("image table columns differ in length".into()));
    }
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "index").map_err(io)?;
    for c in &table.columns {
        write!(w, ",{c}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for k in 0..len {
        write!(w, "{k}").map_err(io)?;
        for v in &table.values {
            write!(w, ",{}", v[k]).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    finish(path, w)
}

pub fn read_image_table(path: &Path) -> Result<ImageTable> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let mut names = header.split(',').map(str::trim);
    if names.next() != Some("index") {
        return Err(parse_err(path, 1, "first column must be `index`"));
    }
    let columns: Vec<String> = names.map(String::from).collect();
    let mut values = vec![Vec::new(); columns.len()];
    for (expect, (i, line)) in lines.enumerate() {
        let mut fields = line.split(',').map(str::trim);
        let index: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| parse_err(path, i + 1, "bad index"))?;
        if index != expect {
            return Err(parse_err(path, i + 1, format!("index {index}, expected {expect}")));
        }
        let row: Vec<&str> = fields.collect();
        if row.len() != columns.len() {
            return Err(parse_err(
                path,
                i + 1,
                format!("{} fields, expected {}", row.len() + 1, columns.len() + 1),
            ));
        }
        for (col, field) in values.iter_mut().zip(row) {
            col.push(
                field
                    .parse()
                    .map_err(|_| parse_err(path, i + 1, format!("bad number {field:?}")))?,
            );
        }
    }
    Ok(ImageTable { columns, values })
}

/// Covariance rows as a matrix: a `row` column followed by one column per
/// pixel.
pub fn write_covariance(path: &Path, cov: &CovarianceRows) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "row").map_err(io)?;
    for l in 0..cov.len() {
        write!(w, ",{l}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (k, row) in cov.iter_rows() {
        write!(w, "{k}").map_err(io)?;
        for v in row {
            write!(w, ",{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    finish(path, w)
}

pub fn read_covariance(path: &Path) -> Result<CovarianceRows> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let len = header.split(',').count() - 1;
    if !header.starts_with("row") || len == 0 {
        return Err(parse_err(path, 1, "expected header `row,0,1,...`"));
    }
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != len + 1 {
            return Err(parse_err(path, i + 1, format!("{} fields, expected {}", fields.len(), len + 1)));
        }
        rows.push(
            fields[0]
                .parse()
                .map_err(|_| parse_err(path, i + 1, "bad row index"))?,
        );
        for f in &fields[1..] {
            values.push(f.parse().map_err(|_| parse_err(path, i + 1, format!("bad number {f:?}")))?);
        }
    }
    CovarianceRows::new(len, rows, values)
}

/// Ordered `key = value` pairs, one per line.
pub fn write_key_values(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut w = create(path)?;
    for (k, v) in pairs {
        writeln!(w, "{k} = {v}").map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| parse_err(path, i + 1, "expected `key = value`"))
        })
        .collect()
}

pub fn fit_report_pairs(r: &FitReport) -> Vec<(String, String)> {
    [
        ("center", r.center.to_string()),
        ("max_lag", r.max_lag.to_string()),
        ("z_b", r.z_b.to_string()),
        ("z_n", r.z_n.to_string()),
        ("o_b", r.o_b.to_string()),
        ("q_b", r.q_b.to_string()),
        ("residual_rms", r.residual_rms.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

pub fn parse_fit_report(pairs: &[(String, String)]) -> Result<FitReport> {
    fn get<T: std::str::FromStr>(pairs: &[(String, String)], key: &str) -> Result<T> {
        let v = pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::Parse {
                what: "fit report".into(),
                message: format!("missing `{key}`"),
            })?;
        v.parse().map_err(|_| Error::Parse {
            what: "fit report".into(),
            message: format!("bad value for `{key}`: {v:?}"),
        })
    }
    Ok(FitReport {
        center: get(pairs, "center")?,
        max_lag: get(pairs, "max_lag")?,
        z_b: get(pairs, "z_b")?,
        z_n: get(pairs, "z_n")?,
        o_b: get(pairs, "o_b")?,
        q_b: get(pairs, "q_b")?,
        residual_rms: get(pairs, "residual_rms")?,
    })
}
