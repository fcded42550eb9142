//! Matrix Market reading and writing for dense operands.
//!
//! Coordinate and array files are accepted with `real`, `integer` or
//! `pattern` fields and `general`, `symmetric` or `skew-symmetric` storage.
//! Symmetric storage is expanded to full on load.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::MatrixMarket(msg.into())
}

fn parse_header(line: &str) -> Result<(Layout, Field, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(bad(format!("malformed banner: {line:?}")));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(bad(format!("unsupported format {other:?}"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(bad(format!("unsupported field {other:?}"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(bad(format!("unsupported symmetry {other:?}"))),
    };
    if layout == Layout::Array && field == Field::Pattern {
        return Err(bad("pattern field requires coordinate format"));
    }
    Ok((layout, field, symmetry))
}

fn parse_usize(tok: Option<&str>, what: &str) -> Result<usize> {
    tok.ok_or_else(|| bad(format!("missing {what}")))?
        .parse()
        .map_err(|_| bad(format!("invalid {what}")))
}

fn parse_value(tok: Option<&str>) -> Result<f64> {
    let tok = tok.ok_or_else(|| bad("missing value"))?;
    let v: f64 = tok.parse().map_err(|_| bad(format!("invalid value {tok:?}")))?;
    if !v.is_finite() {
        return Err(bad(format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

/// Parses Matrix Market text into a dense matrix.
pub fn parse(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty input"))?;
    let (layout, field, symmetry) = parse_header(header)?;
    let mut body = lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size_line = body.next().ok_or_else(|| bad("missing size line"))?;
    let mut size = size_line.split_whitespace();
    let rows = parse_usize(size.next(), "row count")?;
    let cols = parse_usize(size.next(), "column count")?;
    if symmetry != Symmetry::General && rows != cols {
        return Err(bad("symmetric storage requires a square matrix"));
    }
    let mut m = DenseMatrix::zeros(rows, cols);
    let mirror = |m: &mut DenseMatrix, i: usize, j: usize, v: f64| match symmetry {
        Symmetry::General => {}
        Symmetry::Symmetric => m.set(j, i, v),
        Symmetry::SkewSymmetric => m.set(j, i, -v),
    };
    match layout {
        Layout::Coordinate => {
            let nnz = parse_usize(size.next(), "entry count")?;
            for e in 0..nnz {
                let line = body.next().ok_or_else(|| bad(format!("expected {nnz} entries, found {e}")))?;
                let mut tok = line.split_whitespace();
                let i = parse_usize(tok.next(), "row index")?;
                let j = parse_usize(tok.next(), "column index")?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(bad(format!("entry ({i}, {j}) out of range")));
                }
                let (i, j) = (i - 1, j - 1);
                let v = if field == Field::Pattern { 1.0 } else { parse_value(tok.next())? };
                if symmetry != Symmetry::General && j > i {
                    return Err(bad(format!("entry ({}, {}) above the diagonal in symmetric storage", i + 1, j + 1)));
                }
                if symmetry == Symmetry::SkewSymmetric && i == j {
                    return Err(bad("diagonal entry in skew-symmetric storage"));
                }
                let acc = m.get(i, j) + v;
                m.set(i, j, acc);
                if i != j {
                    mirror(&mut m, i, j, acc);
                }
            }
        }
        Layout::Array => {
            // Column-major; symmetric storage lists the lower triangle only.
            for j in 0..cols {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::SkewSymmetric => j + 1,
                };
                for i in start..rows {
                    let v = parse_value(body.next())?;
                    m.set(i, j, v);
                    if i != j {
                        mirror(&mut m, i, j, v);
                    }
                }
            }
        }
    }
    if body.next().is_some() {
        return Err(bad("trailing data after the last entry"));
    }
    Ok(m)
}

pub fn read(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse(&fs::read_to_string(path)?)
}

/// Array-format `real general` text with 17 significant digits.
pub fn to_string(m: &DenseMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", m.rows(), m.cols()));
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            out.push_str(&format!("{:.16e}\n", m.get(i, j)));
        }
    }
    out
}

pub fn write(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(to_string(m).as_bytes())?;
    Ok(())
}
