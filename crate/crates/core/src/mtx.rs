//! Matrix Market coordinate format.
//!
//! Reading accepts `real`, `integer`, `complex` and `pattern` fields with
//! `general`, `symmetric`, `hermitian` and `skew-symmetric` symmetry. Symmetric
//! storage is expanded to the full pattern and duplicates are summed. Writing
//! always emits `general` storage with 17 significant digits, so values
//! survive a write/read cycle bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::sparse::SparseMatrix;
use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Complex,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Hermitian,
    SkewSymmetric,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let file = File::open(path)?;
    parse_matrix_market(BufReader::new(file))
}

pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<SparseMatrix> {
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));

    let (lineno, header) = match lines.next() {
        Some((k, l)) => (k, l?),
        None => return Err(parse_err(1, "empty input")),
    };
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(lineno, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(lineno, format!("unsupported format '{}'", tokens[2])));
    }
    let field = match tokens[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "complex" => Field::Complex,
        "pattern" => Field::Pattern,
        other => return Err(parse_err(lineno, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "hermitian" => Symmetry::Hermitian,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(lineno, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    let mut stored = 0usize;
    let mut last_line = lineno;
    for (k, line) in lines {
        let line = line?;
        last_line = k;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        let Some((n_rows, n_cols, nnz)) = size else {
            if parts.len() != 3 {
                return Err(parse_err(k, "size line must hold 'rows cols entries'"));
            }
            let parse = |s: &str| s.parse::<usize>().map_err(|_| parse_err(k, format!("bad integer '{s}'")));
            size = Some((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?));
            entries.reserve(size.unwrap().2);
            continue;
        };
        if stored >= nnz {
            return Err(parse_err(k, format!("more than the declared {nnz} entries")));
        }
        let expected = match field {
            Field::Real => 3,
            Field::Complex => 4,
            Field::Pattern => 2,
        };
        if parts.len() != expected {
            return Err(parse_err(k, format!("expected {expected} fields, found {}", parts.len())));
        }
        let index = |s: &str, bound: usize| -> Result<usize> {
            let v = s.parse::<usize>().map_err(|_| parse_err(k, format!("bad index '{s}'")))?;
            if v == 0 || v > bound {
                return Err(parse_err(k, format!("index {v} outside 1..={bound}")));
            }
            Ok(v - 1)
        };
        let value = |s: &str| s.parse::<f64>().map_err(|_| parse_err(k, format!("bad value '{s}'")));
        let i = index(parts[0], n_rows)?;
        let j = index(parts[1], n_cols)?;
        let v = match field {
            Field::Real => Scalar::new(value(parts[2])?, 0.0),
            Field::Complex => Scalar::new(value(parts[2])?, value(parts[3])?),
            Field::Pattern => Scalar::new(1.0, 0.0),
        };
        stored += 1;
        entries.push((i, j, v));
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => entries.push((j, i, v)),
                Symmetry::Hermitian => entries.push((j, i, v.conj())),
                Symmetry::SkewSymmetric => entries.push((j, i, -v)),
            }
        }
    }
    let Some((n_rows, n_cols, nnz)) = size else {
        return Err(parse_err(last_line, "missing size line"));
    };
    if stored < nnz {
        return Err(parse_err(last_line, format!("declared {nnz} entries, found {stored}")));
    }
    SparseMatrix::from_triplets(n_rows, n_cols, entries)
}

pub fn write_matrix_market(a: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    format_matrix_market(a, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn format_matrix_market<W: Write>(a: &SparseMatrix, w: &mut W) -> Result<()> {
    let complex = !a.is_real();
    let field = if complex { "complex" } else { "real" };
    writeln!(w, "%%MatrixMarket matrix coordinate {field} general")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        if complex {
            writeln!(w, "{} {} {:.16e} {:.16e}", i + 1, j + 1, v.re, v.im)?;
        } else {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v.re)?;
        }
    }
    Ok(())
}
