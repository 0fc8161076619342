//! Matrix Market coordinate format (`real general`), 1-indexed.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::CsrMatrix;
use crate::scalar::Scalar;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_matrix_market<T: Scalar, R: BufRead>(reader: R) -> Result<CsrMatrix<T>> {
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));

    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = header?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix header"));
    }
    if fields[2] != "coordinate" || fields[3] != "real" || fields[4] != "general" {
        return Err(parse_err(
            1,
            format!("unsupported format '{} {} {}'; expected coordinate real general", fields[2], fields[3], fields[4]),
        ));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    for (lineno, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if tokens.len() != 3 {
                    return Err(parse_err(lineno, "size line must hold rows, columns and entries"));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|e| parse_err(lineno, format!("'{s}': {e}")));
                let dims = (parse(tokens[0])?, parse(tokens[1])?, parse(tokens[2])?);
                triplets.reserve(dims.2);
                size = Some(dims);
            }
            Some((n, d, nnz)) => {
                if tokens.len() != 3 {
                    return Err(parse_err(lineno, "entry must hold row, column and value"));
                }
                if triplets.len() == nnz {
                    return Err(parse_err(lineno, format!("more than the declared {nnz} entries")));
                }
                let index = |s: &str, bound: usize| -> Result<usize> {
                    let k = s.parse::<usize>().map_err(|e| parse_err(lineno, format!("'{s}': {e}")))?;
                    if k == 0 || k > bound {
                        return Err(parse_err(lineno, format!("index {k} outside 1..={bound}")));
                    }
                    Ok(k - 1)
                };
                let i = index(tokens[0], n)?;
                let j = index(tokens[1], d)?;
                let v: f64 = tokens[2]
                    .parse()
                    .map_err(|e| parse_err(lineno, format!("'{}': {e}", tokens[2])))?;
                if !v.is_finite() {
                    return Err(parse_err(lineno, "non-finite value"));
                }
                if let Some(first) = seen.insert((i, j), lineno) {
                    return Err(parse_err(
                        lineno,
                        format!("duplicate entry ({}, {}), first given on line {first}", i + 1, j + 1),
                    ));
                }
                triplets.push((i, j, T::lit(v)));
            }
        }
    }
    let (n, d, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if triplets.len() != nnz {
        return Err(parse_err(0, format!("declared {nnz} entries, found {}", triplets.len())));
    }
    CsrMatrix::from_triplets(n, d, &triplets)
}

pub fn read_matrix_market_file<T: Scalar>(path: impl AsRef<Path>) -> Result<CsrMatrix<T>> {
    read_matrix_market(BufReader::new(File::open(path)?))
}

/// Writes every stored entry with the shortest representation that parses
/// back to the same bits.
pub fn write_matrix_market<T: Scalar, W: Write>(a: &CsrMatrix<T>, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n(), a.d(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v.to_f64_lossy())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_market_file<T: Scalar>(a: &CsrMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    write_matrix_market(a, BufWriter::new(File::create(path)?))
}
