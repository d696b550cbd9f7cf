//! Matrix Market coordinate format (`real general`) reader and writer.

use std::io::{BufRead, Write};

use crate::error::{AmgError, Result};
use crate::sparse::{CsrMatrix, TripletBuilder};

pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut out: W) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", a.n(), a.n(), a.nnz())?;
    for i in 0..a.n() {
        for (j, v) in a.row(i) {
            writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

/// Reads a square coordinate matrix. Duplicate entries are summed; a
/// `symmetric` header mirrors the off-diagonal entries.
pub fn read_matrix_market<R: BufRead>(input: R) -> Result<CsrMatrix> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or(AmgError::Parse {
        line: 1,
        message: "empty input".into(),
    })?;
    let header = header?.to_lowercase();
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(AmgError::Parse {
            line: 1,
            message: format!("unsupported header '{header}'"),
        });
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(AmgError::Parse {
            line: 1,
            message: format!("unsupported field '{}'", tokens[3]),
        });
    }
    let symmetric = match tokens[4] {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(AmgError::Parse {
                line: 1,
                message: format!("unsupported symmetry '{other}'"),
            })
        }
    };

    let mut builder: Option<TripletBuilder> = None;
    let mut expected = 0usize;
    let mut seen = 0usize;
    for (lineno, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parse_err = |message: String| AmgError::Parse {
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = t.split_whitespace().collect();
        match builder.as_mut() {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err("expected 'rows cols nnz'".into()));
                }
                let dims: Vec<usize> = fields
                    .iter()
                    .map(|f| f.parse().map_err(|e| parse_err(format!("{e}"))))
                    .collect::<Result<_>>()?;
                if dims[0] != dims[1] {
                    return Err(parse_err(format!("matrix is {}x{}, not square", dims[0], dims[1])));
                }
                expected = dims[2];
                builder = Some(TripletBuilder::with_capacity(dims[0], dims[2]));
            }
            Some(b) => {
                if fields.len() != 3 {
                    return Err(parse_err("expected 'row col value'".into()));
                }
                let i: usize = fields[0].parse().map_err(|e| parse_err(format!("{e}")))?;
                let j: usize = fields[1].parse().map_err(|e| parse_err(format!("{e}")))?;
                let v: f64 = fields[2].parse().map_err(|e| parse_err(format!("{e}")))?;
                if i == 0 || j == 0 {
                    return Err(parse_err("indices are 1-based".into()));
                }
                b.push(i - 1, j - 1, v);
                if symmetric && i != j {
                    b.push(j - 1, i - 1, v);
                }
                seen += 1;
            }
        }
    }
    let builder = builder.ok_or(AmgError::Parse {
        line: 0,
        message: "missing size line".into(),
    })?;
    if seen != expected {
        return Err(AmgError::Parse {
            line: 0,
            message: format!("expected {expected} entries, found {seen}"),
        });
    }
    builder.build()
}
