//! Point smoothers: Gauss-Seidel sweeps and undamped Jacobi.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};
use crate::sparse::check_len;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmootherKind {
    GaussSeidelForward,
    GaussSeidelBackward,
    SymmetricGaussSeidel,
    Jacobi,
}

impl fmt::Display for SmootherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SmootherKind::GaussSeidelForward => "gs-forward",
            SmootherKind::GaussSeidelBackward => "gs-backward",
            SmootherKind::SymmetricGaussSeidel => "sgs",
            SmootherKind::Jacobi => "jacobi",
        })
    }
}

impl FromStr for SmootherKind {
    type Err = AmgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gs-forward" | "gs" => Ok(SmootherKind::GaussSeidelForward),
            "gs-backward" => Ok(SmootherKind::GaussSeidelBackward),
            "sgs" => Ok(SmootherKind::SymmetricGaussSeidel),
            "jacobi" => Ok(SmootherKind::Jacobi),
            other => Err(AmgError::InvalidConfig(format!(
                "unknown smoother '{other}' (expected gs-forward, gs-backward, sgs or jacobi)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmootherSpec {
    pub kind: SmootherKind,
    pub steps: usize,
}

impl Default for SmootherSpec {
    fn default() -> Self {
        SmootherSpec {
            kind: SmootherKind::SymmetricGaussSeidel,
            steps: 1,
        }
    }
}

impl SmootherSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(AmgError::InvalidConfig("smoother steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Returns an error naming the first row whose diagonal is zero or missing.
pub fn check_diagonal(a: &CsrMatrix) -> Result<()> {
    match a.diagonal().iter().position(|&d| d == 0.0) {
        Some(row) => Err(AmgError::ZeroDiagonal { row }),
        None => Ok(()),
    }
}

#[inline]
fn relax_row(a: &CsrMatrix, i: usize, x: &[f64], b: f64) -> Result<f64> {
    let mut sum = b;
    let mut diag = 0.0;
    for (j, v) in a.row(i) {
        if j == i {
            diag = v;
        } else {
            sum -= v * x[j];
        }
    }
    if diag == 0.0 {
        return Err(AmgError::ZeroDiagonal { row: i });
    }
    Ok(sum / diag)
}

/// One in-place Gauss-Seidel sweep in the given row order.
pub fn gauss_seidel_step(a: &CsrMatrix, x: &mut [f64], b: &[f64], direction: Direction) -> Result<()> {
    check_len(a.n(), x.len())?;
    check_len(a.n(), b.len())?;
    gauss_seidel_rows(a, x, b, 0..a.n(), direction)
}

/// Gauss-Seidel sweep restricted to the rows in `rows` (taken in reverse for
/// a backward sweep).
pub(crate) fn gauss_seidel_rows(
    a: &CsrMatrix,
    x: &mut [f64],
    b: &[f64],
    rows: std::ops::Range<usize>,
    direction: Direction,
) -> Result<()> {
    match direction {
        Direction::Forward => {
            for i in rows {
                x[i] = relax_row(a, i, x, b[i])?;
            }
        }
        Direction::Backward => {
            for i in rows.rev() {
                x[i] = relax_row(a, i, x, b[i])?;
            }
        }
    }
    Ok(())
}

/// One undamped Jacobi sweep; `scratch` must have length `n`.
pub fn jacobi_step(a: &CsrMatrix, x: &mut [f64], b: &[f64], scratch: &mut [f64]) -> Result<()> {
    check_len(a.n(), x.len())?;
    check_len(a.n(), b.len())?;
    check_len(a.n(), scratch.len())?;
    jacobi_rows(a, x, b, scratch, 0..a.n())
}

pub(crate) fn jacobi_rows(
    a: &CsrMatrix,
    x: &mut [f64],
    b: &[f64],
    scratch: &mut [f64],
    rows: std::ops::Range<usize>,
) -> Result<()> {
    for i in rows.clone() {
        scratch[i] = relax_row(a, i, x, b[i])?;
    }
    x[rows.clone()].copy_from_slice(&scratch[rows]);
    Ok(())
}

/// Applies `spec.steps` smoothing steps to `x`. A symmetric Gauss-Seidel step
/// is a forward sweep followed by a backward sweep.
pub fn smooth(a: &CsrMatrix, x: &mut [f64], b: &[f64], spec: &SmootherSpec, scratch: &mut [f64]) -> Result<()> {
    check_len(a.n(), x.len())?;
    check_len(a.n(), b.len())?;
    smooth_rows(a, x, b, spec, scratch, a.n())
}

/// Smooths the leading `rows` rows of `x`, leaving the remaining entries fixed.
pub(crate) fn smooth_rows(
    a: &CsrMatrix,
    x: &mut [f64],
    b: &[f64],
    spec: &SmootherSpec,
    scratch: &mut [f64],
    rows: usize,
) -> Result<()> {
    for _ in 0..spec.steps {
        match spec.kind {
            SmootherKind::GaussSeidelForward => gauss_seidel_rows(a, x, b, 0..rows, Direction::Forward)?,
            SmootherKind::GaussSeidelBackward => gauss_seidel_rows(a, x, b, 0..rows, Direction::Backward)?,
            SmootherKind::SymmetricGaussSeidel => {
                gauss_seidel_rows(a, x, b, 0..rows, Direction::Forward)?;
                gauss_seidel_rows(a, x, b, 0..rows, Direction::Backward)?;
            }
            SmootherKind::Jacobi => {
                check_len(a.n(), scratch.len())?;
                jacobi_rows(a, x, b, scratch, 0..rows)?;
            }
        }
    }
    Ok(())
}
