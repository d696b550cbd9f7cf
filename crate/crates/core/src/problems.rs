//! Cell-centred finite-volume model problems on the unit cube.
//!
//! Cells are ordered lexicographically with x fastest. With `h = 1/N`, an
//! interior face between cells with coefficients `k₁, k₂` has transmissibility
//! `harmonic_mean(k₁, k₂)·h`; a Dirichlet face has `2·k·h` and contributes
//! `2·k·h·u_D(face centre)` to the right-hand side. The source enters as
//! `f(cell centre)·h³`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Laplace3D,
    PoissonMms3D,
    HeteroCube3D,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Laplace3D => "laplace",
            ProblemKind::PoissonMms3D => "mms",
            ProblemKind::HeteroCube3D => "hetero",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = AmgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplace" => Ok(ProblemKind::Laplace3D),
            "mms" | "poisson-mms" => Ok(ProblemKind::PoissonMms3D),
            "hetero" => Ok(ProblemKind::HeteroCube3D),
            other => Err(AmgError::InvalidConfig(format!(
                "unknown problem '{other}' (expected laplace, mms or hetero)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub cells_per_axis: usize,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, cells_per_axis: usize) -> Result<Self> {
        let spec = ProblemSpec { kind, cells_per_axis };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells_per_axis < 2 {
            return Err(AmgError::InvalidConfig(format!(
                "cells per axis must be at least 2 (got {})",
                self.cells_per_axis
            )));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.cells_per_axis.pow(3)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells_per_axis as f64
    }
}

/// Assembled linear system, with the exact cell-centre solution when known.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub exact: Option<Vec<f64>>,
}

pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Heterogeneous coefficient: 10³ in the centred cube `[0.1, 0.9]³`, 10⁻² in
/// the eight corner cubes of width 0.1, 1 elsewhere.
pub fn k_hetero(x: [f64; 3]) -> f64 {
    if x.iter().all(|&c| (0.1..=0.9).contains(&c)) {
        1e3
    } else if x.iter().all(|&c| c <= 0.1 || c >= 0.9) {
        1e-2
    } else {
        1.0
    }
}

/// Manufactured solution `u = exp(−‖x‖²)`.
pub fn mms_solution(x: [f64; 3]) -> f64 {
    (-norm_sq(x)).exp()
}

/// `−Δu` for [`mms_solution`].
pub fn mms_source(x: [f64; 3]) -> f64 {
    let r2 = norm_sq(x);
    (6.0 - 4.0 * r2) * (-r2).exp()
}

fn norm_sq(x: [f64; 3]) -> f64 {
    x.iter().map(|c| c * c).sum()
}

/// Cell centre of cell `(i, j, k)`.
pub fn cell_center(n: usize, c: [usize; 3]) -> [f64; 3] {
    let h = 1.0 / n as f64;
    [(c[0] as f64 + 0.5) * h, (c[1] as f64 + 0.5) * h, (c[2] as f64 + 0.5) * h]
}

/// Assembles `−∇·(k∇u) = f` with Dirichlet data `u_d` on the whole boundary.
pub fn assemble_fv(
    n: usize,
    k: &dyn Fn([f64; 3]) -> f64,
    source: &dyn Fn([f64; 3]) -> f64,
    u_d: &dyn Fn([f64; 3]) -> f64,
) -> Result<(CsrMatrix, Vec<f64>)> {
    if n < 2 {
        return Err(AmgError::InvalidConfig(format!(
            "cells per axis must be at least 2 (got {n})"
        )));
    }
    let h = 1.0 / n as f64;
    let n_cells = n * n * n;
    let mut kc = Vec::with_capacity(n_cells);
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let v = k(cell_center(n, [x, y, z]));
                if !(v > 0.0 && v.is_finite()) {
                    return Err(AmgError::NonPositiveCoefficient {
                        cell: kc.len(),
                        value: v,
                    });
                }
                kc.push(v);
            }
        }
    }
    let stride = [1, n, n * n];
    let mut row_offsets = Vec::with_capacity(n_cells + 1);
    let mut col_indices = Vec::with_capacity(7 * n_cells);
    let mut values = Vec::with_capacity(7 * n_cells);
    let mut rhs = Vec::with_capacity(n_cells);
    row_offsets.push(0);
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let c = [x, y, z];
                let i = x + n * (y + n * z);
                let centre = cell_center(n, c);
                let mut diag = 0.0;
                let mut b = source(centre) * h * h * h;
                // (column, coupling) pairs below and above the diagonal in column order
                let mut lower: [(usize, f64); 3] = [(0, 0.0); 3];
                let mut upper: [(usize, f64); 3] = [(0, 0.0); 3];
                let (mut nl, mut nu) = (0, 0);
                for axis in (0..3).rev() {
                    if c[axis] > 0 {
                        let j = i - stride[axis];
                        let t = harmonic_mean(kc[i], kc[j]) * h;
                        diag += t;
                        lower[nl] = (j, -t);
                        nl += 1;
                    } else {
                        let t = 2.0 * kc[i] * h;
                        let mut face = centre;
                        face[axis] = 0.0;
                        diag += t;
                        b += t * u_d(face);
                    }
                }
                for axis in 0..3 {
                    if c[axis] + 1 < n {
                        let j = i + stride[axis];
                        let t = harmonic_mean(kc[i], kc[j]) * h;
                        diag += t;
                        upper[nu] = (j, -t);
                        nu += 1;
                    } else {
                        let t = 2.0 * kc[i] * h;
                        let mut face = centre;
                        face[axis] = 1.0;
                        diag += t;
                        b += t * u_d(face);
                    }
                }
                for &(j, v) in &lower[..nl] {
                    col_indices.push(j);
                    values.push(v);
                }
                col_indices.push(i);
                values.push(diag);
                for &(j, v) in &upper[..nu] {
                    col_indices.push(j);
                    values.push(v);
                }
                row_offsets.push(col_indices.len());
                rhs.push(b);
            }
        }
    }
    Ok((CsrMatrix::from_raw_unchecked(n_cells, row_offsets, col_indices, values), rhs))
}

/// Diffusion with coefficient `k`, unit source and zero Dirichlet data.
pub fn gen_diffusion_fv(spec: &ProblemSpec, k: &dyn Fn([f64; 3]) -> f64) -> Result<(CsrMatrix, Vec<f64>)> {
    spec.validate()?;
    assemble_fv(spec.cells_per_axis, k, &|_| 1.0, &|_| 0.0)
}

/// Poisson problem with the manufactured solution `exp(−‖x‖²)`.
pub fn gen_poisson_mms(spec: &ProblemSpec) -> Result<(CsrMatrix, Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let n = spec.cells_per_axis;
    let (a, b) = assemble_fv(n, &|_| 1.0, &mms_source, &mms_solution)?;
    let mut exact = Vec::with_capacity(spec.n_cells());
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                exact.push(mms_solution(cell_center(n, [x, y, z])));
            }
        }
    }
    Ok((a, b, exact))
}

/// Builds the system for `spec`.
pub fn generate(spec: &ProblemSpec) -> Result<Problem> {
    let (matrix, rhs, exact) = match spec.kind {
        ProblemKind::Laplace3D => {
            let (a, b) = gen_diffusion_fv(spec, &|_| 1.0)?;
            (a, b, None)
        }
        ProblemKind::HeteroCube3D => {
            let (a, b) = gen_diffusion_fv(spec, &k_hetero)?;
            (a, b, None)
        }
        ProblemKind::PoissonMms3D => {
            let (a, b, u) = gen_poisson_mms(spec)?;
            (a, b, Some(u))
        }
    };
    Ok(Problem {
        spec: *spec,
        matrix,
        rhs,
        exact,
    })
}
