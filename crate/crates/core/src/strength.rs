//! Strength of connection.
//!
//! Edge weights are `max(0, -a_ij)` and vertex weights are the diagonal. For
//! every vertex the largest scaled coupling
//!
//! ```text
//! eta_max(i) = max_k  w(k,i) w(i,k) / (a_ii a_kk)
//! ```
//!
//! is recorded; an edge is strong when its own scaled coupling exceeds
//! `delta * min(eta_max(i), eta_max(j))`, and a vertex is isolated when
//! `eta_max(i) < beta`. The ratio is symmetric in `i` and `j`, so the strong
//! flags of a structurally symmetric matrix are symmetric as well.

use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;

pub const DEFAULT_DELTA: f64 = 1.0 / 3.0;
pub const DEFAULT_BETA: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexClass {
    Regular,
    Isolated,
    Dirichlet,
}

/// Per-edge strong flags and per-vertex classification of one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthProfile {
    /// One flag per stored entry, aligned with the CSR arrays. Diagonal
    /// entries are never strong.
    pub strong: Vec<bool>,
    pub eta_max: Vec<f64>,
    pub vertex_class: Vec<VertexClass>,
    pub delta: f64,
    pub beta: f64,
}

impl StrengthProfile {
    pub fn n(&self) -> usize {
        self.eta_max.len()
    }

    #[inline]
    pub fn is_isolated(&self, i: usize) -> bool {
        self.vertex_class[i] == VertexClass::Isolated
    }

    #[inline]
    pub fn is_dirichlet(&self, i: usize) -> bool {
        self.vertex_class[i] == VertexClass::Dirichlet
    }

    /// Strong flag of the stored entry `(i, j)`; absent entries are weak.
    pub fn is_strong(&self, a: &CsrMatrix, i: usize, j: usize) -> bool {
        a.position(i, j).is_some_and(|p| self.strong[p])
    }
}

/// `max(0, -a_ij)` written as `(|a_ij| - a_ij) / 2`; zero for missing entries.
pub fn edge_weight(a: &CsrMatrix, i: usize, j: usize) -> f64 {
    edge_weight_value(a.get(i, j))
}

#[inline]
fn edge_weight_value(v: f64) -> f64 {
    0.5 * (v.abs() - v)
}

pub fn vertex_weight(a: &CsrMatrix, i: usize) -> f64 {
    a.get(i, i)
}

/// Scaled coupling `w(i,j) w(j,i) / (w(i) w(j))`, zero when either diagonal
/// is not positive.
fn scaled_coupling(aij: f64, aji: f64, di: f64, dj: f64) -> f64 {
    if di <= 0.0 || dj <= 0.0 {
        return 0.0;
    }
    edge_weight_value(aij) * edge_weight_value(aji) / (di * dj)
}

/// For each stored entry, the value of its transposed entry (0 if absent).
fn transposed_values(a: &CsrMatrix) -> Vec<f64> {
    let mut out = vec![0.0; a.nnz()];
    for i in 0..a.n() {
        for p in a.row_range(i) {
            let j = a.col_indices()[p];
            if let Some(q) = a.position(j, i) {
                out[p] = a.values()[q];
            }
        }
    }
    out
}

fn couplings(a: &CsrMatrix, diag: &[f64], transposed: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; a.nnz()];
    for i in 0..a.n() {
        for p in a.row_range(i) {
            let j = a.col_indices()[p];
            if j != i {
                c[p] = scaled_coupling(a.values()[p], transposed[p], diag[i], diag[j]);
            }
        }
    }
    c
}

/// `eta_max(i)` for every vertex; vertices without neighbours get 0.
pub fn compute_eta_max(a: &CsrMatrix) -> Vec<f64> {
    let diag = a.diagonal();
    let c = couplings(a, &diag, &transposed_values(a));
    eta_from_couplings(a, &c)
}

fn eta_from_couplings(a: &CsrMatrix, c: &[f64]) -> Vec<f64> {
    (0..a.n())
        .map(|i| {
            a.row_range(i)
                .filter(|&p| a.col_indices()[p] != i)
                .fold(0.0f64, |m, p| m.max(c[p]))
        })
        .collect()
}

/// Validates the thresholds, `0 < delta < 1` and `0 < beta < 1`.
pub fn check_thresholds(delta: f64, beta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AmgError::InvalidConfig(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(AmgError::InvalidConfig(format!(
            "beta must lie in (0,1), got {beta}"
        )));
    }
    Ok(())
}

/// Classifies every edge and vertex of `a`.
///
/// A vertex is `Dirichlet` when neither its row nor its column holds a
/// nonzero off-diagonal entry; this takes precedence over `Isolated`. A
/// vertex with a non-positive diagonal is forced `Isolated` and a warning is
/// logged.
pub fn classify(a: &CsrMatrix, delta: f64, beta: f64) -> Result<StrengthProfile> {
    check_thresholds(delta, beta)?;
    let n = a.n();
    let diag = a.diagonal();
    let c = couplings(a, &diag, &transposed_values(a));
    let eta_max = eta_from_couplings(a, &c);

    let mut strong = vec![false; a.nnz()];
    let mut coupled = vec![false; n];
    for i in 0..n {
        for p in a.row_range(i) {
            let j = a.col_indices()[p];
            if j == i {
                continue;
            }
            if a.values()[p] != 0.0 {
                coupled[i] = true;
                coupled[j] = true;
            }
            strong[p] = c[p] > delta * eta_max[i].min(eta_max[j]);
        }
    }

    let vertex_class = (0..n)
        .map(|i| {
            if !coupled[i] {
                VertexClass::Dirichlet
            } else if diag[i] <= 0.0 {
                log::warn!("vertex {i} has non-positive diagonal {}; treated as isolated", diag[i]);
                VertexClass::Isolated
            } else if eta_max[i] < beta {
                VertexClass::Isolated
            } else {
                VertexClass::Regular
            }
        })
        .collect();

    Ok(StrengthProfile {
        strong,
        eta_max,
        vertex_class,
        delta,
        beta,
    })
}
