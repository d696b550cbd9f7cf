//! Sparse and dense matrix/vector primitives.

mod csr;
mod dense;
pub mod mm;

pub(crate) use csr::check_len;
pub use csr::{CsrMatrix, TripletBuilder};
pub use dense::{dense_lu_factor, dense_lu_solve, DenseLu};

use crate::error::Result;

/// `A x`.
pub fn spmv(a: &CsrMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.spmv(x)
}

/// `b - A x`.
pub fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    a.residual(x, b)
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
