//! Smoothers, the V-cycle preconditioner and BiCGSTAB.

mod krylov;
mod smoother;
mod vcycle;

pub use krylov::{bicgstab, bicgstab_with, KrylovBackend, SequentialBackend, SolveReport, BREAKDOWN_TOL};
pub use smoother::{
    check_diagonal, gauss_seidel_step, jacobi_step, smooth, Direction, SmootherKind, SmootherSpec,
};
pub(crate) use smoother::smooth_rows;
pub use vcycle::{vcycle, vcycle_into, VcyclePreconditioner, VcycleWorkspace};

use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;

/// Approximate inverse `z = M⁻¹ r`.
pub trait Preconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) -> Result<()>;
}

/// `M = I`.
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.copy_from_slice(r);
        Ok(())
    }
}

/// `M = diag(A)`.
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        check_diagonal(a)?;
        Ok(JacobiPreconditioner {
            inv_diag: a.diagonal().iter().map(|d| 1.0 / d).collect(),
        })
    }
}

impl Preconditioner for JacobiPreconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) -> Result<()> {
        if r.len() != self.inv_diag.len() || z.len() != r.len() {
            return Err(AmgError::DimensionMismatch {
                expected: self.inv_diag.len(),
                actual: r.len(),
            });
        }
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
        Ok(())
    }
}
