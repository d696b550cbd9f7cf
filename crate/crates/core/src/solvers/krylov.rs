//! Right-preconditioned BiCGSTAB over an abstract vector backend.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};
use crate::solvers::Preconditioner;
use crate::sparse::{check_len, CsrMatrix};

/// Breakdown threshold for `ρ` and `ω` in BiCGSTAB.
pub const BREAKDOWN_TOL: f64 = 1e-60;

/// Operations needed by [`bicgstab_with`].
///
/// Reductions take `&mut self` so that distributed backends can record the
/// communication they perform.
pub trait KrylovBackend {
    type Vector: Clone;

    fn zeros(&self) -> Self::Vector;
    /// `y = A x`.
    fn apply(&mut self, x: &Self::Vector, y: &mut Self::Vector) -> Result<()>;
    /// `z = M⁻¹ r`.
    fn precondition(&mut self, r: &Self::Vector, z: &mut Self::Vector) -> Result<()>;
    fn dot(&mut self, x: &Self::Vector, y: &Self::Vector) -> f64;
    /// `y += alpha x`.
    fn axpy(&self, alpha: f64, x: &Self::Vector, y: &mut Self::Vector);
    /// `x *= alpha`.
    fn scale(&self, alpha: f64, x: &mut Self::Vector);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub breakdown: bool,
    /// Euclidean residual norms, starting with `‖r₀‖`.
    pub residual_history: Vec<f64>,
    pub reduction: f64,
}

impl SolveReport {
    fn new(r0: f64) -> Self {
        SolveReport {
            iterations: 0,
            converged: false,
            breakdown: false,
            residual_history: vec![r0],
            reduction: 1.0,
        }
    }

    fn push(&mut self, r: f64) {
        self.residual_history.push(r);
        let r0 = self.residual_history[0];
        self.reduction = if r0 > 0.0 { r / r0 } else { 0.0 };
    }

    /// Writes one `iteration,residual` row per history entry.
    pub fn write_residual_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,residual")?;
        for (k, r) in self.residual_history.iter().enumerate() {
            writeln!(out, "{k},{r:e}")?;
        }
        Ok(())
    }
}

fn finite(v: f64, iteration: usize) -> Result<f64> {
    if v.is_nan() {
        Err(AmgError::NotANumber { iteration })
    } else {
        Ok(v)
    }
}

/// Solves `A x = b` from `x₀ = 0` until `‖r‖/‖r₀‖ ≤ tol` or `max_iter`
/// iterations. One iteration is one full BiCGSTAB step with two
/// preconditioner applications; convergence after the first half of a step
/// also counts as that iteration.
pub fn bicgstab_with<B: KrylovBackend>(
    backend: &mut B,
    b: &B::Vector,
    tol: f64,
    max_iter: usize,
) -> Result<(B::Vector, SolveReport)> {
    if !(tol > 0.0) {
        return Err(AmgError::InvalidConfig(format!("tolerance must be positive (got {tol})")));
    }
    let mut x = backend.zeros();
    let mut r = b.clone();
    let r_hat = r.clone();
    let norm0 = finite(backend.dot(&r, &r).sqrt(), 0)?;
    let mut report = SolveReport::new(norm0);
    if norm0 == 0.0 {
        report.converged = true;
        report.reduction = 0.0;
        return Ok((x, report));
    }
    let mut p = backend.zeros();
    let mut v = backend.zeros();
    let mut p_hat = backend.zeros();
    let mut s_hat = backend.zeros();
    let mut t = backend.zeros();
    let (mut rho_old, mut alpha, mut omega) = (1.0, 1.0, 1.0);

    for k in 1..=max_iter {
        report.iterations = k;
        let rho = finite(backend.dot(&r_hat, &r), k)?;
        if rho.abs() < BREAKDOWN_TOL {
            report.breakdown = true;
            break;
        }
        if k == 1 {
            p = r.clone();
        } else {
            let beta = (rho / rho_old) * (alpha / omega);
            backend.axpy(-omega, &v, &mut p);
            backend.scale(beta, &mut p);
            backend.axpy(1.0, &r, &mut p);
        }
        backend.precondition(&p, &mut p_hat)?;
        backend.apply(&p_hat, &mut v)?;
        let rv = finite(backend.dot(&r_hat, &v), k)?;
        if rv.abs() < BREAKDOWN_TOL {
            report.breakdown = true;
            break;
        }
        alpha = rho / rv;
        // r becomes s = r - alpha v
        backend.axpy(-alpha, &v, &mut r);
        backend.axpy(alpha, &p_hat, &mut x);
        let s_norm = finite(backend.dot(&r, &r).sqrt(), k)?;
        if s_norm / norm0 <= tol {
            report.push(s_norm);
            report.converged = true;
            break;
        }
        backend.precondition(&r, &mut s_hat)?;
        backend.apply(&s_hat, &mut t)?;
        let tt = finite(backend.dot(&t, &t), k)?;
        let ts = finite(backend.dot(&t, &r), k)?;
        omega = if tt > 0.0 { ts / tt } else { 0.0 };
        if omega.abs() < BREAKDOWN_TOL {
            report.push(s_norm);
            report.breakdown = true;
            break;
        }
        backend.axpy(omega, &s_hat, &mut x);
        backend.axpy(-omega, &t, &mut r);
        let r_norm = finite(backend.dot(&r, &r).sqrt(), k)?;
        report.push(r_norm);
        log::trace!("bicgstab iteration {k}: relative residual {:e}", r_norm / norm0);
        if r_norm / norm0 <= tol {
            report.converged = true;
            break;
        }
        rho_old = rho;
    }
    Ok((x, report))
}

/// Sequential backend over a CSR operator and a preconditioner.
pub struct SequentialBackend<'a, P> {
    pub a: &'a CsrMatrix,
    pub precond: &'a mut P,
}

impl<P: Preconditioner> KrylovBackend for SequentialBackend<'_, P> {
    type Vector = Vec<f64>;

    fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.a.n()]
    }

    fn apply(&mut self, x: &Vec<f64>, y: &mut Vec<f64>) -> Result<()> {
        self.a.spmv_into(x, y)
    }

    fn precondition(&mut self, r: &Vec<f64>, z: &mut Vec<f64>) -> Result<()> {
        self.precond.apply(r, z)
    }

    fn dot(&mut self, x: &Vec<f64>, y: &Vec<f64>) -> f64 {
        crate::sparse::dot(x, y)
    }

    fn axpy(&self, alpha: f64, x: &Vec<f64>, y: &mut Vec<f64>) {
        crate::sparse::axpy(alpha, x, y)
    }

    fn scale(&self, alpha: f64, x: &mut Vec<f64>) {
        x.iter_mut().for_each(|v| *v *= alpha);
    }
}

/// Right-preconditioned BiCGSTAB for a CSR system.
pub fn bicgstab<P: Preconditioner>(
    a: &CsrMatrix,
    precond: &mut P,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    check_len(a.n(), b.len())?;
    let mut backend = SequentialBackend { a, precond };
    bicgstab_with(&mut backend, &b.to_vec(), tol, max_iter)
}
