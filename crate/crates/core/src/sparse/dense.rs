//! Dense LU factorization with partial pivoting, used as the coarse-level solver.

use crate::error::{AmgError, Result};
use crate::sparse::csr::{check_len, CsrMatrix};

/// In-place LU factors `P A = L U` of a dense square matrix.
///
/// `lu` is row-major; the strictly lower part holds `L` (unit diagonal
/// implied) and the upper part `U`. `perm[k]` is the original row placed at
/// position `k`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut lu = Vec::with_capacity(n * n);
        for r in rows {
            check_len(n, r.len())?;
            lu.extend_from_slice(r);
        }
        Self::factor_flat(n, lu)
    }

    pub fn factor_csr(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let mut lu = vec![0.0; n * n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                lu[i * n + j] = v;
            }
        }
        Self::factor_flat(n, lu)
    }

    fn factor_flat(n: usize, mut lu: Vec<f64>) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = lu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 || pmax <= f64::EPSILON * scale * 1e-6 {
                return Err(AmgError::SingularMatrix { column: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    let (head, tail) = lu.split_at_mut(i * n);
                    let urow = &head[k * n + k + 1..k * n + n];
                    for (x, u) in tail[k + 1..n].iter_mut().zip(urow) {
                        *x -= f * u;
                    }
                }
            }
        }
        Ok(DenseLu { n, lu, perm })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x)?;
        Ok(x)
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        let n = self.n;
        check_len(n, b.len())?;
        check_len(n, x.len())?;
        for (k, xk) in x.iter_mut().enumerate() {
            *xk = b[self.perm[k]];
        }
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        Ok(())
    }

    /// Reassembles `(L, U)` as dense row-major matrices.
    pub fn factors(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.n;
        let mut l = vec![vec![0.0; n]; n];
        let mut u = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let v = self.lu[i * n + j];
                if j < i {
                    l[i][j] = v;
                } else {
                    u[i][j] = v;
                }
            }
            l[i][i] = 1.0;
        }
        (l, u)
    }
}

/// Convenience wrapper: `dense_lu_factor`.
pub fn dense_lu_factor(a: &[Vec<f64>]) -> Result<DenseLu> {
    DenseLu::factor(a)
}

/// Convenience wrapper: `dense_lu_solve`.
pub fn dense_lu_solve(lu: &DenseLu, b: &[f64]) -> Result<Vec<f64>> {
    lu.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let id: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let lu = dense_lu_factor(&id).unwrap();
        let b = vec![3.0, -1.0, 2.5, 0.0];
        assert_eq!(dense_lu_solve(&lu, &b).unwrap(), b);
    }

    #[test]
    fn two_by_two() {
        let lu = dense_lu_factor(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        let x = lu.solve(&[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_is_reported() {
        let err = dense_lu_factor(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap_err();
        assert_eq!(err, AmgError::SingularMatrix { column: 1 });
        assert!(dense_lu_factor(&[vec![0.0, 0.0], vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn pivoting_needed() {
        let a = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let lu = dense_lu_factor(&a).unwrap();
        assert_eq!(lu.perm(), &[1, 0]);
        let x = lu.solve(&[2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn factors_reconstruct_permuted_input() {
        let a = vec![
            vec![1.0, 2.0, 0.5],
            vec![4.0, -1.0, 2.0],
            vec![0.3, 7.0, 1.0],
        ];
        let lu = dense_lu_factor(&a).unwrap();
        let (l, u) = lu.factors();
        for i in 0..3 {
            for j in 0..3 {
                let lu_ij: f64 = (0..3).map(|k| l[i][k] * u[k][j]).sum();
                assert!((lu_ij - a[lu.perm()[i]][j]).abs() < 1e-12);
            }
        }
    }
}
