//! Square compressed sparse row matrices.

use crate::error::{AmgError, Result};

/// Square CSR matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl Default for CsrMatrix {
    fn default() -> Self {
        CsrMatrix::identity(0)
    }
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, checking every structural invariant.
    pub fn from_raw(
        n: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let m = CsrMatrix {
            n,
            row_offsets,
            col_indices,
            values,
        };
        m.check()?;
        Ok(m)
    }

    /// Builds a matrix from arrays produced by routines that emit sorted,
    /// unique rows; debug builds still check.
    pub(crate) fn from_raw_unchecked(
        n: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        let m = CsrMatrix {
            n,
            row_offsets,
            col_indices,
            values,
        };
        debug_assert!(m.check().is_ok(), "{:?}", m.check());
        m
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Converts a dense row-major matrix, dropping exact zeros off the diagonal.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut b = TripletBuilder::new(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(AmgError::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 || i == j {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    /// Validates the CSR invariants: monotone offsets, in-range sorted unique
    /// columns, finite values.
    pub fn check(&self) -> Result<()> {
        if self.row_offsets.len() != self.n + 1 {
            return Err(AmgError::InvalidStructure(format!(
                "row_offsets has length {}, expected {}",
                self.row_offsets.len(),
                self.n + 1
            )));
        }
        if self.row_offsets[0] != 0 {
            return Err(AmgError::InvalidStructure("row_offsets[0] != 0".into()));
        }
        let nnz = *self.row_offsets.last().unwrap();
        if nnz != self.col_indices.len() || nnz != self.values.len() {
            return Err(AmgError::InvalidStructure(format!(
                "nnz {} does not match {} columns / {} values",
                nnz,
                self.col_indices.len(),
                self.values.len()
            )));
        }
        for i in 0..self.n {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            if s > e {
                return Err(AmgError::InvalidStructure(format!(
                    "row_offsets decrease at row {i}"
                )));
            }
            let cols = &self.col_indices[s..e];
            for (k, &c) in cols.iter().enumerate() {
                if c >= self.n {
                    return Err(AmgError::InvalidStructure(format!(
                        "column {c} out of range in row {i}"
                    )));
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(AmgError::InvalidStructure(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
        }
        if let Some(p) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(AmgError::InvalidStructure(format!(
                "non-finite value at position {p}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Position range of row `i` inside `col_indices`/`values`.
    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    /// Iterates the `(column, value)` pairs of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_range(i);
        self.col_indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    #[inline]
    pub fn row_cols(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_range(i)]
    }

    /// Storage position of entry `(i, j)`, if stored.
    #[inline]
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.col_indices[r.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| r.start + k)
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Dense row-major copy; intended for small matrices and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let p = next[j];
                cols[p] = i;
                vals[p] = v;
                next[j] += 1;
            }
        }
        CsrMatrix::from_raw_unchecked(self.n, counts, cols, vals)
    }

    /// Returns `c * self`.
    pub fn scaled(&self, c: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= c);
        m
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.position(j, i).map(|p| self.values[p]) == Some(v)))
    }

    /// `y = A x`, rows accumulated left to right.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.n, x.len())?;
        check_len(self.n, y.len())?;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_offsets[i]..self.row_offsets[i + 1] {
                s += self.values[p] * x[self.col_indices[p]];
            }
            *yi = s;
        }
        Ok(())
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `r = b - A x`.
    pub fn residual_into(&self, x: &[f64], b: &[f64], r: &mut [f64]) -> Result<()> {
        check_len(self.n, x.len())?;
        check_len(self.n, b.len())?;
        check_len(self.n, r.len())?;
        for (i, ri) in r.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_offsets[i]..self.row_offsets[i + 1] {
                s += self.values[p] * x[self.col_indices[p]];
            }
            *ri = b[i] - s;
        }
        Ok(())
    }

    pub fn residual(&self, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let mut r = vec![0.0; self.n];
        self.residual_into(x, b, &mut r)?;
        Ok(r)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[inline]
pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        Err(AmgError::DimensionMismatch { expected, actual })
    } else {
        Ok(())
    }
}

/// Coordinate-format builder. Duplicate entries are summed on `build`.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        TripletBuilder {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        TripletBuilder {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push((i, j, v));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn build(mut self) -> Result<CsrMatrix> {
        let n = self.n;
        if let Some(&(i, j, _)) = self.entries.iter().find(|(i, j, _)| *i >= n || *j >= n) {
            return Err(AmgError::InvalidStructure(format!(
                "entry ({i}, {j}) outside {n}x{n}"
            )));
        }
        // stable sort keeps the summation order of duplicates equal to insertion order
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_offsets = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        CsrMatrix::from_raw(n, row_offsets, cols, vals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.push(i, i, 2.0);
            if i > 0 {
                b.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.push(i, i + 1, -1.0);
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn identity_spmv() {
        let y = CsrMatrix::identity(3).spmv(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn laplacian_row_sums() {
        let y = laplace_1d(3).spmv(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(y, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let err = laplace_1d(3).spmv(&[1.0, 1.0]).unwrap_err();
        assert_eq!(
            err,
            AmgError::DimensionMismatch {
                expected: 3,
                actual: 2
            }
        );
    }

    #[test]
    fn residual_cases() {
        let a = laplace_1d(4);
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let b = a.spmv(&x).unwrap();
        assert!(a.residual(&x, &b).unwrap().iter().all(|r| r.abs() < 1e-15));
        assert_eq!(a.residual(&[0.0; 4], &b).unwrap(), b);
        assert!(a.residual(&x, &b[..3]).is_err());
    }

    #[test]
    fn builder_sums_duplicates() {
        let mut b = TripletBuilder::new(2);
        b.push(1, 0, 1.5);
        b.push(0, 0, 1.0);
        b.push(1, 0, 0.5);
        b.push(0, 1, -1.0);
        let m = b.build().unwrap();
        assert_eq!(m.to_dense(), vec![vec![1.0, -1.0], vec![2.0, 0.0]]);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn structural_checks_reject_bad_input() {
        assert!(CsrMatrix::from_raw(2, vec![0, 1, 2], vec![0, 2], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_raw(2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_raw(2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_raw(1, vec![0, 1], vec![0], vec![f64::NAN]).is_err());
        assert!(CsrMatrix::from_raw(2, vec![0, 1, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn transpose_of_nonsymmetric() {
        let m = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(m.transpose().to_dense(), vec![vec![1.0, 0.0], vec![2.0, 3.0]]);
        assert!(!m.is_symmetric());
        assert!(laplace_1d(5).is_symmetric());
    }
}
