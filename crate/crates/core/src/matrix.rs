//! Row-major dense matrices.
//!
//! `DenseMatrix` is the concrete workhorse for sketches, triangular factors and
//! the small projected problems. Storage is `data[i * cols + j] = M[i, j]`.
//! Constructors reject non-finite entries; arithmetic helpers panic on shape
//! mismatch, the same way slice indexing does.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            let row = self.row(i);
            let shown: Vec<String> = row.iter().take(8).map(|v| format!("{v:+.6e}")).collect();
            writeln!(f, "  {}", shown.join(" "))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, rejecting wrong lengths and NaN/Inf.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    /// Builds a matrix from row slices.
    ///
    /// Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows in DenseMatrix::from_rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Assembles a `rows x columns.len()` matrix from column vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "column {j} has wrong length");
            for (i, v) in col.iter().enumerate() {
                m.data[i * cols + j] = *v;
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for (i, x) in v.iter().enumerate() {
            self.data[i * self.cols + j] = *x;
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        let oc = other.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * oc..(i + 1) * oc];
            for (k, a) in self.row(i).iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * oc..(k + 1) * oc];
                for (o, b) in out_row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ * other` without forming the transpose.
    pub fn t_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.rows, other.rows,
            "t_matmul: ({}x{})ᵀ times {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.cols, other.cols);
        let oc = other.cols;
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, a) in arow.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * oc..(i + 1) * oc];
                for (o, b) in out_row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * otherᵀ`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols, "matmul_t: inner dimensions differ");
        Self::from_fn(self.rows, other.rows, |i, j| dot(self.row(i), other.row(j)))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ * y`.
    pub fn t_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            if *yi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Self {
        assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> Self {
        assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Multiplies column `j` by `d[j]`, i.e. `self * diag(d)`.
    pub fn scale_columns(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            for (v, s) in out.row_mut(i).iter_mut().zip(d) {
                *v *= s;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Columns `range` as a new matrix.
    pub fn columns_range(&self, range: std::ops::Range<usize>) -> Self {
        assert!(range.end <= self.cols);
        let c = range.len();
        Self::from_fn(self.rows, c, |i, j| self.get(i, range.start + j))
    }

    pub fn rows_range(&self, range: std::ops::Range<usize>) -> Self {
        assert!(range.end <= self.rows);
        Self {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    /// `[self | other]`.
    pub fn hcat(&self, other: &DenseMatrix) -> Self {
        assert_eq!(self.rows, other.rows);
        let c = self.cols + other.cols;
        Self::from_fn(self.rows, c, |i, j| {
            if j < self.cols {
                self.get(i, j)
            } else {
                other.get(i, j - self.cols)
            }
        })
    }

    /// Relative Frobenius asymmetry `‖M − Mᵀ‖_F / ‖M‖_F` (0 for the zero matrix).
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut num = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = self.get(i, j) - self.get(j, i);
                num += d * d;
            }
        }
        let den = self.frobenius_norm();
        if den == 0.0 {
            0.0
        } else {
            num.sqrt() / den
        }
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        assert_eq!(self.rows, self.cols);
        Self::from_fn(self.rows, self.cols, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    pub fn is_upper_triangular(&self) -> bool {
        (0..self.rows).all(|i| (0..i.min(self.cols)).all(|j| self.get(i, j) == 0.0))
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm with scaling to avoid overflow/underflow.
pub fn norm2(v: &[f64]) -> f64 {
    let plain = dot(v, v);
    if plain.is_finite() && plain > 1e-290 {
        return plain.sqrt();
    }
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_data() {
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0; 3]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0, f64::NAN, 0.0, 1.0]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn products_agree() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let ab = a.matmul(&b);
        assert_eq!(ab, DenseMatrix::from_rows(&[&[4.0, 5.0], &[10.0, 11.0]]));
        assert_eq!(a.transpose().t_matmul(&b), ab);
        assert_eq!(a.matmul_t(&b.transpose()), ab);
        assert_eq!(a.t_matvec(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn norm2_handles_extremes() {
        assert!((norm2(&[3e200, 4e200]) / 5e200 - 1.0).abs() < 1e-15);
        assert!((norm2(&[3e-200, 4e-200]) - 5e-200).abs() < 1e-214);
        assert_eq!(norm2(&[]), 0.0);
    }
}
