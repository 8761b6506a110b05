//! Column-major dense matrix and the handful of BLAS-like kernels the rest of
//! the crate needs. Column-major so snapshot columns are contiguous.

use crate::error::{Error, Result};
use crate::exec::{for_each_chunk_mut, Exec};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Takes ownership of a column-major buffer of length rows*cols.
    pub fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                op: "DenseMatrix::from_raw",
                detail: format!("buffer length {} != {}x{}", data.len(), rows, cols),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::Dimension {
                op: "DenseMatrix::from_columns",
                detail: "no columns".into(),
            });
        }
        let rows = cols[0].len();
        let mut m = DenseMatrix::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::Dimension {
                    op: "DenseMatrix::from_columns",
                    detail: format!("column {} has length {}, expected {}", j, c.len(), rows),
                });
            }
            m.col_mut(j).copy_from_slice(c);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn set_row(&mut self, i: usize, vals: &[f64]) {
        debug_assert_eq!(vals.len(), self.cols);
        for (j, v) in vals.iter().enumerate() {
            self.set(i, j, *v);
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Keeps the first `n` columns.
    pub fn truncate_cols(&self, n: usize) -> DenseMatrix {
        assert!(n <= self.cols);
        DenseMatrix {
            rows: self.rows,
            cols: n,
            data: self.data[..self.rows * n].to_vec(),
        }
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(rows.len(), self.cols);
        for j in 0..self.cols {
            let src = self.col(j);
            let dst = m.col_mut(j);
            for (k, &r) in rows.iter().enumerate() {
                dst[k] = src[r];
            }
        }
        m
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// self += s * other (same shape).
    pub fn add_scaled(&mut self, s: f64, other: &DenseMatrix) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
    }

    /// C = self * b.
    pub fn matmul(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        self.matmul_exec(b, Exec::default())
    }

    pub fn matmul_exec(&self, b: &DenseMatrix, exec: Exec) -> Result<DenseMatrix> {
        if self.cols != b.rows {
            return Err(Error::Dimension {
                op: "matmul",
                detail: format!("{}x{} times {}x{}", self.rows, self.cols, b.rows, b.cols),
            });
        }
        let mut c = DenseMatrix::zeros(self.rows, b.cols);
        let m = self.rows;
        for_each_chunk_mut(exec, c.data_mut(), m, |j, cj| {
            let bj = b.col(j);
            for (k, &bkj) in bj.iter().enumerate() {
                if bkj != 0.0 {
                    axpy(bkj, self.col(k), cj);
                }
            }
        });
        Ok(c)
    }

    /// C = self^T * b.
    pub fn tr_matmul(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        self.tr_matmul_exec(b, Exec::default())
    }

    pub fn tr_matmul_exec(&self, b: &DenseMatrix, exec: Exec) -> Result<DenseMatrix> {
        if self.rows != b.rows {
            return Err(Error::Dimension {
                op: "tr_matmul",
                detail: format!(
                    "{}x{} transposed times {}x{}",
                    self.rows, self.cols, b.rows, b.cols
                ),
            });
        }
        let mut c = DenseMatrix::zeros(self.cols, b.cols);
        let p = self.cols;
        for_each_chunk_mut(exec, c.data_mut(), p, |j, cj| {
            let bj = b.col(j);
            for (i, ci) in cj.iter_mut().enumerate() {
                *ci = dot(self.col(i), bj);
            }
        });
        Ok(c)
    }

    /// y = self * x.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension {
                op: "matvec",
                detail: format!("{}x{} times vector {}", self.rows, self.cols, x.len()),
            });
        }
        let mut y = vec![0.0; self.rows];
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                axpy(xk, self.col(k), &mut y);
            }
        }
        Ok(y)
    }

    /// y = self^T * x.
    pub fn tr_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::Dimension {
                op: "tr_matvec",
                detail: format!(
                    "{}x{} transposed times vector {}",
                    self.rows,
                    self.cols,
                    x.len()
                ),
            });
        }
        Ok((0..self.cols).map(|j| dot(self.col(j), x)).collect())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for i in 0..x.len() {
        y[i] += alpha * x[i];
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
