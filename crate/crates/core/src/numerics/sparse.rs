//! Compressed sparse row matrix for the finite-element operators.

use crate::error::{Error, Result};
use crate::exec::{for_each_chunk_mut, Exec};
use crate::numerics::dense::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrixCsr {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrixCsr {
    pub fn new(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 || row_offsets[0] != 0 {
            return Err(Error::Dimension {
                op: "SparseMatrixCsr::new",
                detail: "row offsets must have length rows+1 and start at 0".into(),
            });
        }
        if *row_offsets.last().unwrap() != col_indices.len() || col_indices.len() != values.len() {
            return Err(Error::Dimension {
                op: "SparseMatrixCsr::new",
                detail: "offsets, indices and values are inconsistent".into(),
            });
        }
        for r in 0..rows {
            if row_offsets[r] > row_offsets[r + 1] {
                return Err(Error::Dimension {
                    op: "SparseMatrixCsr::new",
                    detail: format!("row offsets decrease at row {r}"),
                });
            }
            let s = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            for w in s.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::Dimension {
                        op: "SparseMatrixCsr::new",
                        detail: format!("column indices not strictly increasing in row {r}"),
                    });
                }
            }
            if let Some(&last) = s.last() {
                if last >= cols {
                    return Err(Error::Dimension {
                        op: "SparseMatrixCsr::new",
                        detail: format!("column index out of range in row {r}"),
                    });
                }
            }
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                op: "SparseMatrixCsr::new",
                detail: "matrix values".into(),
            });
        }
        Ok(SparseMatrixCsr {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut counts = vec![0usize; rows];
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            if i >= rows || j >= cols {
                return Err(Error::Dimension {
                    op: "SparseMatrixCsr::from_triplets",
                    detail: format!("entry ({i},{j}) outside {rows}x{cols}"),
                });
            }
            if prev == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(j);
                values.push(v);
                counts[i] += 1;
                prev = Some((i, j));
            }
        }
        let mut row_offsets = vec![0usize; rows + 1];
        for i in 0..rows {
            row_offsets[i + 1] = row_offsets[i] + counts[i];
        }
        SparseMatrixCsr::new(rows, cols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrixCsr {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

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

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn same_pattern(&self, other: &SparseMatrixCsr) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
    }

    /// Same pattern, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::Dimension {
                op: "SparseMatrixCsr::with_values",
                detail: "value count differs from pattern".into(),
            });
        }
        SparseMatrixCsr::new(
            self.rows,
            self.cols,
            self.row_offsets.clone(),
            self.col_indices.clone(),
            values,
        )
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.spmv_exec(x, Exec::default())
    }

    pub fn spmv_exec(&self, x: &[f64], exec: Exec) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension {
                op: "spmv",
                detail: format!("{}x{} times vector {}", self.rows, self.cols, x.len()),
            });
        }
        let mut y = vec![0.0; self.rows];
        // Parallel over row blocks; each output entry is one fixed-order sum.
        let block = 512.min(self.rows.max(1));
        for_each_chunk_mut(exec, &mut y, block, |b, chunk| {
            let base = b * block;
            for (k, yi) in chunk.iter_mut().enumerate() {
                let i = base + k;
                let mut s = 0.0;
                for idx in self.row_offsets[i]..self.row_offsets[i + 1] {
                    s += self.values[idx] * x[self.col_indices[idx]];
                }
                *yi = s;
            }
        });
        Ok(y)
    }

    /// Sum of coeff[k] * mats[k]; all matrices must share one pattern.
    pub fn linear_combination(
        coeffs: &[f64],
        mats: &[&SparseMatrixCsr],
    ) -> Result<SparseMatrixCsr> {
        if coeffs.len() != mats.len() || mats.is_empty() {
            return Err(Error::Dimension {
                op: "linear_combination",
                detail: "coefficient/matrix count mismatch or empty".into(),
            });
        }
        for m in mats.iter().skip(1) {
            if !mats[0].same_pattern(m) {
                return Err(Error::Dimension {
                    op: "linear_combination",
                    detail: "sparsity patterns differ".into(),
                });
            }
        }
        let mut values = vec![0.0; mats[0].nnz()];
        for (c, m) in coeffs.iter().zip(mats.iter()) {
            for (v, mv) in values.iter_mut().zip(m.values.iter()) {
                *v += c * mv;
            }
        }
        mats[0].with_values(values)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                d.set(i, j, v);
            }
        }
        d
    }
}
