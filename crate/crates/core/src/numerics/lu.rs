//! Dense LU factorization with partial pivoting, plus the transposed solve
//! used by the adjoint of the reduced solver.

use crate::error::{Error, Result};
use crate::numerics::dense::DenseMatrix;

#[derive(Debug, Clone)]
pub struct LuFactor {
    n: usize,
    /// Packed L (unit diagonal, below) and U (diagonal and above), column-major.
    lu: Vec<f64>,
    /// Row swap applied at each elimination step: row k <-> row piv[k].
    piv: Vec<usize>,
}

pub fn lu_factor(a: &DenseMatrix) -> Result<LuFactor> {
    if a.rows() != a.cols() {
        return Err(Error::Dimension {
            op: "lu_factor",
            detail: format!("matrix is {}x{}", a.rows(), a.cols()),
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite {
            op: "lu_factor",
            detail: "matrix entries".into(),
        });
    }
    let n = a.rows();
    let mut lu = a.data().to_vec();
    let mut piv = vec![0usize; n];
    for k in 0..n {
        // pivot search in column k
        let mut p = k;
        let mut best = lu[k * n + k].abs();
        for i in k + 1..n {
            let v = lu[k * n + i].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        piv[k] = p;
        if best == 0.0 {
            return Err(Error::SingularMatrix { op: "lu_factor" });
        }
        if p != k {
            for j in 0..n {
                lu.swap(j * n + k, j * n + p);
            }
        }
        let pivot = lu[k * n + k];
        for i in k + 1..n {
            lu[k * n + i] /= pivot;
        }
        for j in k + 1..n {
            let ukj = lu[j * n + k];
            if ukj != 0.0 {
                for i in k + 1..n {
                    lu[j * n + i] -= lu[k * n + i] * ukj;
                }
            }
        }
    }
    Ok(LuFactor { n, lu, piv })
}

impl LuFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension {
                op: "LuFactor::solve",
                detail: format!("rhs length {} != {}", b.len(), self.n),
            });
        }
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        // forward: L y = P b (unit diagonal)
        for k in 0..n {
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..n {
                    x[i] -= self.lu[k * n + i] * xk;
                }
            }
        }
        // backward: U x = y
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..n {
                s -= self.lu[j * n + k] * x[j];
            }
            x[k] = s / self.lu[k * n + k];
        }
        Ok(x)
    }

    /// Solves A^T x = b, reusing the factors of A.
    pub fn solve_transposed(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension {
                op: "LuFactor::solve_transposed",
                detail: format!("rhs length {} != {}", b.len(), self.n),
            });
        }
        let n = self.n;
        let mut x = b.to_vec();
        // A^T = U^T L^T P, so solve U^T y = b, then L^T z = y, then x = P^T z.
        for k in 0..n {
            let mut s = x[k];
            for j in 0..k {
                s -= self.lu[k * n + j] * x[j];
            }
            x[k] = s / self.lu[k * n + k];
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..n {
                s -= self.lu[k * n + j] * x[j];
            }
            x[k] = s;
        }
        for k in (0..n).rev() {
            x.swap(k, self.piv[k]);
        }
        Ok(x)
    }
}

/// Solves a dense square system with partial pivoting.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows() != b.len() {
        return Err(Error::Dimension {
            op: "dense_solve",
            detail: format!("matrix {}x{}, rhs {}", a.rows(), a.cols(), b.len()),
        });
    }
    lu_factor(a)?.solve(b)
}
