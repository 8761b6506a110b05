//! Galerkin projection, reduced affine operator sets and the online solve.

use crate::error::{Error, Result};
use crate::exec::{for_each_chunk_mut, Exec};
use crate::numerics::{lu_factor, DenseMatrix, LuFactor, SparseMatrixCsr};
use crate::rom::pod::ReducedBasis;

/// A_N = V^T A V.
pub fn project_matrix(a: &SparseMatrixCsr, v: &DenseMatrix, exec: Exec) -> Result<DenseMatrix> {
    if a.cols() != v.rows() || a.rows() != v.rows() {
        return Err(Error::Dimension {
            op: "project_matrix",
            detail: format!(
                "operator {}x{}, basis {} rows",
                a.rows(),
                a.cols(),
                v.rows()
            ),
        });
    }
    let n_h = v.rows();
    let n = v.cols();
    let mut av = DenseMatrix::zeros(n_h, n);
    for_each_chunk_mut(exec, av.data_mut(), n_h, |j, col| {
        let avj = a.spmv_exec(v.col(j), Exec::Serial).expect("checked dims");
        col.copy_from_slice(&avj);
    });
    v.tr_matmul_exec(&av, exec)
}

/// f_N = V^T f.
pub fn project_vector(f: &[f64], v: &DenseMatrix) -> Result<Vec<f64>> {
    v.tr_matvec(f)
}

/// Affine map xi in [0,1]^s -> coefficient range, per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffScaler {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CoeffScaler {
    /// Ranges from observed coefficient samples, widened 10% on each side.
    /// A degenerate (constant) coefficient gets a symmetric pad so the
    /// scaler stays invertible.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<CoeffScaler> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument {
                op: "CoeffScaler::from_samples",
                detail: "no samples".into(),
            });
        }
        let s = samples[0].len();
        let mut lo = vec![f64::INFINITY; s];
        let mut hi = vec![f64::NEG_INFINITY; s];
        for row in samples {
            if row.len() != s {
                return Err(Error::Dimension {
                    op: "CoeffScaler::from_samples",
                    detail: "ragged sample rows".into(),
                });
            }
            for (k, v) in row.iter().enumerate() {
                lo[k] = lo[k].min(*v);
                hi[k] = hi[k].max(*v);
            }
        }
        for k in 0..s {
            let width = hi[k] - lo[k];
            let pad = if width > 0.0 {
                0.1 * width
            } else {
                0.1 * lo[k].abs().max(1e-6)
            };
            lo[k] -= pad;
            hi[k] += pad;
        }
        Ok(CoeffScaler { lo, hi })
    }

    /// Exact bounds, no widening: for ranges that are known a priori.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<CoeffScaler> {
        for (lo, hi) in bounds {
            if !(lo < hi) {
                return Err(Error::InvalidArgument {
                    op: "CoeffScaler::from_bounds",
                    detail: format!("empty range [{lo}, {hi}]"),
                });
            }
        }
        Ok(CoeffScaler {
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn apply(&self, xi: &[f64]) -> Vec<f64> {
        xi.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .map(|(x, (lo, hi))| lo + x * (hi - lo))
            .collect()
    }

    pub fn invert(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .map(|(t, (lo, hi))| (t - lo) / (hi - lo))
            .collect()
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(self.hi.iter())
            .map(|(lo, hi)| hi - lo)
            .collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(t, (lo, hi))| *t >= *lo && *t <= *hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ExactAffine,
    DeimApproximated,
}

/// Frozen data of the reduced solver: projected affine blocks plus the
/// coefficient scaler feeding them.
#[derive(Debug, Clone)]
pub struct AffineOperatorSet {
    /// Reduced matrices A_N^q, each n x n.
    pub matrices: Vec<DenseMatrix>,
    /// Reduced vectors f_N^q, each length n.
    pub vectors: Vec<Vec<f64>>,
    /// Range map for the latent coefficients (length = latent size s).
    pub scaler: CoeffScaler,
    pub provenance: Provenance,
}

impl AffineOperatorSet {
    pub fn new(
        matrices: Vec<DenseMatrix>,
        vectors: Vec<Vec<f64>>,
        scaler: CoeffScaler,
        provenance: Provenance,
    ) -> Result<Self> {
        if matrices.is_empty() || vectors.is_empty() {
            return Err(Error::InvalidArgument {
                op: "AffineOperatorSet::new",
                detail: "need at least one matrix and one vector term".into(),
            });
        }
        let n = matrices[0].rows();
        for m in &matrices {
            if m.rows() != n || m.cols() != n {
                return Err(Error::Dimension {
                    op: "AffineOperatorSet::new",
                    detail: "reduced matrices must share one square size".into(),
                });
            }
        }
        for v in &vectors {
            if v.len() != n {
                return Err(Error::Dimension {
                    op: "AffineOperatorSet::new",
                    detail: "reduced vectors must match the matrix size".into(),
                });
            }
        }
        for (lo, hi) in scaler.lo.iter().zip(scaler.hi.iter()) {
            if !(lo < hi) {
                return Err(Error::InvalidArgument {
                    op: "AffineOperatorSet::new",
                    detail: "scaler ranges must have positive width".into(),
                });
            }
        }
        Ok(AffineOperatorSet {
            matrices,
            vectors,
            scaler,
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.matrices[0].rows()
    }

    pub fn q_a(&self) -> usize {
        self.matrices.len()
    }

    pub fn q_f(&self) -> usize {
        self.vectors.len()
    }
}

/// Assembles the reduced system sum theta_a^q A_N^q, sum theta_f^q f_N^q.
pub fn rb_assemble(
    theta_a: &[f64],
    theta_f: &[f64],
    ops: &AffineOperatorSet,
) -> Result<(DenseMatrix, Vec<f64>)> {
    if theta_a.len() != ops.q_a() || theta_f.len() != ops.q_f() {
        return Err(Error::Dimension {
            op: "rb_assemble",
            detail: format!(
                "theta lengths ({}, {}) vs (Q_a, Q_f) = ({}, {})",
                theta_a.len(),
                theta_f.len(),
                ops.q_a(),
                ops.q_f()
            ),
        });
    }
    let n = ops.n();
    let mut a = DenseMatrix::zeros(n, n);
    for (t, m) in theta_a.iter().zip(ops.matrices.iter()) {
        if *t != 0.0 {
            a.add_scaled(*t, m);
        }
    }
    let mut f = vec![0.0; n];
    for (t, v) in theta_f.iter().zip(ops.vectors.iter()) {
        if *t != 0.0 {
            for (fi, vi) in f.iter_mut().zip(v.iter()) {
                *fi += t * vi;
            }
        }
    }
    Ok((a, f))
}

/// Solves the reduced system by dense LU.
pub fn rb_solve(a_n: &DenseMatrix, f_n: &[f64]) -> Result<Vec<f64>> {
    lu_factor(a_n)?.solve(f_n)
}

/// Factored variant used where the factor is reused (adjoint solves).
pub fn rb_factor(a_n: &DenseMatrix) -> Result<LuFactor> {
    lu_factor(a_n)
}

/// Full-order reconstruction V u_N.
pub fn reconstruct(v: &DenseMatrix, u_n: &[f64]) -> Result<Vec<f64>> {
    v.matvec(u_n)
}

/// Projects raw affine components through a basis.
pub fn project_affine_family(
    matrices: &[SparseMatrixCsr],
    vectors: &[Vec<f64>],
    basis: &ReducedBasis,
    scaler: CoeffScaler,
    provenance: Provenance,
    exec: Exec,
) -> Result<AffineOperatorSet> {
    let reduced_mats = matrices
        .iter()
        .map(|a| project_matrix(a, &basis.basis, exec))
        .collect::<Result<Vec<_>>>()?;
    let reduced_vecs = vectors
        .iter()
        .map(|f| project_vector(f, &basis.basis))
        .collect::<Result<Vec<_>>>()?;
    AffineOperatorSet::new(reduced_mats, reduced_vecs, scaler, provenance)
}
