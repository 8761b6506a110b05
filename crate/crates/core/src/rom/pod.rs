//! Proper orthogonal decomposition with the energy truncation criterion.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::{svd_exec, DenseMatrix, SvdResult};

#[derive(Debug, Clone)]
pub struct ReducedBasis {
    /// Orthonormal basis, n_h x n.
    pub basis: DenseMatrix,
    /// Every singular value of the snapshot matrix, for diagnostics.
    pub singular_values: Vec<f64>,
    pub pod_tolerance: f64,
}

impl ReducedBasis {
    pub fn dim(&self) -> usize {
        self.basis.cols()
    }
}

/// Smallest n such that the discarded tail energy satisfies
/// `1 - sum_{i<=n} s_i^2 / sum s_i^2 <= eps^2`.
pub fn pod_truncation_rank(singular_values: &[f64], eps_pod: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0;
    }
    let mut partial = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        partial += s * s;
        if 1.0 - partial / total <= eps_pod * eps_pod {
            return i + 1;
        }
    }
    singular_values.len()
}

pub fn pod(snapshots: &DenseMatrix, eps_pod: f64) -> Result<ReducedBasis> {
    pod_exec(snapshots, eps_pod, Exec::default())
}

pub fn pod_exec(snapshots: &DenseMatrix, eps_pod: f64, exec: Exec) -> Result<ReducedBasis> {
    if !(eps_pod > 0.0 && eps_pod < 1.0) {
        return Err(Error::InvalidArgument {
            op: "pod",
            detail: format!("eps_pod must lie in (0, 1), got {eps_pod}"),
        });
    }
    if snapshots.frob_norm() == 0.0 {
        return Err(Error::InvalidArgument {
            op: "pod",
            detail: "all snapshots are zero".into(),
        });
    }
    let decomp = svd_exec(snapshots, exec)?;
    Ok(basis_from_svd(&decomp, eps_pod))
}

/// Truncates an existing snapshot SVD; lets one decomposition serve several
/// tolerances.
pub fn basis_from_svd(decomp: &SvdResult, eps_pod: f64) -> ReducedBasis {
    let n = pod_truncation_rank(&decomp.singular_values, eps_pod).max(1);
    ReducedBasis {
        basis: decomp.u.truncate_cols(n),
        singular_values: decomp.singular_values.clone(),
        pod_tolerance: eps_pod,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_nonzero_column() {
        let c = vec![3.0, 0.0, 4.0];
        let snaps = DenseMatrix::from_columns(&[c.clone()]).unwrap();
        let rb = pod(&snaps, 0.5).unwrap();
        assert_eq!(rb.dim(), 1);
        let v = rb.basis.col(0);
        // unit multiple of c / ||c||
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!((v[0] / v[2] - 3.0 / 4.0).abs() < 1e-12);
        assert!(v[1].abs() < 1e-12);
    }

    #[test]
    fn prescribed_spectrum_truncates_at_two() {
        // singular values (1, 0.1, 0.001) and eps = 0.05:
        // tail after 1 is ~9.9e-3 > 2.5e-3, after 2 is ~9.9e-7 <= 2.5e-3
        let m = DenseMatrix::from_fn(5, 3, |i, j| if i == j { [1.0, 0.1, 0.001][j] } else { 0.0 });
        let rb = pod(&m, 0.05).unwrap();
        assert_eq!(rb.dim(), 2);
        assert_eq!(rb.singular_values.len(), 3);
    }

    #[test]
    fn truncation_rank_is_minimal_and_tail_bound_holds() {
        let sigma = vec![10.0, 5.0, 1.0, 0.5, 1e-3, 1e-6];
        for eps in [0.5, 0.1, 0.01, 1e-4, 1e-7] {
            let n = pod_truncation_rank(&sigma, eps);
            let total: f64 = sigma.iter().map(|s| s * s).sum();
            let head: f64 = sigma[..n].iter().map(|s| s * s).sum();
            assert!(1.0 - head / total <= eps * eps);
            if n > 1 {
                let head_prev: f64 = sigma[..n - 1].iter().map(|s| s * s).sum();
                assert!(
                    1.0 - head_prev / total > eps * eps,
                    "not minimal at eps {eps}"
                );
            }
        }
    }

    #[test]
    fn zero_snapshots_rejected() {
        let z = DenseMatrix::zeros(4, 2);
        assert!(pod(&z, 0.1).is_err());
    }

    #[test]
    fn bad_tolerance_rejected() {
        let m = DenseMatrix::identity(3);
        assert!(pod(&m, 0.0).is_err());
        assert!(pod(&m, 1.0).is_err());
    }

    #[test]
    fn orthonormal_columns() {
        let mut rng = crate::rng::SplitMix64::new(17);
        let m = DenseMatrix::from_fn(30, 10, |_, _| rng.uniform(-1.0, 1.0));
        let rb = pod(&m, 1e-8).unwrap();
        let g = rb.basis.tr_matmul(&rb.basis).unwrap();
        for i in 0..rb.dim() {
            for j in 0..rb.dim() {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((g.get(i, j) - t).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn rank_nondecreasing_as_tolerance_tightens() {
        let mut rng = crate::rng::SplitMix64::new(18);
        let m = DenseMatrix::from_fn(40, 15, |i, j| {
            ((i + 2 * j) as f64 * 0.21).sin() + 0.01 * rng.uniform(-1.0, 1.0)
        });
        let decomp = crate::numerics::svd(&m).unwrap();
        let mut prev = 0;
        for eps in [1e-1, 1e-2, 1e-4, 1e-6, 1e-8] {
            let n = basis_from_svd(&decomp, eps).dim();
            assert!(n >= prev, "rank decreased from {prev} to {n} at eps {eps}");
            prev = n;
        }
    }

    #[test]
    fn nonaffine_snapshot_sweep_has_nondecreasing_rank() {
        use crate::exec::Exec;
        use crate::fem::{discretize, Problem};
        let p = Problem::nonaffine_diffusion();
        let d = discretize(16, 16).unwrap();
        let mus = crate::pipeline::sample_parameters(
            &p.param_box,
            30,
            &mut crate::rng::SplitMix64::new(19),
        );
        let snaps = crate::pipeline::generate_snapshots(&p, &d, &mus, 1e-10, Exec::Serial).unwrap();
        let decomp = crate::numerics::svd(&snaps).unwrap();
        let mut prev = 0;
        for eps in [1e-4, 1e-5, 1e-6, 1e-7] {
            let n = basis_from_svd(&decomp, eps).dim();
            assert!(n >= prev, "rank decreased at eps {eps}");
            prev = n;
        }
        assert!(prev > 1, "sweep never grew past one mode");
    }
}
