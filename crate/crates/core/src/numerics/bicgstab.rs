//! Jacobi-preconditioned BiCGStab for the nonsymmetric full-order systems.
//!
//! Convergence is declared on the true residual (recomputed from the matrix),
//! not the recursion, so the contract `||Ax - b|| / ||b|| <= tol` holds for
//! the returned vector.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::dense::{axpy, dot, norm2};
use crate::numerics::sparse::SparseMatrixCsr;

pub fn sparse_solve(
    a: &SparseMatrixCsr,
    b: &[f64],
    tol: f64,
    max_iters: usize,
    exec: Exec,
) -> Result<Vec<f64>> {
    if a.rows() != a.cols() {
        return Err(Error::Dimension {
            op: "sparse_solve",
            detail: format!("matrix is {}x{}", a.rows(), a.cols()),
        });
    }
    if b.len() != a.rows() {
        return Err(Error::Dimension {
            op: "sparse_solve",
            detail: format!("rhs length {} != {}", b.len(), a.rows()),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument {
            op: "sparse_solve",
            detail: format!("tol must be positive, got {tol}"),
        });
    }
    let n = a.rows();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }

    // Jacobi preconditioner; zero diagonal entries fall back to identity.
    let mut inv_diag = vec![1.0; n];
    for i in 0..n {
        let d = a.get(i, i);
        if d != 0.0 {
            inv_diag[i] = 1.0 / d;
        }
    }
    let precond = |z: &mut [f64], s: &[f64]| {
        for i in 0..z.len() {
            z[i] = s[i] * inv_diag[i];
        }
    };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut iters = 0usize;
    let tiny = 1e-300;

    while iters < max_iters {
        iters += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < tiny {
            // breakdown: restart from the current residual
            r = residual(a, &x, b, exec);
            r_hat = r.clone();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|z| *z = 0.0);
            v.iter_mut().for_each(|z| *z = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&mut p_hat, &p);
        v = a.spmv_exec(&p_hat, exec)?;
        let denom = dot(&r_hat, &v);
        if denom.abs() < tiny {
            r = residual(a, &x, b, exec);
            r_hat = r.clone();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|z| *z = 0.0);
            v.iter_mut().for_each(|z| *z = 0.0);
            continue;
        }
        alpha = rho / denom;
        let mut s = r.clone();
        axpy(-alpha, &v, &mut s);
        axpy(alpha, &p_hat, &mut x);
        if norm2(&s) / b_norm <= tol {
            let true_res = norm2(&residual(a, &x, b, exec)) / b_norm;
            if true_res <= tol {
                return Ok(x);
            }
            r = residual(a, &x, b, exec);
            r_hat = r.clone();
            continue;
        }
        precond(&mut s_hat, &s);
        let t = a.spmv_exec(&s_hat, exec)?;
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        if omega == 0.0 {
            // stagnation, restart
            r = residual(a, &x, b, exec);
            r_hat = r.clone();
            rho = 1.0;
            alpha = 1.0;
            p.iter_mut().for_each(|z| *z = 0.0);
            v.iter_mut().for_each(|z| *z = 0.0);
            omega = 1.0;
            continue;
        }
        axpy(omega, &s_hat, &mut x);
        r = s;
        axpy(-omega, &t, &mut r);
        if norm2(&r) / b_norm <= tol {
            let true_res = norm2(&residual(a, &x, b, exec)) / b_norm;
            if true_res <= tol {
                return Ok(x);
            }
            r = residual(a, &x, b, exec);
            r_hat = r.clone();
        }
    }
    let final_res = norm2(&residual(a, &x, b, exec)) / b_norm;
    Err(Error::NonConvergence {
        op: "sparse_solve",
        iterations: iters,
        residual: final_res,
    })
}

fn residual(a: &SparseMatrixCsr, x: &[f64], b: &[f64], exec: Exec) -> Vec<f64> {
    let ax = a.spmv_exec(x, exec).expect("dimensions checked");
    b.iter().zip(ax.iter()).map(|(bi, ai)| bi - ai).collect()
}
