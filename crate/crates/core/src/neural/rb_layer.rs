//! Output layer whose activation is the reduced-basis solver.
//!
//! Forward, per sample: squash the affine map output through a sigmoid so the
//! latent lies in (0,1)^s, rescale to the coefficient ranges, assemble the
//! reduced system from the frozen affine blocks, solve it, and read the
//! reconstructed solution at the output sensors. In physical-parameter mode
//! the latent is the parameter vector itself and the known coefficient
//! functions are applied inside the layer.
//!
//! Backward: one adjoint solve with the transposed reduced matrix per sample
//! reuses the forward LU factor; the coefficient gradients are
//! `d theta_a^q = -lambda^T A_N^q u_N` and `d theta_f^q = +lambda^T f_N^q`,
//! chained through the coefficient map, the range scaler and the sigmoid.
//!
//! A reduced matrix that comes out exactly singular (wild latent values early
//! in training) is retried once with a relative Tikhonov shift; the event is
//! counted so the training loop can abort if it becomes frequent.

use crate::error::{Error, Result};
use crate::exec::{map_collect, Exec};
use crate::numerics::{dot, lu_factor, DenseMatrix, LuFactor};
use crate::rom::{rb_assemble, AffineOperatorSet};

use super::layer::sigmoid;

/// Relative size of the diagonal shift used to recover singular solves.
const TIKHONOV_RELATIVE_SHIFT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaMap {
    /// theta_a = theta_f = (nu, sin alpha, cos alpha) from mu = (nu, alpha).
    AdvectionDiffusion,
}

impl ThetaMap {
    pub fn latent_dim(&self) -> usize {
        match self {
            ThetaMap::AdvectionDiffusion => 2,
        }
    }

    pub fn q_a(&self) -> usize {
        match self {
            ThetaMap::AdvectionDiffusion => 3,
        }
    }

    pub fn q_f(&self) -> usize {
        match self {
            ThetaMap::AdvectionDiffusion => 3,
        }
    }

    pub fn theta(&self, mu: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            ThetaMap::AdvectionDiffusion => {
                let t = vec![mu[0], mu[1].sin(), mu[1].cos()];
                (t.clone(), t)
            }
        }
    }

    /// dL/dmu from the coefficient gradients (Jacobian-transpose product).
    pub fn chain_to_latent(&self, mu: &[f64], d_theta_a: &[f64], d_theta_f: &[f64]) -> Vec<f64> {
        match self {
            ThetaMap::AdvectionDiffusion => {
                let (s, c) = mu[1].sin_cos();
                let d_nu = d_theta_a[0] + d_theta_f[0];
                let d_alpha = c * (d_theta_a[1] + d_theta_f[1]) - s * (d_theta_a[2] + d_theta_f[2]);
                vec![d_nu, d_alpha]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentMode {
    /// Latent = physical parameters; coefficient functions applied inside.
    PhysicalParams(ThetaMap),
    /// Latent = the affine coefficients themselves, length Q_a + Q_f.
    AffineCoeffs,
}

#[derive(Debug, Clone)]
pub struct RbOutputLayer {
    pub ops: AffineOperatorSet,
    /// Sensor extraction matrix P V, n_out x n.
    pub output_map: DenseMatrix,
    pub mode: LatentMode,
}

#[derive(Debug, Clone)]
pub struct RbSampleCache {
    xi: Vec<f64>,
    latent: Vec<f64>,
    theta_a: Vec<f64>,
    theta_f: Vec<f64>,
    u_n: Vec<f64>,
    factor: LuFactor,
    pub shifted: bool,
}

impl RbSampleCache {
    pub fn u_n(&self) -> &[f64] {
        &self.u_n
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    pub fn theta(&self) -> (&[f64], &[f64]) {
        (&self.theta_a, &self.theta_f)
    }
}

impl RbOutputLayer {
    pub fn new(ops: AffineOperatorSet, output_map: DenseMatrix, mode: LatentMode) -> Result<Self> {
        let s = match &mode {
            LatentMode::PhysicalParams(map) => {
                if map.q_a() != ops.q_a() || map.q_f() != ops.q_f() {
                    return Err(Error::Dimension {
                        op: "RbOutputLayer::new",
                        detail: format!(
                            "coefficient map yields ({}, {}) terms, operator set has ({}, {})",
                            map.q_a(),
                            map.q_f(),
                            ops.q_a(),
                            ops.q_f()
                        ),
                    });
                }
                map.latent_dim()
            }
            LatentMode::AffineCoeffs => ops.q_a() + ops.q_f(),
        };
        if ops.scaler.len() != s {
            return Err(Error::Dimension {
                op: "RbOutputLayer::new",
                detail: format!("scaler length {} != latent size {}", ops.scaler.len(), s),
            });
        }
        if output_map.cols() != ops.n() {
            return Err(Error::Dimension {
                op: "RbOutputLayer::new",
                detail: format!(
                    "output map is {}x{}, reduced dimension {}",
                    output_map.rows(),
                    output_map.cols(),
                    ops.n()
                ),
            });
        }
        Ok(RbOutputLayer {
            ops,
            output_map,
            mode,
        })
    }

    /// Latent size s fed by the last affine map.
    pub fn s(&self) -> usize {
        self.ops.scaler.len()
    }

    pub fn n_out(&self) -> usize {
        self.output_map.rows()
    }

    fn theta_from_latent(&self, latent: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match &self.mode {
            LatentMode::PhysicalParams(map) => map.theta(latent),
            LatentMode::AffineCoeffs => (
                latent[..self.ops.q_a()].to_vec(),
                latent[self.ops.q_a()..].to_vec(),
            ),
        }
    }

    fn factor_with_recovery(&self, a_n: &DenseMatrix) -> Result<(LuFactor, bool)> {
        match lu_factor(a_n) {
            Ok(f) => Ok((f, false)),
            Err(Error::SingularMatrix { .. }) => {
                let n = a_n.rows();
                let trace: f64 = (0..n).map(|i| a_n.get(i, i)).sum();
                let shift = TIKHONOV_RELATIVE_SHIFT * (trace.abs() / n as f64).max(1.0);
                let mut shifted = a_n.clone();
                for i in 0..n {
                    shifted.set(i, i, shifted.get(i, i) + shift);
                }
                Ok((lu_factor(&shifted)?, true))
            }
            Err(e) => Err(e),
        }
    }

    /// Forward map for one sample: z -> (sensor values, cache).
    pub fn forward_sample(&self, z: &[f64]) -> Result<(Vec<f64>, RbSampleCache)> {
        if z.len() != self.s() {
            return Err(Error::Dimension {
                op: "rb_layer_forward",
                detail: format!("latent width {} != {}", z.len(), self.s()),
            });
        }
        let xi: Vec<f64> = z.iter().map(|v| sigmoid(*v)).collect();
        let latent = self.ops.scaler.apply(&xi);
        let (theta_a, theta_f) = self.theta_from_latent(&latent);
        let (a_n, f_n) = rb_assemble(&theta_a, &theta_f, &self.ops)?;
        let (factor, shifted) = self.factor_with_recovery(&a_n)?;
        let u_n = factor.solve(&f_n)?;
        let y = self.output_map.matvec(&u_n)?;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                op: "rb_layer_forward",
                detail: "sensor values".into(),
            });
        }
        Ok((
            y,
            RbSampleCache {
                xi,
                latent,
                theta_a,
                theta_f,
                u_n,
                factor,
                shifted,
            },
        ))
    }

    /// Backward map for one sample: upstream dL/dy -> dL/dz.
    pub fn backward_sample(&self, cache: &RbSampleCache, d_y: &[f64]) -> Result<Vec<f64>> {
        if d_y.len() != self.n_out() {
            return Err(Error::Dimension {
                op: "rb_layer_backward",
                detail: format!("upstream width {} != {}", d_y.len(), self.n_out()),
            });
        }
        // adjoint solve: A_N^T lambda = (P V)^T dL/dy
        let rhs = self.output_map.tr_matvec(d_y)?;
        let lambda = cache.factor.solve_transposed(&rhs)?;
        let mut d_theta_a = Vec::with_capacity(self.ops.q_a());
        for m in &self.ops.matrices {
            let a_u = m.matvec(&cache.u_n)?;
            d_theta_a.push(-dot(&lambda, &a_u));
        }
        let mut d_theta_f = Vec::with_capacity(self.ops.q_f());
        for f in &self.ops.vectors {
            d_theta_f.push(dot(&lambda, f));
        }
        let d_latent = match &self.mode {
            LatentMode::PhysicalParams(map) => {
                map.chain_to_latent(&cache.latent, &d_theta_a, &d_theta_f)
            }
            LatentMode::AffineCoeffs => {
                let mut d = d_theta_a;
                d.extend_from_slice(&d_theta_f);
                d
            }
        };
        let slopes = self.ops.scaler.slopes();
        let d_z: Vec<f64> = d_latent
            .iter()
            .zip(slopes.iter())
            .zip(cache.xi.iter())
            .map(|((dl, slope), xi)| dl * slope * xi * (1.0 - xi))
            .collect();
        Ok(d_z)
    }

    /// Batched forward: rows of `z` are samples. Returns sensor outputs,
    /// latent readouts, caches and the count of shift-recovered solves.
    #[allow(clippy::type_complexity)]
    pub fn forward_batch(
        &self,
        z: &DenseMatrix,
        exec: Exec,
    ) -> Result<(DenseMatrix, DenseMatrix, Vec<RbSampleCache>, usize)> {
        let n_b = z.rows();
        let per_sample: Vec<Result<(Vec<f64>, RbSampleCache)>> =
            map_collect(exec, n_b, |i| self.forward_sample(&z.row(i)));
        let mut y = DenseMatrix::zeros(n_b, self.n_out());
        let mut latents = DenseMatrix::zeros(n_b, self.s());
        let mut caches = Vec::with_capacity(n_b);
        let mut shifted = 0usize;
        for (i, item) in per_sample.into_iter().enumerate() {
            let (yi, cache) = item?;
            y.set_row(i, &yi);
            latents.set_row(i, &cache.latent);
            shifted += cache.shifted as usize;
            caches.push(cache);
        }
        Ok((y, latents, caches, shifted))
    }

    pub fn backward_batch(
        &self,
        caches: &[RbSampleCache],
        d_y: &DenseMatrix,
        exec: Exec,
    ) -> Result<DenseMatrix> {
        let n_b = caches.len();
        if d_y.rows() != n_b {
            return Err(Error::Dimension {
                op: "rb_layer_backward",
                detail: "cache and gradient batch sizes differ".into(),
            });
        }
        let per_sample: Vec<Result<Vec<f64>>> =
            map_collect(exec, n_b, |i| self.backward_sample(&caches[i], &d_y.row(i)));
        let mut d_z = DenseMatrix::zeros(n_b, self.s());
        for (i, item) in per_sample.into_iter().enumerate() {
            d_z.set_row(i, &item?);
        }
        Ok(d_z)
    }
}
