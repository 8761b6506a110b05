//! The two parametrized benchmark problems and their full-order systems.
//!
//! Variant 1 is an advection-diffusion equation on the unit square with
//! diffusivity `nu` and an advection field blended from two fixed
//! divergence-free vortex fields by `sin(alpha)` / `cos(alpha)`, so the
//! operator family is exactly affine with three terms. Variant 2 is a pure
//! diffusion problem whose coefficient is a parametrized Gaussian bump, which
//! makes the operator family nonaffine.
//!
//! Nonhomogeneous Dirichlet data enters through a nodal lifting vector; the
//! raw (no boundary treatment) operators are what the reduced-order machinery
//! consumes, while full-order solves use Dirichlet row replacement or the
//! lifting formulation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fem::assembly::{
    assemble_advection, assemble_mass, assemble_stiffness, assemble_unit_source, mesh_pattern,
    MeshPattern,
};
use crate::fem::mesh::{StructuredTriMesh, SIDE_BOTTOM, SIDE_LEFT, SIDE_RIGHT, SIDE_TOP};
use crate::numerics::{norm2, sparse_solve, sub, SparseMatrixCsr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    AffineAdvectionDiffusion,
    NonaffineDiffusion,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub variant: Variant,
    /// Per-coordinate (lower, upper) bounds of the parameter box.
    pub param_box: Vec<(f64, f64)>,
    /// Advection field magnitude (variant 1); zero disables advection.
    pub advection_magnitude: f64,
}

impl Problem {
    pub fn affine_advection_diffusion() -> Self {
        Problem {
            variant: Variant::AffineAdvectionDiffusion,
            param_box: vec![(0.5, 10.0), (0.0, PI / 6.0)],
            advection_magnitude: 50.0,
        }
    }

    pub fn nonaffine_diffusion() -> Self {
        Problem {
            variant: Variant::NonaffineDiffusion,
            param_box: vec![(0.4, 0.6), (0.4, 0.6), (0.05, 0.1)],
            advection_magnitude: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.param_box.len()
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.param_box.len()
            && mu
                .iter()
                .zip(self.param_box.iter())
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    fn check_mu(&self, mu: &[f64]) -> Result<()> {
        if !self.contains(mu) {
            return Err(Error::OutOfDomain {
                detail: format!("mu = {mu:?}, box = {:?}", self.param_box),
            });
        }
        Ok(())
    }

    /// First fixed vortex field (stream function sin(pi x) sin(2 pi y),
    /// normalized so the peak speed is about the configured magnitude).
    pub fn field_b1(&self, x: f64, y: f64) -> [f64; 2] {
        let m = self.advection_magnitude;
        [
            m * (PI * x).sin() * (2.0 * PI * y).cos(),
            -0.5 * m * (PI * x).cos() * (2.0 * PI * y).sin(),
        ]
    }

    /// Second vortex field: the first one reflected across the diagonal.
    pub fn field_b2(&self, x: f64, y: f64) -> [f64; 2] {
        let m = self.advection_magnitude;
        [
            0.5 * m * (PI * y).cos() * (2.0 * PI * x).sin(),
            -m * (2.0 * PI * x).cos() * (PI * y).sin(),
        ]
    }

    pub fn advection_field(&self, alpha: f64, x: f64, y: f64) -> [f64; 2] {
        let b1 = self.field_b1(x, y);
        let b2 = self.field_b2(x, y);
        let (s, c) = alpha.sin_cos();
        [s * b1[0] + c * b2[0], s * b1[1] + c * b2[1]]
    }

    /// Gaussian-bump diffusion coefficient of variant 2.
    pub fn diffusivity(&self, mu: &[f64], x: f64, y: f64) -> f64 {
        let (x0, y0, sigma) = (mu[0], mu[1], mu[2]);
        let r2 = (x - x0) * (x - x0) + (y - y0) * (y - y0);
        sigma + (1.0 / sigma) * (-r2 / sigma).exp()
    }

    /// Dirichlet nodes with prescribed values, sorted by node id.
    pub fn dirichlet_values(&self, mesh: &StructuredTriMesh) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for n in 0..mesh.n_nodes() {
            let mask = mesh.boundary_mask(n);
            match self.variant {
                Variant::AffineAdvectionDiffusion => {
                    if mask & SIDE_LEFT != 0 {
                        out.push((n, 0.0));
                    } else if mask & SIDE_RIGHT != 0 {
                        out.push((n, 1.0));
                    }
                }
                Variant::NonaffineDiffusion => {
                    if mask & SIDE_BOTTOM != 0 {
                        out.push((n, 1.0));
                    } else if mask & (SIDE_LEFT | SIDE_RIGHT) != 0 && mask & SIDE_TOP == 0 {
                        out.push((n, 0.0));
                    }
                }
            }
        }
        out
    }

    pub fn dirichlet_mask(&self, mesh: &StructuredTriMesh) -> Vec<bool> {
        let mut mask = vec![false; mesh.n_nodes()];
        for (n, _) in self.dirichlet_values(mesh) {
            mask[n] = true;
        }
        mask
    }

    /// Nodal lifting vector: the prescribed value at Dirichlet nodes, zero
    /// everywhere else.
    pub fn lifting(&self, mesh: &StructuredTriMesh) -> Vec<f64> {
        let mut l = vec![0.0; mesh.n_nodes()];
        for (n, v) in self.dirichlet_values(mesh) {
            l[n] = v;
        }
        l
    }

    /// Raw operator (no boundary treatment), assembled directly at mu.
    pub fn assemble_raw_operator(
        &self,
        mesh: &StructuredTriMesh,
        pattern: &MeshPattern,
        mu: &[f64],
    ) -> Result<SparseMatrixCsr> {
        self.check_mu(mu)?;
        match self.variant {
            Variant::AffineAdvectionDiffusion => {
                let nu = mu[0];
                let alpha = mu[1];
                let diff = assemble_stiffness(mesh, pattern, |_, _| nu)?;
                let adv =
                    assemble_advection(mesh, pattern, |x, y| self.advection_field(alpha, x, y))?;
                let values: Vec<f64> = diff
                    .values()
                    .iter()
                    .zip(adv.values().iter())
                    .map(|(a, b)| a + b)
                    .collect();
                diff.with_values(values)
            }
            Variant::NonaffineDiffusion => {
                assemble_stiffness(mesh, pattern, |x, y| self.diffusivity(mu, x, y))
            }
        }
    }

    /// Raw right-hand side at mu: source term minus the raw operator applied
    /// to the lifting vector, with Dirichlet rows zeroed.
    pub fn assemble_raw_rhs(
        &self,
        mesh: &StructuredTriMesh,
        raw_operator: &SparseMatrixCsr,
    ) -> Result<Vec<f64>> {
        let lift = self.lifting(mesh);
        let a_lift = raw_operator.spmv(&lift)?;
        let source = match self.variant {
            Variant::AffineAdvectionDiffusion => vec![0.0; mesh.n_nodes()],
            Variant::NonaffineDiffusion => assemble_unit_source(mesh),
        };
        let mask = self.dirichlet_mask(mesh);
        let mut rhs: Vec<f64> = source
            .iter()
            .zip(a_lift.iter())
            .map(|(s, al)| s - al)
            .collect();
        for (n, is_dir) in mask.iter().enumerate() {
            if *is_dir {
                rhs[n] = 0.0;
            }
        }
        Ok(rhs)
    }
}

/// Full-order system ready to solve.
#[derive(Debug, Clone)]
pub struct FomSystem {
    pub matrix: SparseMatrixCsr,
    pub rhs: Vec<f64>,
    pub dirichlet: Vec<(usize, f64)>,
    /// Present for the lifting formulation: add after solving.
    pub lifting: Option<Vec<f64>>,
}

fn replace_dirichlet_rows(
    matrix: &SparseMatrixCsr,
    dirichlet: &[(usize, f64)],
) -> Result<SparseMatrixCsr> {
    let mut values = matrix.values().to_vec();
    let offsets = matrix.row_offsets();
    let cols = matrix.col_indices();
    for &(n, _) in dirichlet {
        for k in offsets[n]..offsets[n + 1] {
            values[k] = if cols[k] == n { 1.0 } else { 0.0 };
        }
    }
    matrix.with_values(values)
}

/// Dirichlet row replacement: identity rows, rhs carries the boundary values.
pub fn fom_system_row_replacement(
    problem: &Problem,
    mesh: &StructuredTriMesh,
    pattern: &MeshPattern,
    mu: &[f64],
) -> Result<FomSystem> {
    let raw = problem.assemble_raw_operator(mesh, pattern, mu)?;
    let dirichlet = problem.dirichlet_values(mesh);
    let matrix = replace_dirichlet_rows(&raw, &dirichlet)?;
    let mut rhs = match problem.variant {
        Variant::AffineAdvectionDiffusion => vec![0.0; mesh.n_nodes()],
        Variant::NonaffineDiffusion => assemble_unit_source(mesh),
    };
    for &(n, v) in &dirichlet {
        rhs[n] = v;
    }
    Ok(FomSystem {
        matrix,
        rhs,
        dirichlet,
        lifting: None,
    })
}

/// Lifting formulation: homogeneous unknown, rhs absorbs the Dirichlet data.
pub fn fom_system_lifting(
    problem: &Problem,
    mesh: &StructuredTriMesh,
    pattern: &MeshPattern,
    mu: &[f64],
) -> Result<FomSystem> {
    let raw = problem.assemble_raw_operator(mesh, pattern, mu)?;
    let dirichlet = problem.dirichlet_values(mesh);
    let rhs = problem.assemble_raw_rhs(mesh, &raw)?;
    let matrix = replace_dirichlet_rows(&raw, &dirichlet)?;
    Ok(FomSystem {
        matrix,
        rhs,
        dirichlet,
        lifting: Some(problem.lifting(mesh)),
    })
}

impl FomSystem {
    /// Solves the system and returns the full nodal field (lifting applied,
    /// Dirichlet values exact).
    pub fn solve(&self, tol: f64, exec: Exec) -> Result<Vec<f64>> {
        let n = self.matrix.rows();
        let mut x = sparse_solve(&self.matrix, &self.rhs, tol, 10 * n, exec)?;
        match &self.lifting {
            Some(lift) => {
                for &(node, _) in &self.dirichlet {
                    x[node] = 0.0;
                }
                for (xi, li) in x.iter_mut().zip(lift.iter()) {
                    *xi += li;
                }
            }
            None => {
                for &(node, v) in &self.dirichlet {
                    x[node] = v;
                }
            }
        }
        Ok(x)
    }

    /// Relative residual of a candidate solution in the solved formulation.
    pub fn relative_residual(&self, full_solution: &[f64]) -> Result<f64> {
        let x: Vec<f64> = match &self.lifting {
            Some(lift) => full_solution
                .iter()
                .zip(lift.iter())
                .map(|(u, l)| u - l)
                .collect(),
            None => full_solution.to_vec(),
        };
        let ax = self.matrix.spmv(&x)?;
        let b_norm = norm2(&self.rhs);
        if b_norm == 0.0 {
            return Ok(norm2(&ax));
        }
        Ok(norm2(&sub(&ax, &self.rhs)) / b_norm)
    }
}

/// Solves the full-order problem at mu with the formulation native to the
/// variant: row replacement for variant 1, lifting for variant 2.
pub fn fom_solve(
    problem: &Problem,
    mesh: &StructuredTriMesh,
    pattern: &MeshPattern,
    mu: &[f64],
    tol: f64,
    exec: Exec,
) -> Result<Vec<f64>> {
    let system = match problem.variant {
        Variant::AffineAdvectionDiffusion => {
            fom_system_row_replacement(problem, mesh, pattern, mu)?
        }
        Variant::NonaffineDiffusion => fom_system_lifting(problem, mesh, pattern, mu)?,
    };
    system.solve(tol, exec)
}

/// Exactly affine decomposition of the variant-1 family.
#[derive(Debug, Clone)]
pub struct AffineFamily {
    /// Raw operators: unit-diffusivity stiffness, then the two advection terms.
    pub matrices: Vec<SparseMatrixCsr>,
    /// Matching rhs components -(A_q u_g) with Dirichlet rows zeroed.
    pub rhs_components: Vec<Vec<f64>>,
}

/// Coefficient functions of the variant-1 affine family: (nu, sin a, cos a).
pub fn theta_affine(mu: &[f64]) -> Vec<f64> {
    vec![mu[0], mu[1].sin(), mu[1].cos()]
}

pub fn affine_components_advdiff(
    problem: &Problem,
    mesh: &StructuredTriMesh,
    pattern: &MeshPattern,
) -> Result<AffineFamily> {
    if problem.variant != Variant::AffineAdvectionDiffusion {
        return Err(Error::InvalidArgument {
            op: "affine_components_advdiff",
            detail: "problem variant is not affine advection-diffusion".into(),
        });
    }
    let a1 = assemble_stiffness(mesh, pattern, |_, _| 1.0)?;
    let a2 = assemble_advection(mesh, pattern, |x, y| problem.field_b1(x, y))?;
    let a3 = assemble_advection(mesh, pattern, |x, y| problem.field_b2(x, y))?;
    let lift = problem.lifting(mesh);
    let mask = problem.dirichlet_mask(mesh);
    let mut rhs_components = Vec::with_capacity(3);
    for a in [&a1, &a2, &a3] {
        let mut f: Vec<f64> = a.spmv(&lift)?.iter().map(|v| -v).collect();
        for (n, is_dir) in mask.iter().enumerate() {
            if *is_dir {
                f[n] = 0.0;
            }
        }
        rhs_components.push(f);
    }
    Ok(AffineFamily {
        matrices: vec![a1, a2, a3],
        rhs_components,
    })
}

/// H1 norm of (u - v): sqrt((u-v)^T (K + M) (u-v)) where K is the
/// unit-diffusivity stiffness and M the mass matrix.
pub fn h1_error(
    u: &[f64],
    v: &[f64],
    stiffness_unit: &SparseMatrixCsr,
    mass: &SparseMatrixCsr,
) -> Result<f64> {
    if u.len() != v.len() || u.len() != stiffness_unit.rows() || u.len() != mass.rows() {
        return Err(Error::Dimension {
            op: "h1_error",
            detail: format!(
                "lengths {} / {}, operators {} / {}",
                u.len(),
                v.len(),
                stiffness_unit.rows(),
                mass.rows()
            ),
        });
    }
    let d = sub(u, v);
    let kd = stiffness_unit.spmv(&d)?;
    let md = mass.spmv(&d)?;
    let quad = crate::numerics::dot(&d, &kd) + crate::numerics::dot(&d, &md);
    Ok(quad.max(0.0).sqrt())
}

/// Convenience bundle: mesh, pattern and the fixed error-metric operators.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: StructuredTriMesh,
    pub pattern: MeshPattern,
    pub stiffness_unit: SparseMatrixCsr,
    pub mass: SparseMatrixCsr,
}

pub fn discretize(nx: usize, ny: usize) -> Result<Discretization> {
    let mesh = crate::fem::mesh::build_mesh(nx, ny)?;
    let pattern = mesh_pattern(&mesh);
    let stiffness_unit = assemble_stiffness(&mesh, &pattern, |_, _| 1.0)?;
    let mass = assemble_mass(&mesh, &pattern)?;
    Ok(Discretization {
        mesh,
        pattern,
        stiffness_unit,
        mass,
    })
}
