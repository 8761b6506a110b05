//! P1 assembly of stiffness, advection, mass and source terms.
//!
//! Variable coefficients are sampled once per triangle at the centroid. All
//! operators for one mesh share a single sparsity pattern (full node
//! adjacency), which keeps parametrized matrix families pattern-compatible
//! for hyper-reduction and makes affine recompositions entrywise comparable.

use crate::error::{Error, Result};
use crate::fem::mesh::StructuredTriMesh;
use crate::numerics::SparseMatrixCsr;

/// Node-adjacency sparsity pattern shared by every operator on a mesh.
#[derive(Debug, Clone)]
pub struct MeshPattern {
    rows: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
}

pub fn mesh_pattern(mesh: &StructuredTriMesh) -> MeshPattern {
    let n = mesh.n_nodes();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::with_capacity(9); n];
    for t in mesh.triangles() {
        for &i in t {
            for &j in t {
                if !neighbors[i].contains(&j) {
                    neighbors[i].push(j);
                }
            }
        }
    }
    let mut row_offsets = vec![0usize; n + 1];
    let mut col_indices = Vec::new();
    for (i, nb) in neighbors.iter_mut().enumerate() {
        nb.sort_unstable();
        row_offsets[i + 1] = row_offsets[i] + nb.len();
        col_indices.extend_from_slice(nb);
    }
    MeshPattern {
        rows: n,
        row_offsets,
        col_indices,
    }
}

impl MeshPattern {
    fn position(&self, i: usize, j: usize) -> usize {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        let k = self.col_indices[range.clone()]
            .binary_search(&j)
            .expect("entry inside mesh pattern");
        range.start + k
    }

    fn matrix(&self, values: Vec<f64>) -> Result<SparseMatrixCsr> {
        SparseMatrixCsr::new(
            self.rows,
            self.rows,
            self.row_offsets.clone(),
            self.col_indices.clone(),
            values,
        )
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }
}

/// Stiffness matrix for -div(alpha grad u) with centroid-sampled coefficient.
pub fn assemble_stiffness(
    mesh: &StructuredTriMesh,
    pattern: &MeshPattern,
    diffusivity: impl Fn(f64, f64) -> f64,
) -> Result<SparseMatrixCsr> {
    let mut values = vec![0.0; pattern.nnz()];
    for t in 0..mesh.n_triangles() {
        let c = mesh.centroid(t);
        let alpha = diffusivity(c[0], c[1]);
        if !(alpha > 0.0) {
            return Err(Error::InvalidArgument {
                op: "assemble_stiffness",
                detail: format!("nonpositive diffusivity {alpha} at triangle {t}"),
            });
        }
        let (g, area) = mesh.p1_gradients(t);
        let tri = mesh.triangles()[t];
        for (a, &i) in tri.iter().enumerate() {
            for (b, &j) in tri.iter().enumerate() {
                let k = alpha * area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                values[pattern.position(i, j)] += k;
            }
        }
    }
    pattern.matrix(values)
}

/// Advection matrix with entries int (b . grad phi_j) phi_i, centroid rule.
pub fn assemble_advection(
    mesh: &StructuredTriMesh,
    pattern: &MeshPattern,
    field: impl Fn(f64, f64) -> [f64; 2],
) -> Result<SparseMatrixCsr> {
    let mut values = vec![0.0; pattern.nnz()];
    for t in 0..mesh.n_triangles() {
        let c = mesh.centroid(t);
        let b = field(c[0], c[1]);
        let (g, area) = mesh.p1_gradients(t);
        let tri = mesh.triangles()[t];
        for (bb, &j) in tri.iter().enumerate() {
            let conv = (b[0] * g[bb][0] + b[1] * g[bb][1]) * area / 3.0;
            for &i in tri.iter() {
                values[pattern.position(i, j)] += conv;
            }
        }
    }
    pattern.matrix(values)
}

/// Consistent P1 mass matrix; entries sum to the domain area.
pub fn assemble_mass(mesh: &StructuredTriMesh, pattern: &MeshPattern) -> Result<SparseMatrixCsr> {
    let mut values = vec![0.0; pattern.nnz()];
    for t in 0..mesh.n_triangles() {
        let area = mesh.triangle_area(t);
        let tri = mesh.triangles()[t];
        for (a, &i) in tri.iter().enumerate() {
            for (b, &j) in tri.iter().enumerate() {
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                values[pattern.position(i, j)] += m;
            }
        }
    }
    pattern.matrix(values)
}

/// Load vector for a unit source, centroid rule: int phi_i = area/3 per triangle.
pub fn assemble_unit_source(mesh: &StructuredTriMesh) -> Vec<f64> {
    let mut rhs = vec![0.0; mesh.n_nodes()];
    for t in 0..mesh.n_triangles() {
        let area = mesh.triangle_area(t);
        for &i in &mesh.triangles()[t] {
            rhs[i] += area / 3.0;
        }
    }
    rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::build_mesh;
    use crate::numerics::DenseMatrix;

    #[test]
    fn unit_stiffness_rows_sum_to_zero() {
        let mesh = build_mesh(4, 4).unwrap();
        let pattern = mesh_pattern(&mesh);
        let a = assemble_stiffness(&mesh, &pattern, |_, _| 1.0).unwrap();
        // constants are in the kernel: every row of the raw operator sums to 0
        let ones = vec![1.0; mesh.n_nodes()];
        let au = a.spmv(&ones).unwrap();
        for v in au {
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn patch_test_linear_field() {
        // u = x interpolated at nodes: interior rows of A u vanish
        let mesh = build_mesh(5, 5).unwrap();
        let pattern = mesh_pattern(&mesh);
        let a = assemble_stiffness(&mesh, &pattern, |_, _| 1.0).unwrap();
        let u: Vec<f64> = (0..mesh.n_nodes()).map(|n| mesh.coord(n)[0]).collect();
        let au = a.spmv(&u).unwrap();
        for n in 0..mesh.n_nodes() {
            if !mesh.is_boundary(n) {
                assert!(au[n].abs() < 1e-12, "interior residual {} at {n}", au[n]);
            }
        }
    }

    #[test]
    fn stiffness_is_linear_in_the_coefficient() {
        let mesh = build_mesh(3, 4).unwrap();
        let pattern = mesh_pattern(&mesh);
        let a1 = assemble_stiffness(&mesh, &pattern, |_, _| 1.0).unwrap();
        let a2 = assemble_stiffness(&mesh, &pattern, |_, _| 2.0).unwrap();
        for (x, y) in a1.values().iter().zip(a2.values().iter()) {
            assert!((2.0 * x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn nonpositive_coefficient_names_triangle() {
        let mesh = build_mesh(2, 2).unwrap();
        let pattern = mesh_pattern(&mesh);
        let err = assemble_stiffness(&mesh, &pattern, |x, _| if x < 0.4 { -1.0 } else { 1.0 })
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("triangle"), "{msg}");
    }

    #[test]
    fn zero_field_gives_zero_advection() {
        let mesh = build_mesh(3, 3).unwrap();
        let pattern = mesh_pattern(&mesh);
        let a = assemble_advection(&mesh, &pattern, |_, _| [0.0, 0.0]).unwrap();
        assert!(a.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_field_kills_constant_vector() {
        // grad of a constant is zero, so A*1 = 0 in every row
        let mesh = build_mesh(4, 4).unwrap();
        let pattern = mesh_pattern(&mesh);
        let a = assemble_advection(&mesh, &pattern, |_, _| [1.0, 0.0]).unwrap();
        let ones = vec![1.0; mesh.n_nodes()];
        for v in a.spmv(&ones).unwrap() {
            assert!(v.abs() < 1e-13);
        }
    }

    /// Independent dense assembler looping triangles with its own geometry
    /// math; oracle for the CSR advection path.
    fn dense_advection_oracle(
        mesh: &StructuredTriMesh,
        field: impl Fn(f64, f64) -> [f64; 2],
    ) -> DenseMatrix {
        let n = mesh.n_nodes();
        let mut m = DenseMatrix::zeros(n, n);
        for t in 0..mesh.n_triangles() {
            let [i0, i1, i2] = mesh.triangles()[t];
            let p: Vec<[f64; 2]> = vec![mesh.coord(i0), mesh.coord(i1), mesh.coord(i2)];
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let area = det.abs() / 2.0;
            let grads = [
                [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
                [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
                [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
            ];
            let cx = (p[0][0] + p[1][0] + p[2][0]) / 3.0;
            let cy = (p[0][1] + p[1][1] + p[2][1]) / 3.0;
            let b = field(cx, cy);
            let nodes = [i0, i1, i2];
            for (jb, &j) in nodes.iter().enumerate() {
                let val = (b[0] * grads[jb][0] + b[1] * grads[jb][1]) * area / 3.0;
                for &i in &nodes {
                    m.set(i, j, m.get(i, j) + val);
                }
            }
        }
        m
    }

    #[test]
    fn advection_matches_dense_oracle_for_vortex_field() {
        let mesh = build_mesh(4, 4).unwrap();
        let pattern = mesh_pattern(&mesh);
        let field = |x: f64, y: f64| -> [f64; 2] {
            use std::f64::consts::PI;
            [
                (PI * x).sin() * (2.0 * PI * y).cos(),
                -0.5 * (PI * x).cos() * (2.0 * PI * y).sin(),
            ]
        };
        let a = assemble_advection(&mesh, &pattern, field).unwrap();
        let oracle = dense_advection_oracle(&mesh, field);
        for i in 0..mesh.n_nodes() {
            for j in 0..mesh.n_nodes() {
                assert!((a.get(i, j) - oracle.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mass_entries_sum_to_domain_area() {
        let mesh = build_mesh(6, 5).unwrap();
        let pattern = mesh_pattern(&mesh);
        let m = assemble_mass(&mesh, &pattern).unwrap();
        let total: f64 = m.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mass_diagonal_matches_hand_integration_on_2x2() {
        // Exact P1 mass: M_ii = sum over adjacent triangles of area/6.
        let mesh = build_mesh(2, 2).unwrap();
        let pattern = mesh_pattern(&mesh);
        let m = assemble_mass(&mesh, &pattern).unwrap();
        let area = 1.0 / 8.0;
        for n in 0..mesh.n_nodes() {
            let adjacent = mesh.triangles().iter().filter(|t| t.contains(&n)).count() as f64;
            let expected = adjacent * area / 6.0;
            assert!(
                (m.get(n, n) - expected).abs() < 1e-15,
                "node {n}: {} vs {expected}",
                m.get(n, n)
            );
        }
    }

    #[test]
    fn mass_is_positive_definite_by_ritz_values() {
        // smallest eigenvalue of the dense mass matrix on a small mesh
        let mesh = build_mesh(3, 3).unwrap();
        let pattern = mesh_pattern(&mesh);
        let m = assemble_mass(&mesh, &pattern).unwrap().to_dense();
        let n = m.rows();
        // Jacobi eigenvalue iteration (test-local oracle)
        let mut g = m.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += g.get(i, j).abs();
                }
            }
            if off < 1e-14 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = g.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (g.get(q, q) - g.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = g.get(k, p);
                        let akq = g.get(k, q);
                        g.set(k, p, c * akp - s * akq);
                        g.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = g.get(p, k);
                        let aqk = g.get(q, k);
                        g.set(p, k, c * apk - s * aqk);
                        g.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        let min_ev = (0..n).map(|i| g.get(i, i)).fold(f64::INFINITY, f64::min);
        assert!(min_ev > 0.0, "smallest Ritz value {min_ev}");
    }

    #[test]
    fn unit_source_integrates_to_one() {
        let mesh = build_mesh(7, 4).unwrap();
        let rhs = assemble_unit_source(&mesh);
        let total: f64 = rhs.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
