//! Structured triangulation of the unit square.
//!
//! Each grid cell is split into two triangles; the split diagonal alternates
//! in a checkerboard so the mesh is invariant under the x -> 1-x and
//! y -> 1-y reflections whenever nx and ny are even. Node (i, j) gets the
//! id j*(nx+1) + i.

use crate::error::{Error, Result};

pub const SIDE_LEFT: u8 = 1;
pub const SIDE_RIGHT: u8 = 2;
pub const SIDE_BOTTOM: u8 = 4;
pub const SIDE_TOP: u8 = 8;

#[derive(Debug, Clone)]
pub struct StructuredTriMesh {
    nx: usize,
    ny: usize,
    coords: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    /// Bitmask of SIDE_* flags per node; 0 means interior.
    boundary: Vec<u8>,
}

pub fn build_mesh(nx: usize, ny: usize) -> Result<StructuredTriMesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument {
            op: "build_mesh",
            detail: format!("need nx, ny >= 2, got ({nx}, {ny})"),
        });
    }
    let n_nodes = (nx + 1) * (ny + 1);
    let hx = 1.0 / nx as f64;
    let hy = 1.0 / ny as f64;
    let mut coords = Vec::with_capacity(n_nodes);
    let mut boundary = Vec::with_capacity(n_nodes);
    for j in 0..=ny {
        for i in 0..=nx {
            coords.push([i as f64 * hx, j as f64 * hy]);
            let mut mask = 0u8;
            if i == 0 {
                mask |= SIDE_LEFT;
            }
            if i == nx {
                mask |= SIDE_RIGHT;
            }
            if j == 0 {
                mask |= SIDE_BOTTOM;
            }
            if j == ny {
                mask |= SIDE_TOP;
            }
            boundary.push(mask);
        }
    }
    let node = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = node(i, j);
            let b = node(i + 1, j);
            let c = node(i + 1, j + 1);
            let d = node(i, j + 1);
            if (i + j) % 2 == 0 {
                // diagonal a-c
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                // diagonal b-d
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    Ok(StructuredTriMesh {
        nx,
        ny,
        coords,
        triangles,
        boundary,
    })
}

impl StructuredTriMesh {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn coord(&self, node: usize) -> [f64; 2] {
        self.coords[node]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_mask(&self, node: usize) -> u8 {
        self.boundary[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node] != 0
    }

    /// Signed area of triangle t (positive for the CCW orientation used here).
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let pa = self.coords[a];
        let pb = self.coords[b];
        let pc = self.coords[c];
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let pa = self.coords[a];
        let pb = self.coords[b];
        let pc = self.coords[c];
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Constant gradients of the three P1 shape functions on triangle t,
    /// together with the triangle area.
    pub fn p1_gradients(&self, t: usize) -> ([[f64; 2]; 3], f64) {
        let [a, b, c] = self.triangles[t];
        let pa = self.coords[a];
        let pb = self.coords[b];
        let pc = self.coords[c];
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let area = 0.5 * det;
        let g = [
            [(pb[1] - pc[1]) / det, (pc[0] - pb[0]) / det],
            [(pc[1] - pa[1]) / det, (pa[0] - pc[0]) / det],
            [(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det],
        ];
        (g, area)
    }
}
