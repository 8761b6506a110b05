//! Structured-mesh P1 finite elements for the two parametrized benchmarks.

pub mod assembly;
pub mod mesh;
pub mod problem;

pub use assembly::{
    assemble_advection, assemble_mass, assemble_stiffness, assemble_unit_source, mesh_pattern,
    MeshPattern,
};
pub use mesh::{build_mesh, StructuredTriMesh};
pub use problem::{
    affine_components_advdiff, discretize, fom_solve, fom_system_lifting,
    fom_system_row_replacement, h1_error, theta_affine, AffineFamily, Discretization, FomSystem,
    Problem, Variant,
};
