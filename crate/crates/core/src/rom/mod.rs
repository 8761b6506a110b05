//! Reduced-basis machinery: POD, Galerkin projection, affine operator sets,
//! empirical interpolation and the online reduced solver.

pub mod deim;
pub mod galerkin;
pub mod pod;

pub use deim::{
    deim_offline, deim_offline_exec, deim_offline_tol, deim_online_coeffs, mdeim_offline,
    mdeim_offline_exec, DeimModel, DeimTargetKind, NnzPattern,
};
pub use galerkin::{
    project_affine_family, project_matrix, project_vector, rb_assemble, rb_factor, rb_solve,
    reconstruct, AffineOperatorSet, CoeffScaler, Provenance,
};
pub use pod::{basis_from_svd, pod, pod_exec, pod_truncation_rank, ReducedBasis};
