//! The offline stage: snapshots, basis construction, projections,
//! hyper-reduction, coefficient scalers and the training dataset.

use crate::error::{Error, Result};
use crate::exec::{map_collect, Exec};
use crate::fem::{
    affine_components_advdiff, discretize, theta_affine, Discretization, Problem, Variant,
};
use crate::neural::{LatentMode, ThetaMap};
use crate::numerics::{svd_exec, DenseMatrix, SparseMatrixCsr};
use crate::rng::SplitMix64;
use crate::rom::{
    basis_from_svd, deim_offline_exec, deim_online_coeffs, mdeim_offline_exec, project_matrix,
    project_vector, AffineOperatorSet, CoeffScaler, DeimModel, Provenance, ReducedBasis,
};

use super::config::{stream_tags, ExperimentConfig};
use super::dataset::{
    assemble_dataset, augment_dataset_with_rb, generate_snapshots, rows_from_snapshots,
    SensorDataset,
};
use super::sampling::{sample_parameters, sample_sensors, SensorSet};

#[derive(Debug, Clone)]
pub enum VariantArtifacts {
    Affine {
        /// Projected exact-affine blocks at the working tolerance.
        layer_matrices: Vec<DenseMatrix>,
        layer_vectors: Vec<Vec<f64>>,
        /// The same blocks through the tighter augmentation basis.
        augment_matrices: Vec<DenseMatrix>,
        augment_vectors: Vec<Vec<f64>>,
        /// Latent scaler over the training parameters.
        mu_scaler: CoeffScaler,
    },
    Nonaffine {
        mdeim: DeimModel,
        deim_rhs: DeimModel,
        layer_matrices: Vec<DenseMatrix>,
        layer_vectors: Vec<Vec<f64>>,
        augment_matrices: Vec<DenseMatrix>,
        augment_vectors: Vec<Vec<f64>>,
        /// Coefficient scalers per truncation count in the sweep.
        scalers: Vec<(usize, CoeffScaler)>,
    },
}

#[derive(Debug, Clone)]
pub struct OfflineArtifacts {
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub disc: Discretization,
    pub sensors: SensorSet,
    pub snapshot_mus: Vec<Vec<f64>>,
    pub basis: ReducedBasis,
    pub augment_basis: ReducedBasis,
    pub dataset: SensorDataset,
    pub augment_skipped: usize,
    pub variant_data: VariantArtifacts,
}

impl OfflineArtifacts {
    pub fn latent_mode(&self) -> LatentMode {
        match self.problem.variant {
            Variant::AffineAdvectionDiffusion => {
                LatentMode::PhysicalParams(ThetaMap::AdvectionDiffusion)
            }
            Variant::NonaffineDiffusion => LatentMode::AffineCoeffs,
        }
    }

    /// Basis rows at the output sensors (the frozen extraction matrix P V).
    pub fn output_map(&self) -> DenseMatrix {
        self.basis.basis.select_rows(&self.sensors.output_nodes)
    }

    /// Reduced operator set feeding the network head at the given term count.
    pub fn affine_set_for(&self, q_a: usize) -> Result<AffineOperatorSet> {
        match &self.variant_data {
            VariantArtifacts::Affine {
                layer_matrices,
                layer_vectors,
                mu_scaler,
                ..
            } => AffineOperatorSet::new(
                layer_matrices.clone(),
                layer_vectors.clone(),
                mu_scaler.clone(),
                Provenance::ExactAffine,
            ),
            VariantArtifacts::Nonaffine {
                layer_matrices,
                layer_vectors,
                scalers,
                ..
            } => {
                if q_a == 0 || q_a > layer_matrices.len() {
                    return Err(Error::InvalidArgument {
                        op: "affine_set_for",
                        detail: format!("q_a = {q_a} outside 1..={}", layer_matrices.len()),
                    });
                }
                let scaler = scalers
                    .iter()
                    .find(|(q, _)| *q == q_a)
                    .map(|(_, s)| s.clone())
                    .ok_or_else(|| {
                        Error::MissingArtifact(format!(
                            "coefficient scaler for q_a = {q_a}; add it to q_a_sweep"
                        ))
                    })?;
                AffineOperatorSet::new(
                    layer_matrices[..q_a].to_vec(),
                    layer_vectors.clone(),
                    scaler,
                    Provenance::DeimApproximated,
                )
            }
        }
    }

    /// Affine coefficients at a parameter value: exact functions for the
    /// affine variant, interpolation probes for the nonaffine one.
    pub fn theta_for_mu(&self, mu: &[f64], q_a: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        match &self.variant_data {
            VariantArtifacts::Affine { .. } => {
                let t = theta_affine(mu);
                Ok((t.clone(), t))
            }
            VariantArtifacts::Nonaffine {
                mdeim, deim_rhs, ..
            } => {
                let raw =
                    self.problem
                        .assemble_raw_operator(&self.disc.mesh, &self.disc.pattern, mu)?;
                let rhs = self.problem.assemble_raw_rhs(&self.disc.mesh, &raw)?;
                let model = if q_a == mdeim.m() {
                    mdeim.clone()
                } else {
                    mdeim.truncate(q_a)?
                };
                let theta_a = deim_online_coeffs(&model, &model.probe_values(raw.values())?)?;
                let theta_f = deim_online_coeffs(deim_rhs, &deim_rhs.probe_values(&rhs)?)?;
                Ok((theta_a, theta_f))
            }
        }
    }
}

pub fn run_offline(config: &ExperimentConfig, exec: Exec) -> Result<OfflineArtifacts> {
    config.validate()?;
    let problem = config.problem();
    let disc = discretize(config.nx, config.ny)
        .map_err(|e| Error::Pipeline(format!("mesh stage: {e}")))?;

    let sensors = sample_sensors(
        &disc.mesh,
        &problem,
        config.n_in,
        config.n_out,
        config.autoencoder,
        &mut SplitMix64::substream(config.seed, stream_tags::SENSORS),
    )
    .map_err(|e| Error::Pipeline(format!("sensor stage: {e}")))?;

    let snapshot_mus = sample_parameters(
        &problem.param_box,
        config.n_fom_snapshots,
        &mut SplitMix64::substream(config.seed, stream_tags::SNAPSHOTS),
    );
    let snapshots = generate_snapshots(&problem, &disc, &snapshot_mus, config.solver_tol, exec)
        .map_err(|e| Error::Pipeline(format!("snapshot stage: {e}")))?;

    // POD runs on the homogenized snapshots (lifting removed)
    let lift = problem.lifting(&disc.mesh);
    let mut homogenized = snapshots.clone();
    for j in 0..homogenized.cols() {
        let col = homogenized.col_mut(j);
        for (v, l) in col.iter_mut().zip(lift.iter()) {
            *v -= l;
        }
    }
    let decomp =
        svd_exec(&homogenized, exec).map_err(|e| Error::Pipeline(format!("basis stage: {e}")))?;
    let basis = basis_from_svd(&decomp, config.eps_pod);
    let augment_basis = basis_from_svd(&decomp, config.augment_eps_pod.min(config.eps_pod));

    let variant_data = match problem.variant {
        Variant::AffineAdvectionDiffusion => {
            let family = affine_components_advdiff(&problem, &disc.mesh, &disc.pattern)
                .map_err(|e| Error::Pipeline(format!("affine stage: {e}")))?;
            let project_all = |rb: &ReducedBasis| -> Result<(Vec<DenseMatrix>, Vec<Vec<f64>>)> {
                let mats = family
                    .matrices
                    .iter()
                    .map(|a| project_matrix(a, &rb.basis, exec))
                    .collect::<Result<Vec<_>>>()?;
                let vecs = family
                    .rhs_components
                    .iter()
                    .map(|f| project_vector(f, &rb.basis))
                    .collect::<Result<Vec<_>>>()?;
                Ok((mats, vecs))
            };
            let (layer_matrices, layer_vectors) = project_all(&basis)
                .map_err(|e| Error::Pipeline(format!("projection stage: {e}")))?;
            let (augment_matrices, augment_vectors) = project_all(&augment_basis)
                .map_err(|e| Error::Pipeline(format!("projection stage: {e}")))?;
            let mu_scaler = CoeffScaler::from_samples(&snapshot_mus)
                .map_err(|e| Error::Pipeline(format!("scaler stage: {e}")))?;
            VariantArtifacts::Affine {
                layer_matrices,
                layer_vectors,
                augment_matrices,
                augment_vectors,
                mu_scaler,
            }
        }
        Variant::NonaffineDiffusion => build_nonaffine(
            config,
            &problem,
            &disc,
            &snapshot_mus,
            &basis,
            &augment_basis,
            exec,
        )?,
    };

    // dataset: FOM rows first, reduced-solver rows after
    let (fom_x, fom_y) =
        rows_from_snapshots(&snapshots, &sensors.input_nodes, &sensors.output_nodes);
    let n_extra = config.n_samples - config.n_fom_snapshots;
    let augmented = if n_extra > 0 {
        let extra_mus = sample_parameters(
            &problem.param_box,
            n_extra,
            &mut SplitMix64::substream(config.seed, stream_tags::AUGMENT),
        );
        let (aug_mats, aug_vecs, scaler) = match &variant_data {
            VariantArtifacts::Affine {
                augment_matrices,
                augment_vectors,
                mu_scaler,
                ..
            } => (augment_matrices, augment_vectors, mu_scaler.clone()),
            VariantArtifacts::Nonaffine {
                augment_matrices,
                augment_vectors,
                scalers,
                ..
            } => (
                augment_matrices,
                augment_vectors,
                scalers
                    .last()
                    .map(|(_, s)| s.clone())
                    .expect("sweep covers q_a"),
            ),
        };
        let aug_ops = AffineOperatorSet::new(
            aug_mats.clone(),
            aug_vecs.clone(),
            scaler,
            Provenance::ExactAffine,
        )?;
        let input_map = augment_basis.basis.select_rows(&sensors.input_nodes);
        let output_map = augment_basis.basis.select_rows(&sensors.output_nodes);
        let q_max = aug_mats.len();
        let theta_provider = |mu: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
            match &variant_data {
                VariantArtifacts::Affine { .. } => {
                    let t = theta_affine(mu);
                    Ok((t.clone(), t))
                }
                VariantArtifacts::Nonaffine {
                    mdeim, deim_rhs, ..
                } => {
                    let raw = problem.assemble_raw_operator(&disc.mesh, &disc.pattern, mu)?;
                    let rhs = problem.assemble_raw_rhs(&disc.mesh, &raw)?;
                    debug_assert_eq!(q_max, mdeim.m());
                    let theta_a = deim_online_coeffs(mdeim, &mdeim.probe_values(raw.values())?)?;
                    let theta_f = deim_online_coeffs(deim_rhs, &deim_rhs.probe_values(&rhs)?)?;
                    Ok((theta_a, theta_f))
                }
            }
        };
        Some(
            augment_dataset_with_rb(
                &aug_ops,
                &input_map,
                &output_map,
                &extra_mus,
                theta_provider,
                exec,
            )
            .map_err(|e| Error::Pipeline(format!("augmentation stage: {e}")))?,
        )
    } else {
        None
    };
    let augment_skipped = augmented.as_ref().map(|a| a.skipped).unwrap_or(0);
    let dataset = assemble_dataset(fom_x, fom_y, &snapshot_mus, augmented)
        .map_err(|e| Error::Pipeline(format!("dataset stage: {e}")))?;

    Ok(OfflineArtifacts {
        config: config.clone(),
        problem,
        disc,
        sensors,
        snapshot_mus,
        basis,
        augment_basis,
        dataset,
        augment_skipped,
        variant_data,
    })
}

fn build_nonaffine(
    config: &ExperimentConfig,
    problem: &Problem,
    disc: &Discretization,
    snapshot_mus: &[Vec<f64>],
    basis: &ReducedBasis,
    augment_basis: &ReducedBasis,
    exec: Exec,
) -> Result<VariantArtifacts> {
    // matrix and rhs snapshots for hyper-reduction
    let deim_mus = sample_parameters(
        &problem.param_box,
        config.deim_matrix_snapshots,
        &mut SplitMix64::substream(config.seed, stream_tags::DEIM),
    );
    let assembled: Vec<Result<(SparseMatrixCsr, Vec<f64>)>> =
        map_collect(exec, deim_mus.len(), |i| {
            let raw = problem.assemble_raw_operator(&disc.mesh, &disc.pattern, &deim_mus[i])?;
            let rhs = problem.assemble_raw_rhs(&disc.mesh, &raw)?;
            Ok((raw, rhs))
        });
    let mut mat_snaps = Vec::with_capacity(deim_mus.len());
    let mut rhs_cols = Vec::with_capacity(deim_mus.len());
    for item in assembled {
        let (a, f) = item.map_err(|e| Error::Pipeline(format!("hyper-reduction stage: {e}")))?;
        mat_snaps.push(a);
        rhs_cols.push(f);
    }
    let rhs_snaps = DenseMatrix::from_columns(&rhs_cols)?;
    let mdeim = mdeim_offline_exec(&mat_snaps, config.q_a, exec)
        .map_err(|e| Error::Pipeline(format!("matrix interpolation stage: {e}")))?;
    let deim_rhs = deim_offline_exec(&rhs_snaps, config.q_f, exec)
        .map_err(|e| Error::Pipeline(format!("rhs interpolation stage: {e}")))?;

    // projections of the interpolation bases through both reduced bases
    let basis_mats = mdeim.basis_matrices()?;
    let project_all = |rb: &ReducedBasis| -> Result<(Vec<DenseMatrix>, Vec<Vec<f64>>)> {
        let mats = basis_mats
            .iter()
            .map(|a| project_matrix(a, &rb.basis, exec))
            .collect::<Result<Vec<_>>>()?;
        let vecs = (0..deim_rhs.m())
            .map(|q| project_vector(deim_rhs.basis.col(q), &rb.basis))
            .collect::<Result<Vec<_>>>()?;
        Ok((mats, vecs))
    };
    let (layer_matrices, layer_vectors) =
        project_all(basis).map_err(|e| Error::Pipeline(format!("projection stage: {e}")))?;
    let (augment_matrices, augment_vectors) = project_all(augment_basis)
        .map_err(|e| Error::Pipeline(format!("projection stage: {e}")))?;

    // coefficient probes of the training snapshots feed the scalers
    let probes: Vec<Result<(Vec<f64>, Vec<f64>)>> = map_collect(exec, snapshot_mus.len(), |i| {
        let raw = problem.assemble_raw_operator(&disc.mesh, &disc.pattern, &snapshot_mus[i])?;
        let rhs = problem.assemble_raw_rhs(&disc.mesh, &raw)?;
        Ok((
            mdeim.probe_values(raw.values())?,
            deim_rhs.probe_values(&rhs)?,
        ))
    });
    let mut mat_probes: Vec<Vec<f64>> = Vec::with_capacity(snapshot_mus.len());
    let mut rhs_probes: Vec<Vec<f64>> = Vec::with_capacity(snapshot_mus.len());
    for item in probes {
        let (a, f) = item.map_err(|e| Error::Pipeline(format!("scaler stage: {e}")))?;
        mat_probes.push(a);
        rhs_probes.push(f);
    }
    let theta_f_samples: Vec<Vec<f64>> = rhs_probes
        .iter()
        .map(|p| deim_online_coeffs(&deim_rhs, p.as_slice()))
        .collect::<Result<Vec<_>>>()?;

    let mut sweep: Vec<usize> = config.q_a_sweep.clone();
    if !sweep.contains(&config.q_a) {
        sweep.push(config.q_a);
    }
    sweep.sort_unstable();
    sweep.dedup();
    let mut scalers = Vec::with_capacity(sweep.len());
    for &q in &sweep {
        let model = if q == mdeim.m() {
            mdeim.clone()
        } else {
            mdeim.truncate(q)?
        };
        let mut rows = Vec::with_capacity(snapshot_mus.len());
        for (mp, tf) in mat_probes.iter().zip(theta_f_samples.iter()) {
            let theta_a = deim_online_coeffs(&model, &mp[..q])?;
            let mut row = theta_a;
            row.extend_from_slice(tf);
            rows.push(row);
        }
        scalers.push((q, CoeffScaler::from_samples(&rows)?));
    }
    Ok(VariantArtifacts::Nonaffine {
        mdeim,
        deim_rhs,
        layer_matrices,
        layer_vectors,
        augment_matrices,
        augment_vectors,
        scalers,
    })
}
