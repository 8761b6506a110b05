//! Persistence: one directory per experiment, a `manifest.json` describing
//! the run plus raw little-endian IEEE-754 binary blobs per array.
//!
//! All writes are deterministic (sorted catalogs, fixed field order), so the
//! same seed reproduces byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::discretize;
use crate::neural::{
    Activation, DenseLayer, EpochRecord, Head, LatentMode, NetworkModel, RbOutputLayer, ThetaMap,
};
use crate::numerics::DenseMatrix;
use crate::rom::{
    AffineOperatorSet, CoeffScaler, DeimModel, DeimTargetKind, NnzPattern, Provenance, ReducedBasis,
};

use super::config::ExperimentConfig;
use super::dataset::{RowProvenance, SensorDataset};
use super::offline::{OfflineArtifacts, VariantArtifacts};
use super::sampling::SensorSet;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArrayMeta {
    pub file: String,
    pub rows: usize,
    pub cols: usize,
    pub order: String,
    pub dtype: String,
}

struct ArrayStore {
    dir: PathBuf,
    catalog: BTreeMap<String, ArrayMeta>,
}

impl ArrayStore {
    fn create(dir: &Path) -> Result<ArrayStore> {
        fs::create_dir_all(dir)?;
        Ok(ArrayStore {
            dir: dir.to_path_buf(),
            catalog: BTreeMap::new(),
        })
    }

    fn write_f64(&mut self, name: &str, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                op: "ArrayStore::write_f64",
                detail: format!("{name}: {} values for {rows}x{cols}", data.len()),
            });
        }
        let file = format!("{name}.bin");
        let mut bytes = Vec::with_capacity(data.len() * 8);
        for v in data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(self.dir.join(&file), bytes)?;
        self.catalog.insert(
            name.to_string(),
            ArrayMeta {
                file,
                rows,
                cols,
                order: "col-major".into(),
                dtype: "f64".into(),
            },
        );
        Ok(())
    }

    fn write_u64(&mut self, name: &str, data: &[u64]) -> Result<()> {
        let file = format!("{name}.bin");
        let mut bytes = Vec::with_capacity(data.len() * 8);
        for v in data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(self.dir.join(&file), bytes)?;
        self.catalog.insert(
            name.to_string(),
            ArrayMeta {
                file,
                rows: data.len(),
                cols: 1,
                order: "col-major".into(),
                dtype: "u64".into(),
            },
        );
        Ok(())
    }

    fn write_matrix(&mut self, name: &str, m: &DenseMatrix) -> Result<()> {
        self.write_f64(name, m.rows(), m.cols(), m.data())
    }

    fn write_vec(&mut self, name: &str, v: &[f64]) -> Result<()> {
        self.write_f64(name, v.len(), 1, v)
    }
}

struct ArrayLoader<'a> {
    dir: &'a Path,
    catalog: &'a BTreeMap<String, ArrayMeta>,
}

impl<'a> ArrayLoader<'a> {
    fn meta(&self, name: &str) -> Result<&ArrayMeta> {
        self.catalog
            .get(name)
            .ok_or_else(|| Error::MissingArtifact(format!("array '{name}' absent from manifest")))
    }

    fn read_f64(&self, name: &str) -> Result<(usize, usize, Vec<f64>)> {
        let meta = self.meta(name)?;
        if meta.dtype != "f64" {
            return Err(Error::Config(format!("array '{name}' is not f64")));
        }
        let path = self.dir.join(&meta.file);
        let bytes =
            fs::read(&path).map_err(|_| Error::MissingArtifact(path.display().to_string()))?;
        if bytes.len() != meta.rows * meta.cols * 8 {
            return Err(Error::Config(format!(
                "array '{name}': file length {} does not match {}x{}",
                bytes.len(),
                meta.rows,
                meta.cols
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((meta.rows, meta.cols, data))
    }

    fn read_matrix(&self, name: &str) -> Result<DenseMatrix> {
        let (rows, cols, data) = self.read_f64(name)?;
        DenseMatrix::from_raw(rows, cols, data)
    }

    fn read_vec(&self, name: &str) -> Result<Vec<f64>> {
        let (_, _, data) = self.read_f64(name)?;
        Ok(data)
    }

    fn read_u64(&self, name: &str) -> Result<Vec<u64>> {
        let meta = self.meta(name)?;
        if meta.dtype != "u64" {
            return Err(Error::Config(format!("array '{name}' is not u64")));
        }
        let path = self.dir.join(&meta.file);
        let bytes =
            fs::read(&path).map_err(|_| Error::MissingArtifact(path.display().to_string()))?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn read_usize(&self, name: &str) -> Result<Vec<usize>> {
        Ok(self
            .read_u64(name)?
            .into_iter()
            .map(|v| v as usize)
            .collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScalerMeta {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ScalerMeta {
    fn of(s: &CoeffScaler) -> ScalerMeta {
        ScalerMeta {
            lo: s.lo.clone(),
            hi: s.hi.clone(),
        }
    }

    fn build(&self) -> CoeffScaler {
        CoeffScaler {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
enum VariantMeta {
    Affine {
        mu_scaler: ScalerMeta,
        q_a: usize,
        q_f: usize,
    },
    Nonaffine {
        q_a: usize,
        q_f: usize,
        pattern_rows: usize,
        pattern_cols: usize,
        scalers: Vec<(usize, ScalerMeta)>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct OfflineManifest {
    schema_version: u32,
    kind: String,
    config: ExperimentConfig,
    input_nodes: Vec<usize>,
    output_nodes: Vec<usize>,
    basis_dim: usize,
    augment_basis_dim: usize,
    augment_skipped: usize,
    variant: VariantMeta,
    arrays: BTreeMap<String, ArrayMeta>,
}

pub fn save_artifacts(dir: &Path, artifacts: &OfflineArtifacts) -> Result<()> {
    let mut store = ArrayStore::create(dir)?;
    store.write_matrix("basis", &artifacts.basis.basis)?;
    store.write_matrix("augment_basis", &artifacts.augment_basis.basis)?;
    store.write_vec("singular_values", &artifacts.basis.singular_values)?;
    store.write_matrix("dataset_x", &artifacts.dataset.x)?;
    store.write_matrix("dataset_y", &artifacts.dataset.y)?;
    store.write_matrix("dataset_mu", &artifacts.dataset.mu)?;
    let provenance: Vec<u64> = artifacts
        .dataset
        .provenance
        .iter()
        .map(|p| match p {
            RowProvenance::Fom => 0u64,
            RowProvenance::RbAugmented => 1u64,
        })
        .collect();
    store.write_u64("dataset_provenance", &provenance)?;
    let p = artifacts.problem.dim();
    let mut mus = DenseMatrix::zeros(artifacts.snapshot_mus.len(), p);
    for (i, mu) in artifacts.snapshot_mus.iter().enumerate() {
        mus.set_row(i, mu);
    }
    store.write_matrix("snapshot_mus", &mus)?;

    let variant = match &artifacts.variant_data {
        VariantArtifacts::Affine {
            layer_matrices,
            layer_vectors,
            augment_matrices,
            augment_vectors,
            mu_scaler,
        } => {
            write_blocks(&mut store, "layer", layer_matrices, layer_vectors)?;
            write_blocks(&mut store, "augment", augment_matrices, augment_vectors)?;
            VariantMeta::Affine {
                mu_scaler: ScalerMeta::of(mu_scaler),
                q_a: layer_matrices.len(),
                q_f: layer_vectors.len(),
            }
        }
        VariantArtifacts::Nonaffine {
            mdeim,
            deim_rhs,
            layer_matrices,
            layer_vectors,
            augment_matrices,
            augment_vectors,
            scalers,
        } => {
            write_blocks(&mut store, "layer", layer_matrices, layer_vectors)?;
            write_blocks(&mut store, "augment", augment_matrices, augment_vectors)?;
            store.write_matrix("mdeim_basis", &mdeim.basis)?;
            store.write_u64(
                "mdeim_indices",
                &mdeim.indices.iter().map(|&i| i as u64).collect::<Vec<_>>(),
            )?;
            store.write_vec("mdeim_singular_values", &mdeim.singular_values)?;
            let pattern = mdeim.pattern.as_ref().expect("matrix model has a pattern");
            store.write_u64(
                "mdeim_pattern_offsets",
                &pattern
                    .row_offsets
                    .iter()
                    .map(|&i| i as u64)
                    .collect::<Vec<_>>(),
            )?;
            store.write_u64(
                "mdeim_pattern_cols",
                &pattern
                    .col_indices
                    .iter()
                    .map(|&i| i as u64)
                    .collect::<Vec<_>>(),
            )?;
            store.write_matrix("deim_rhs_basis", &deim_rhs.basis)?;
            store.write_u64(
                "deim_rhs_indices",
                &deim_rhs
                    .indices
                    .iter()
                    .map(|&i| i as u64)
                    .collect::<Vec<_>>(),
            )?;
            store.write_vec("deim_rhs_singular_values", &deim_rhs.singular_values)?;
            VariantMeta::Nonaffine {
                q_a: mdeim.m(),
                q_f: deim_rhs.m(),
                pattern_rows: pattern.rows,
                pattern_cols: pattern.cols,
                scalers: scalers
                    .iter()
                    .map(|(q, s)| (*q, ScalerMeta::of(s)))
                    .collect(),
            }
        }
    };

    let manifest = OfflineManifest {
        schema_version: SCHEMA_VERSION,
        kind: "offline-artifacts".into(),
        config: artifacts.config.clone(),
        input_nodes: artifacts.sensors.input_nodes.clone(),
        output_nodes: artifacts.sensors.output_nodes.clone(),
        basis_dim: artifacts.basis.dim(),
        augment_basis_dim: artifacts.augment_basis.dim(),
        augment_skipped: artifacts.augment_skipped,
        variant,
        arrays: store.catalog.clone(),
    };
    write_manifest(dir, &manifest)
}

fn write_blocks(
    store: &mut ArrayStore,
    prefix: &str,
    matrices: &[DenseMatrix],
    vectors: &[Vec<f64>],
) -> Result<()> {
    for (q, m) in matrices.iter().enumerate() {
        store.write_matrix(&format!("{prefix}_a_{q:03}"), m)?;
    }
    for (q, v) in vectors.iter().enumerate() {
        store.write_vec(&format!("{prefix}_f_{q:03}"), v)?;
    }
    Ok(())
}

fn read_blocks(
    loader: &ArrayLoader,
    prefix: &str,
    q_a: usize,
    q_f: usize,
) -> Result<(Vec<DenseMatrix>, Vec<Vec<f64>>)> {
    let mats = (0..q_a)
        .map(|q| loader.read_matrix(&format!("{prefix}_a_{q:03}")))
        .collect::<Result<Vec<_>>>()?;
    let vecs = (0..q_f)
        .map(|q| loader.read_vec(&format!("{prefix}_f_{q:03}")))
        .collect::<Result<Vec<_>>>()?;
    Ok((mats, vecs))
}

fn write_manifest<T: Serialize>(dir: &Path, manifest: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Io(format!("manifest serialization: {e}")))?;
    let mut f = fs::File::create(dir.join("manifest.json"))?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

fn read_manifest<T: for<'de> Deserialize<'de>>(dir: &Path) -> Result<T> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path)
        .map_err(|_| Error::MissingArtifact(path.display().to_string()))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))
}

pub fn load_artifacts(dir: &Path) -> Result<OfflineArtifacts> {
    let manifest: OfflineManifest = read_manifest(dir)?;
    if manifest.kind != "offline-artifacts" {
        return Err(Error::Config(format!(
            "expected offline artifacts, found '{}'",
            manifest.kind
        )));
    }
    let loader = ArrayLoader {
        dir,
        catalog: &manifest.arrays,
    };
    let config = manifest.config;
    config.validate()?;
    let problem = config.problem();
    let disc = discretize(config.nx, config.ny)?;
    let mesh_nodes = disc.mesh.n_nodes();

    let basis_matrix = loader.read_matrix("basis")?;
    let augment_matrix = loader.read_matrix("augment_basis")?;
    if basis_matrix.rows() != mesh_nodes {
        return Err(Error::Config(
            "basis row count does not match the configured mesh".into(),
        ));
    }
    let singular_values = loader.read_vec("singular_values")?;
    let basis = ReducedBasis {
        basis: basis_matrix,
        singular_values: singular_values.clone(),
        pod_tolerance: config.eps_pod,
    };
    let augment_basis = ReducedBasis {
        basis: augment_matrix,
        singular_values,
        pod_tolerance: config.augment_eps_pod.min(config.eps_pod),
    };

    let x = loader.read_matrix("dataset_x")?;
    let y = loader.read_matrix("dataset_y")?;
    let mu = loader.read_matrix("dataset_mu")?;
    let provenance = loader
        .read_u64("dataset_provenance")?
        .into_iter()
        .map(|v| {
            if v == 0 {
                RowProvenance::Fom
            } else {
                RowProvenance::RbAugmented
            }
        })
        .collect();
    let dataset = SensorDataset {
        x,
        y,
        mu,
        provenance,
    };
    let mus_matrix = loader.read_matrix("snapshot_mus")?;
    let snapshot_mus: Vec<Vec<f64>> = (0..mus_matrix.rows()).map(|i| mus_matrix.row(i)).collect();

    let variant_data = match manifest.variant {
        VariantMeta::Affine {
            mu_scaler,
            q_a,
            q_f,
        } => {
            let (layer_matrices, layer_vectors) = read_blocks(&loader, "layer", q_a, q_f)?;
            let (augment_matrices, augment_vectors) = read_blocks(&loader, "augment", q_a, q_f)?;
            VariantArtifacts::Affine {
                layer_matrices,
                layer_vectors,
                augment_matrices,
                augment_vectors,
                mu_scaler: mu_scaler.build(),
            }
        }
        VariantMeta::Nonaffine {
            q_a,
            q_f,
            pattern_rows,
            pattern_cols,
            scalers,
        } => {
            let (layer_matrices, layer_vectors) = read_blocks(&loader, "layer", q_a, q_f)?;
            let (augment_matrices, augment_vectors) = read_blocks(&loader, "augment", q_a, q_f)?;
            let pattern = NnzPattern {
                rows: pattern_rows,
                cols: pattern_cols,
                row_offsets: loader.read_usize("mdeim_pattern_offsets")?,
                col_indices: loader.read_usize("mdeim_pattern_cols")?,
            };
            let mdeim = DeimModel::from_parts(
                loader.read_matrix("mdeim_basis")?,
                loader.read_usize("mdeim_indices")?,
                DeimTargetKind::MatrixNnz,
                Some(pattern),
                loader.read_vec("mdeim_singular_values")?,
            )?;
            let deim_rhs = DeimModel::from_parts(
                loader.read_matrix("deim_rhs_basis")?,
                loader.read_usize("deim_rhs_indices")?,
                DeimTargetKind::RhsVector,
                None,
                loader.read_vec("deim_rhs_singular_values")?,
            )?;
            VariantArtifacts::Nonaffine {
                mdeim,
                deim_rhs,
                layer_matrices,
                layer_vectors,
                augment_matrices,
                augment_vectors,
                scalers: scalers.into_iter().map(|(q, s)| (q, s.build())).collect(),
            }
        }
    };

    let sensors = SensorSet {
        input_coords: manifest
            .input_nodes
            .iter()
            .map(|&n| disc.mesh.coord(n))
            .collect(),
        output_coords: manifest
            .output_nodes
            .iter()
            .map(|&n| disc.mesh.coord(n))
            .collect(),
        input_nodes: manifest.input_nodes,
        output_nodes: manifest.output_nodes,
    };

    Ok(OfflineArtifacts {
        config,
        problem,
        disc,
        sensors,
        snapshot_mus,
        basis,
        augment_basis,
        dataset,
        augment_skipped: manifest.augment_skipped,
        variant_data,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointManifest {
    schema_version: u32,
    kind: String,
    config: ExperimentConfig,
    q_a: usize,
    hidden_sizes: Vec<usize>,
    activations: Vec<String>,
    latent_mode: String,
    scaler: ScalerMeta,
    epochs_trained: usize,
    seed: u64,
    arrays: BTreeMap<String, ArrayMeta>,
}

pub struct CheckpointInfo {
    pub q_a: usize,
    pub epochs_trained: usize,
    pub seed: u64,
}

pub fn save_checkpoint(
    dir: &Path,
    model: &NetworkModel,
    config: &ExperimentConfig,
    q_a: usize,
    epochs_trained: usize,
    seed: u64,
) -> Result<()> {
    let mut store = ArrayStore::create(dir)?;
    let mut hidden_sizes = Vec::new();
    let mut activations = Vec::new();
    for (i, layer) in model.hidden.iter().enumerate() {
        store.write_matrix(&format!("hidden_w_{i:02}"), &layer.weights)?;
        store.write_vec(&format!("hidden_b_{i:02}"), &layer.biases)?;
        hidden_sizes.push(layer.n_out());
        activations.push(activation_tag(layer.activation).to_string());
    }
    store.write_matrix("out_w", &model.output_affine.weights)?;
    store.write_vec("out_b", &model.output_affine.biases)?;
    activations.push(activation_tag(model.output_affine.activation).to_string());
    let (latent_mode, scaler) = match &model.head {
        Head::Rb(rb) => (
            match rb.mode {
                LatentMode::PhysicalParams(_) => "physical-parameters".to_string(),
                LatentMode::AffineCoeffs => "affine-coefficients".to_string(),
            },
            ScalerMeta::of(&rb.ops.scaler),
        ),
        Head::Sigmoid => (
            "sigmoid".to_string(),
            ScalerMeta {
                lo: vec![],
                hi: vec![],
            },
        ),
    };
    let manifest = CheckpointManifest {
        schema_version: SCHEMA_VERSION,
        kind: "checkpoint".into(),
        config: config.clone(),
        q_a,
        hidden_sizes,
        activations,
        latent_mode,
        scaler,
        epochs_trained,
        seed,
        arrays: store.catalog.clone(),
    };
    write_manifest(dir, &manifest)
}

fn activation_tag(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::Sigmoid => "sigmoid",
        Activation::Identity => "identity",
    }
}

/// Loads a checkpoint, rebuilding the reduced-solver head from the offline
/// artifacts and the persisted scaler.
pub fn load_checkpoint(
    dir: &Path,
    artifacts: &OfflineArtifacts,
) -> Result<(NetworkModel, CheckpointInfo)> {
    let manifest: CheckpointManifest = read_manifest(dir)?;
    if manifest.kind != "checkpoint" {
        return Err(Error::Config(format!(
            "expected a checkpoint, found '{}'",
            manifest.kind
        )));
    }
    let loader = ArrayLoader {
        dir,
        catalog: &manifest.arrays,
    };
    let mut hidden = Vec::with_capacity(manifest.hidden_sizes.len());
    for i in 0..manifest.hidden_sizes.len() {
        let weights = loader.read_matrix(&format!("hidden_w_{i:02}"))?;
        let biases = loader.read_vec(&format!("hidden_b_{i:02}"))?;
        hidden.push(DenseLayer {
            weights,
            biases,
            activation: Activation::Relu,
        });
    }
    let out_w = loader.read_matrix("out_w")?;
    let out_b = loader.read_vec("out_b")?;
    let output_affine = DenseLayer {
        weights: out_w,
        biases: out_b,
        activation: Activation::Identity,
    };
    let head = match manifest.latent_mode.as_str() {
        "sigmoid" => Head::Sigmoid,
        mode => {
            let mut ops = artifacts.affine_set_for(manifest.q_a)?;
            ops.scaler = manifest.scaler.build();
            let latent_mode = match mode {
                "physical-parameters" => LatentMode::PhysicalParams(ThetaMap::AdvectionDiffusion),
                "affine-coefficients" => LatentMode::AffineCoeffs,
                other => {
                    return Err(Error::Config(format!("unknown latent mode '{other}'")));
                }
            };
            Head::Rb(RbOutputLayer::new(
                ops,
                artifacts.output_map(),
                latent_mode,
            )?)
        }
    };
    let model = NetworkModel {
        hidden,
        output_affine,
        head,
    };
    Ok((
        model,
        CheckpointInfo {
            q_a: manifest.q_a,
            epochs_trained: manifest.epochs_trained,
            seed: manifest.seed,
        },
    ))
}

/// CSV with a header row; all floats in shortest round-trip form.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let header = [
        "epoch",
        "train_loss",
        "train_loss_sum",
        "train_mae",
        "val_loss",
        "val_loss_sum",
        "val_mae",
        "shifted_solves",
    ];
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|r| {
            vec![
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.train_loss_sum.to_string(),
                r.train_mae.to_string(),
                r.val_loss.to_string(),
                r.val_loss_sum.to_string(),
                r.val_mae.to_string(),
                r.shifted_solves.to_string(),
            ]
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Dataset export: one row per sample, inputs then outputs then provenance.
pub fn export_dataset_csv(path: &Path, dataset: &SensorDataset) -> Result<()> {
    let mut header: Vec<String> = Vec::new();
    for j in 0..dataset.x.cols() {
        header.push(format!("x{j}"));
    }
    for j in 0..dataset.y.cols() {
        header.push(format!("y{j}"));
    }
    header.push("provenance".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = (0..dataset.n_rows())
        .map(|i| {
            let mut row: Vec<String> = dataset.x.row(i).iter().map(|v| v.to_string()).collect();
            row.extend(dataset.y.row(i).iter().map(|v| v.to_string()));
            row.push(
                match dataset.provenance[i] {
                    RowProvenance::Fom => "fom",
                    RowProvenance::RbAugmented => "rb-augmented",
                }
                .to_string(),
            );
            row
        })
        .collect();
    write_csv(path, &header_refs, &rows)
}

/// Writes a full-order field as a blob plus a small manifest.
pub fn save_field(dir: &Path, name: &str, field: &[f64], mu: &[f64]) -> Result<()> {
    let mut store = ArrayStore::create(dir)?;
    store.write_vec(name, field)?;
    #[derive(Serialize)]
    struct FieldManifest<'a> {
        schema_version: u32,
        kind: &'a str,
        mu: &'a [f64],
        arrays: &'a BTreeMap<String, ArrayMeta>,
    }
    write_manifest(
        dir,
        &FieldManifest {
            schema_version: SCHEMA_VERSION,
            kind: "field",
            mu,
            arrays: &store.catalog,
        },
    )
}

/// Rebuilds an operator set override used when a checkpoint's scaler must be
/// honored verbatim.
pub fn operator_set_with_scaler(
    base: &AffineOperatorSet,
    scaler: CoeffScaler,
) -> Result<AffineOperatorSet> {
    AffineOperatorSet::new(
        base.matrices.clone(),
        base.vectors.clone(),
        scaler,
        Provenance::ExactAffine,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;
    use crate::pipeline::offline::run_offline;

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("rbnet-test-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn small_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::variant1();
        c.nx = 8;
        c.ny = 8;
        c.n_fom_snapshots = 3;
        c.n_samples = 6;
        c.n_test = 2;
        c.n_in = 4;
        c.n_out = 4;
        c.eps_pod = 1e-10;
        c.augment_eps_pod = 1e-10;
        c.hidden_layers = vec![6];
        c.epochs = 1;
        c.seed = 99;
        c
    }

    #[test]
    fn artifacts_round_trip() {
        let dir = tmpdir("artifacts");
        let art = run_offline(&small_config(), Exec::Serial).unwrap();
        save_artifacts(&dir, &art).unwrap();
        let back = load_artifacts(&dir).unwrap();
        assert_eq!(art.config, back.config);
        assert_eq!(art.basis.basis.data(), back.basis.basis.data());
        assert_eq!(art.dataset.x.data(), back.dataset.x.data());
        assert_eq!(art.dataset.y.data(), back.dataset.y.data());
        assert_eq!(art.sensors, back.sensors);
        assert_eq!(art.snapshot_mus, back.snapshot_mus);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn rerun_writes_byte_identical_files() {
        let dir_a = tmpdir("bytes-a");
        let dir_b = tmpdir("bytes-b");
        let config = small_config();
        save_artifacts(&dir_a, &run_offline(&config, Exec::Serial).unwrap()).unwrap();
        save_artifacts(&dir_b, &run_offline(&config, Exec::Parallel).unwrap()).unwrap();
        let mut names: Vec<String> = fs::read_dir(&dir_a)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert!(names.contains(&"manifest.json".to_string()));
        for name in names {
            let a = fs::read(dir_a.join(&name)).unwrap();
            let b = fs::read(dir_b.join(&name)).unwrap();
            assert_eq!(a, b, "file {name} differs between reruns");
        }
        fs::remove_dir_all(&dir_a).unwrap();
        fs::remove_dir_all(&dir_b).unwrap();
    }

    #[test]
    fn missing_artifact_reports_cleanly() {
        let dir = tmpdir("missing");
        let err = load_artifacts(&dir).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn checkpoint_round_trip_preserves_predictions() {
        use crate::neural::NetworkModel;
        use crate::rng::SplitMix64;
        let dir = tmpdir("checkpoint");
        let config = small_config();
        let art = run_offline(&config, Exec::Serial).unwrap();
        let ops = art.affine_set_for(3).unwrap();
        let rb = RbOutputLayer::new(ops, art.output_map(), art.latent_mode()).unwrap();
        let mut rng = SplitMix64::new(5);
        let model = NetworkModel::new_rb(config.n_in, &config.hidden_layers, rb, &mut rng).unwrap();
        save_checkpoint(&dir, &model, &config, 3, 0, config.seed).unwrap();
        let (loaded, info) = load_checkpoint(&dir, &art).unwrap();
        assert_eq!(info.q_a, 3);
        let x = DenseMatrix::from_fn(4, config.n_in, |i, j| ((i + j) as f64 * 0.13).sin());
        let (y1, l1) = model.predict(&x, Exec::Serial).unwrap();
        let (y2, l2) = loaded.predict(&x, Exec::Serial).unwrap();
        assert_eq!(y1.data(), y2.data());
        assert_eq!(l1.data(), l2.data());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn history_and_dataset_csv_have_headers() {
        let dir = tmpdir("csv");
        let hist = vec![EpochRecord {
            epoch: 0,
            train_loss: 0.5,
            train_loss_sum: 5.0,
            train_mae: 0.2,
            val_loss: 0.6,
            val_loss_sum: 1.2,
            val_mae: 0.25,
            shifted_solves: 0,
        }];
        let path = dir.join("history.csv");
        write_history_csv(&path, &hist).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("epoch,train_loss"));
        assert_eq!(text.lines().count(), 2);
        fs::remove_dir_all(&dir).unwrap();
    }
}
