//! Snapshot generation and the sensor dataset with reduced-solver
//! augmentation.

use crate::error::{Error, Result};
use crate::exec::{map_collect, Exec};
use crate::fem::{fom_solve, Discretization, Problem};
use crate::numerics::DenseMatrix;
use crate::rng::SplitMix64;
use crate::rom::{rb_assemble, rb_solve, AffineOperatorSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowProvenance {
    Fom,
    RbAugmented,
}

/// Training data at the sensors; the parameters are stored as hidden labels
/// for the comparison baselines and evaluation only.
#[derive(Debug, Clone)]
pub struct SensorDataset {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    pub mu: DenseMatrix,
    pub provenance: Vec<RowProvenance>,
}

impl SensorDataset {
    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }
}

/// Solves the full-order problem at every parameter draw; column i of the
/// result is the solution at mus[i]. Solves run in parallel.
pub fn generate_snapshots(
    problem: &Problem,
    disc: &Discretization,
    mus: &[Vec<f64>],
    tol: f64,
    exec: Exec,
) -> Result<DenseMatrix> {
    if mus.is_empty() {
        return Err(Error::InvalidArgument {
            op: "generate_snapshots",
            detail: "no parameters".into(),
        });
    }
    let n_h = disc.mesh.n_nodes();
    let solutions: Vec<Result<Vec<f64>>> = map_collect(exec, mus.len(), |i| {
        fom_solve(
            problem,
            &disc.mesh,
            &disc.pattern,
            &mus[i],
            tol,
            Exec::Serial,
        )
        .map_err(|e| attach_mu(e, &mus[i]))
    });
    let mut snaps = DenseMatrix::zeros(n_h, mus.len());
    for (j, sol) in solutions.into_iter().enumerate() {
        snaps.col_mut(j).copy_from_slice(&sol?);
    }
    Ok(snaps)
}

fn attach_mu(e: Error, mu: &[f64]) -> Error {
    Error::Pipeline(format!("full-order solve at mu = {mu:?} failed: {e}"))
}

/// Sensor rows extracted from full-order solution columns.
pub fn rows_from_snapshots(
    snapshots: &DenseMatrix,
    input_nodes: &[usize],
    output_nodes: &[usize],
) -> (DenseMatrix, DenseMatrix) {
    let n_rows = snapshots.cols();
    let mut x = DenseMatrix::zeros(n_rows, input_nodes.len());
    let mut y = DenseMatrix::zeros(n_rows, output_nodes.len());
    for i in 0..n_rows {
        let col = snapshots.col(i);
        for (j, &node) in input_nodes.iter().enumerate() {
            x.set(i, j, col[node]);
        }
        for (j, &node) in output_nodes.iter().enumerate() {
            y.set(i, j, col[node]);
        }
    }
    (x, y)
}

/// Result of augmentation: sensor rows for each parameter that produced a
/// solvable reduced system, plus the count of skipped draws.
pub struct AugmentedRows {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    pub mu: Vec<Vec<f64>>,
    pub skipped: usize,
}

/// Generates dataset rows from reduced solves at fresh parameters.
///
/// `theta_of_mu` supplies the affine coefficients for each draw (exact
/// functions in the affine case, interpolation probes in the nonaffine one).
/// `input_map` and `output_map` are the basis rows at the sensors.
pub fn augment_dataset_with_rb<F>(
    ops: &AffineOperatorSet,
    input_map: &DenseMatrix,
    output_map: &DenseMatrix,
    extra_mus: &[Vec<f64>],
    theta_of_mu: F,
    exec: Exec,
) -> Result<AugmentedRows>
where
    F: Fn(&[f64]) -> Result<(Vec<f64>, Vec<f64>)> + Sync + Send,
{
    let results: Vec<Option<(Vec<f64>, Vec<f64>)>> = map_collect(exec, extra_mus.len(), |i| {
        let mu = &extra_mus[i];
        let (theta_a, theta_f) = match theta_of_mu(mu) {
            Ok(t) => t,
            Err(_) => return None,
        };
        let (a_n, f_n) = match rb_assemble(&theta_a, &theta_f, ops) {
            Ok(v) => v,
            Err(_) => return None,
        };
        let u_n = match rb_solve(&a_n, &f_n) {
            Ok(u) => u,
            Err(_) => return None,
        };
        let xi = input_map.matvec(&u_n).ok()?;
        let yi = output_map.matvec(&u_n).ok()?;
        Some((xi, yi))
    });
    let kept: Vec<(usize, (Vec<f64>, Vec<f64>))> = results
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|v| (i, v)))
        .collect();
    let skipped = extra_mus.len() - kept.len();
    let mut x = DenseMatrix::zeros(kept.len(), input_map.rows());
    let mut y = DenseMatrix::zeros(kept.len(), output_map.rows());
    let mut mu = Vec::with_capacity(kept.len());
    for (row, (orig_idx, (xi, yi))) in kept.into_iter().enumerate() {
        x.set_row(row, &xi);
        y.set_row(row, &yi);
        mu.push(extra_mus[orig_idx].clone());
    }
    Ok(AugmentedRows { x, y, mu, skipped })
}

/// Stacks FOM rows and augmented rows into the final dataset.
pub fn assemble_dataset(
    fom_x: DenseMatrix,
    fom_y: DenseMatrix,
    fom_mu: &[Vec<f64>],
    augmented: Option<AugmentedRows>,
) -> Result<SensorDataset> {
    let p = fom_mu.first().map(|m| m.len()).unwrap_or(0);
    let n_fom = fom_x.rows();
    let (n_aug, aug) = match &augmented {
        Some(a) => (a.x.rows(), Some(a)),
        None => (0, None),
    };
    let n_total = n_fom + n_aug;
    let mut x = DenseMatrix::zeros(n_total, fom_x.cols());
    let mut y = DenseMatrix::zeros(n_total, fom_y.cols());
    let mut mu = DenseMatrix::zeros(n_total, p);
    let mut provenance = Vec::with_capacity(n_total);
    for i in 0..n_fom {
        x.set_row(i, &fom_x.row(i));
        y.set_row(i, &fom_y.row(i));
        mu.set_row(i, &fom_mu[i]);
        provenance.push(RowProvenance::Fom);
    }
    if let Some(a) = aug {
        for i in 0..n_aug {
            x.set_row(n_fom + i, &a.x.row(i));
            y.set_row(n_fom + i, &a.y.row(i));
            mu.set_row(n_fom + i, &a.mu[i]);
            provenance.push(RowProvenance::RbAugmented);
        }
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::NonFinite {
            op: "assemble_dataset",
            detail: "dataset rows".into(),
        });
    }
    Ok(SensorDataset {
        x,
        y,
        mu,
        provenance,
    })
}

/// Seeded 80/20 split; returns (train indices, validation indices).
pub fn split_train_val(
    n: usize,
    val_fraction: f64,
    rng: &mut SplitMix64,
) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    let n_val = ((n as f64) * val_fraction).round() as usize;
    let val = idx.split_off(n - n_val.min(n));
    (idx, val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::discretize;
    use crate::rom::{CoeffScaler, Provenance};

    #[test]
    fn single_parameter_single_column() {
        let p = Problem::affine_advection_diffusion();
        let d = discretize(6, 6).unwrap();
        let mus = vec![vec![2.0, 0.2]];
        let snaps = generate_snapshots(&p, &d, &mus, 1e-10, Exec::Serial).unwrap();
        assert_eq!(snaps.cols(), 1);
        let direct = fom_solve(&p, &d.mesh, &d.pattern, &mus[0], 1e-10, Exec::Serial).unwrap();
        assert_eq!(snaps.col(0), direct.as_slice());
    }

    #[test]
    fn parallel_and_serial_snapshots_are_identical() {
        let p = Problem::nonaffine_diffusion();
        let d = discretize(8, 8).unwrap();
        let mut rng = SplitMix64::new(10);
        let mus = sample(&p, 6, &mut rng);
        let serial = generate_snapshots(&p, &d, &mus, 1e-10, Exec::Serial).unwrap();
        let parallel = generate_snapshots(&p, &d, &mus, 1e-10, Exec::Parallel).unwrap();
        assert_eq!(serial.data(), parallel.data());
    }

    fn sample(p: &Problem, n: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
        crate::pipeline::sampling::sample_parameters(&p.param_box, n, rng)
    }

    #[test]
    fn snapshot_residual_audit() {
        let p = Problem::nonaffine_diffusion();
        let d = discretize(10, 10).unwrap();
        let mut rng = SplitMix64::new(11);
        let mus = sample(&p, 5, &mut rng);
        let snaps = generate_snapshots(&p, &d, &mus, 1e-10, Exec::Serial).unwrap();
        for (j, mu) in mus.iter().enumerate() {
            let sys = crate::fem::fom_system_lifting(&p, &d.mesh, &d.pattern, mu).unwrap();
            let res = sys.relative_residual(snaps.col(j)).unwrap();
            assert!(res <= 1e-10, "column {j}: residual {res}");
        }
    }

    #[test]
    fn empty_augmentation_adds_nothing() {
        let ops = tiny_ops();
        let im = DenseMatrix::identity(2);
        let om = DenseMatrix::identity(2);
        let rows =
            augment_dataset_with_rb(&ops, &im, &om, &[], |_| unreachable!(), Exec::Serial).unwrap();
        assert_eq!(rows.x.rows(), 0);
        assert_eq!(rows.skipped, 0);
    }

    fn tiny_ops() -> AffineOperatorSet {
        AffineOperatorSet::new(
            vec![DenseMatrix::identity(2)],
            vec![vec![1.0, 1.0]],
            CoeffScaler::from_bounds(&[(0.5, 1.5), (0.5, 1.5)]).unwrap(),
            Provenance::ExactAffine,
        )
        .unwrap()
    }

    #[test]
    fn failed_reduced_solves_are_skipped_and_counted() {
        let ops = AffineOperatorSet::new(
            vec![DenseMatrix::zeros(2, 2)], // singular for every theta
            vec![vec![1.0, 1.0]],
            CoeffScaler::from_bounds(&[(0.5, 1.5), (0.5, 1.5)]).unwrap(),
            Provenance::ExactAffine,
        )
        .unwrap();
        let im = DenseMatrix::identity(2);
        let rows = augment_dataset_with_rb(
            &ops,
            &im,
            &im,
            &[vec![0.1], vec![0.2]],
            |_| Ok((vec![1.0], vec![1.0])),
            Exec::Serial,
        )
        .unwrap();
        assert_eq!(rows.skipped, 2);
        assert_eq!(rows.x.rows(), 0);
    }

    #[test]
    fn dataset_counts_and_provenance() {
        let fx = DenseMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let fy = DenseMatrix::from_fn(3, 1, |i, _| i as f64);
        let fmu = vec![vec![0.1], vec![0.2], vec![0.3]];
        let aug = AugmentedRows {
            x: DenseMatrix::from_fn(2, 2, |_, _| 9.0),
            y: DenseMatrix::from_fn(2, 1, |_, _| 9.0),
            mu: vec![vec![0.4], vec![0.5]],
            skipped: 1,
        };
        let ds = assemble_dataset(fx, fy, &fmu, Some(aug)).unwrap();
        assert_eq!(ds.n_rows(), 5);
        assert_eq!(ds.provenance[..3], [RowProvenance::Fom; 3]);
        assert_eq!(ds.provenance[3..], [RowProvenance::RbAugmented; 2]);
        assert_eq!(ds.mu.get(4, 0), 0.5);
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let mut rng = SplitMix64::new(12);
        let (train, val) = split_train_val(100, 0.2, &mut rng);
        assert_eq!(train.len(), 80);
        assert_eq!(val.len(), 20);
        let mut all: Vec<usize> = train.iter().chain(val.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}
