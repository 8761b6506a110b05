//! Training drivers for the reduced-head network and the plain-MLP baselines.

use crate::error::Result;
use crate::exec::Exec;
use crate::neural::{train, EpochRecord, NetworkModel, RbOutputLayer, TrainOptions};
use crate::numerics::DenseMatrix;
use crate::rng::{derive_seed, SplitMix64};
use crate::rom::CoeffScaler;

use super::config::stream_tags;
use super::dataset::split_train_val;
use super::offline::OfflineArtifacts;

#[derive(Debug, Clone, Default)]
pub struct TrainRunOptions {
    pub q_a: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
}

pub struct TrainedRun {
    pub model: NetworkModel,
    pub history: Vec<EpochRecord>,
    pub q_a: usize,
    pub seed: u64,
    pub epochs: usize,
}

fn split_dataset(
    artifacts: &OfflineArtifacts,
    seed: u64,
) -> (
    DenseMatrix,
    DenseMatrix,
    DenseMatrix,
    DenseMatrix,
    Vec<usize>,
    Vec<usize>,
) {
    let n = artifacts.dataset.n_rows();
    let (train_idx, val_idx) =
        split_train_val(n, 0.2, &mut SplitMix64::substream(seed, stream_tags::SPLIT));
    let x_train = artifacts.dataset.x.select_rows(&train_idx);
    let y_train = artifacts.dataset.y.select_rows(&train_idx);
    let x_val = artifacts.dataset.x.select_rows(&val_idx);
    let y_val = artifacts.dataset.y.select_rows(&val_idx);
    (x_train, y_train, x_val, y_val, train_idx, val_idx)
}

/// Trains the reduced-head network on the offline dataset (80/20 split).
pub fn run_train(
    artifacts: &OfflineArtifacts,
    opts: &TrainRunOptions,
    exec: Exec,
) -> Result<TrainedRun> {
    let config = &artifacts.config;
    let seed = opts.seed.unwrap_or(config.seed);
    let epochs = opts.epochs.unwrap_or(config.epochs);
    let q_a = opts.q_a.unwrap_or(config.q_a);
    let ops = artifacts.affine_set_for(q_a)?;
    let rb = RbOutputLayer::new(ops, artifacts.output_map(), artifacts.latent_mode())?;
    let mut init_rng = SplitMix64::substream(seed, stream_tags::INIT);
    let mut model = NetworkModel::new_rb(config.n_in, &config.hidden_layers, rb, &mut init_rng)?;
    let (x_train, y_train, x_val, y_val, _, _) = split_dataset(artifacts, seed);
    let train_opts = TrainOptions {
        epochs,
        batch_size: config.batch_size,
        learning_rate: config.learning_rate,
        seed: derive_seed(seed, stream_tags::SHUFFLE),
        shift_abort_fraction: 0.01,
    };
    let history = train(
        &mut model,
        &x_train,
        &y_train,
        &x_val,
        &y_val,
        &train_opts,
        exec,
    )?;
    Ok(TrainedRun {
        model,
        history,
        q_a,
        seed,
        epochs,
    })
}

/// The three comparison networks: same hidden stack, sigmoid head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Predicts the (normalized) parameters only.
    Mu,
    /// Predicts the sensor outputs only.
    Out,
    /// Predicts outputs and parameters jointly.
    Both,
}

impl BaselineKind {
    pub fn tag(&self) -> &'static str {
        match self {
            BaselineKind::Mu => "mlp-mu",
            BaselineKind::Out => "mlp-out",
            BaselineKind::Both => "mlp",
        }
    }
}

pub struct BaselineRun {
    pub kind: BaselineKind,
    pub model: NetworkModel,
    pub history: Vec<EpochRecord>,
    /// Range map of the output block of the targets (None for Mu).
    pub y_scaler: Option<CoeffScaler>,
    /// Range map of the parameter block (None for Out).
    pub mu_scaler: Option<CoeffScaler>,
    pub seed: u64,
}

/// Builds the [0,1]-scaled target matrix for a baseline. Output ranges are
/// fitted over the whole training dataset (train and validation rows), never
/// the test set.
fn baseline_targets(
    artifacts: &OfflineArtifacts,
    kind: BaselineKind,
) -> Result<(DenseMatrix, Option<CoeffScaler>, Option<CoeffScaler>)> {
    let ds = &artifacts.dataset;
    let n = ds.n_rows();
    let mu_scaler = CoeffScaler::from_bounds(&artifacts.problem.param_box)?;
    let y_rows: Vec<Vec<f64>> = (0..n).map(|i| ds.y.row(i)).collect();
    let y_scaler = CoeffScaler::from_samples(&y_rows)?;
    let width = match kind {
        BaselineKind::Mu => artifacts.problem.dim(),
        BaselineKind::Out => ds.y.cols(),
        BaselineKind::Both => ds.y.cols() + artifacts.problem.dim(),
    };
    let mut t = DenseMatrix::zeros(n, width);
    for i in 0..n {
        let row = match kind {
            BaselineKind::Mu => mu_scaler.invert(&ds.mu.row(i)),
            BaselineKind::Out => y_scaler.invert(&ds.y.row(i)),
            BaselineKind::Both => {
                let mut r = y_scaler.invert(&ds.y.row(i));
                r.extend(mu_scaler.invert(&ds.mu.row(i)));
                r
            }
        };
        t.set_row(i, &row);
    }
    let (ys, ms) = match kind {
        BaselineKind::Mu => (None, Some(mu_scaler)),
        BaselineKind::Out => (Some(y_scaler), None),
        BaselineKind::Both => (Some(y_scaler), Some(mu_scaler)),
    };
    Ok((t, ys, ms))
}

pub fn run_mlp_baseline(
    artifacts: &OfflineArtifacts,
    kind: BaselineKind,
    opts: &TrainRunOptions,
    exec: Exec,
) -> Result<BaselineRun> {
    let config = &artifacts.config;
    let seed = opts.seed.unwrap_or(config.seed);
    let epochs = opts.epochs.unwrap_or(config.epochs);
    let n = artifacts.dataset.n_rows();
    let (train_idx, val_idx) =
        split_train_val(n, 0.2, &mut SplitMix64::substream(seed, stream_tags::SPLIT));
    let (targets, y_scaler, mu_scaler) = baseline_targets(artifacts, kind)?;
    let head_size = targets.cols();
    let mut init_rng = SplitMix64::substream(seed, stream_tags::INIT);
    let mut model = NetworkModel::new_sigmoid_head(
        config.n_in,
        &config.hidden_layers,
        head_size,
        &mut init_rng,
    )?;
    let x_train = artifacts.dataset.x.select_rows(&train_idx);
    let t_train = targets.select_rows(&train_idx);
    let x_val = artifacts.dataset.x.select_rows(&val_idx);
    let t_val = targets.select_rows(&val_idx);
    let train_opts = TrainOptions {
        epochs,
        batch_size: config.batch_size,
        learning_rate: config.learning_rate,
        seed: derive_seed(seed, stream_tags::SHUFFLE),
        shift_abort_fraction: 1.0,
    };
    let history = train(
        &mut model,
        &x_train,
        &t_train,
        &x_val,
        &t_val,
        &train_opts,
        exec,
    )?;
    Ok(BaselineRun {
        kind,
        model,
        history,
        y_scaler,
        mu_scaler,
        seed,
    })
}

impl BaselineRun {
    /// Splits a raw prediction row into (sensor outputs, parameters), both in
    /// physical units.
    pub fn unscale(&self, prediction: &[f64]) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        match self.kind {
            BaselineKind::Mu => (
                None,
                Some(self.mu_scaler.as_ref().unwrap().apply(prediction)),
            ),
            BaselineKind::Out => (
                Some(self.y_scaler.as_ref().unwrap().apply(prediction)),
                None,
            ),
            BaselineKind::Both => {
                let ys = self.y_scaler.as_ref().unwrap();
                let ms = self.mu_scaler.as_ref().unwrap();
                let n_y = ys.len();
                (
                    Some(ys.apply(&prediction[..n_y])),
                    Some(ms.apply(&prediction[n_y..])),
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadWidthError {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::ExperimentConfig;
    use crate::pipeline::offline::run_offline;

    fn small_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::variant1();
        c.nx = 8;
        c.ny = 8;
        c.n_fom_snapshots = 4;
        c.n_samples = 10;
        c.n_test = 3;
        c.n_in = 5;
        c.n_out = 6;
        c.eps_pod = 1e-8;
        c.augment_eps_pod = 1e-10;
        c.hidden_layers = vec![8];
        c.epochs = 3;
        c.batch_size = 4;
        c.seed = 1234;
        c
    }

    #[test]
    fn run_train_produces_history_and_uses_overrides() {
        let art = run_offline(&small_config(), Exec::Serial).unwrap();
        let run = run_train(
            &art,
            &TrainRunOptions {
                epochs: Some(2),
                seed: Some(9),
                q_a: None,
            },
            Exec::Serial,
        )
        .unwrap();
        assert_eq!(run.history.len(), 2);
        assert_eq!(run.seed, 9);
        assert_eq!(run.q_a, 3);
        assert_eq!(run.model.n_out(), 6);
        assert_eq!(run.model.latent_dim(), 2); // physical parameters
    }

    #[test]
    fn zero_epochs_checkpoint_equals_initialization() {
        let art = run_offline(&small_config(), Exec::Serial).unwrap();
        let a = run_train(
            &art,
            &TrainRunOptions {
                epochs: Some(0),
                ..Default::default()
            },
            Exec::Serial,
        )
        .unwrap();
        let b = run_train(
            &art,
            &TrainRunOptions {
                epochs: Some(0),
                ..Default::default()
            },
            Exec::Serial,
        )
        .unwrap();
        assert!(a.history.is_empty());
        assert_eq!(
            a.model.output_affine.weights.data(),
            b.model.output_affine.weights.data()
        );
    }

    #[test]
    fn baseline_head_widths() {
        let art = run_offline(&small_config(), Exec::Serial).unwrap();
        let opts = TrainRunOptions {
            epochs: Some(1),
            ..Default::default()
        };
        let mu = run_mlp_baseline(&art, BaselineKind::Mu, &opts, Exec::Serial).unwrap();
        let out = run_mlp_baseline(&art, BaselineKind::Out, &opts, Exec::Serial).unwrap();
        let both = run_mlp_baseline(&art, BaselineKind::Both, &opts, Exec::Serial).unwrap();
        assert_eq!(mu.model.n_out(), 2);
        assert_eq!(out.model.n_out(), 6);
        assert_eq!(both.model.n_out(), 8);
    }

    #[test]
    fn baseline_targets_live_in_unit_interval() {
        let art = run_offline(&small_config(), Exec::Serial).unwrap();
        for kind in [BaselineKind::Mu, BaselineKind::Out, BaselineKind::Both] {
            let (t, _, _) = baseline_targets(&art, kind).unwrap();
            for v in t.data() {
                assert!(
                    (-1e-9..=1.0 + 1e-9).contains(v),
                    "target {v} outside [0,1] for {kind:?}"
                );
            }
        }
    }

    #[test]
    fn baseline_memorizes_ten_samples() {
        // overfit sanity: a sigmoid-head baseline drives its training loss
        // down on a ten-row dataset
        let mut c = small_config();
        c.n_fom_snapshots = 8;
        c.n_samples = 10;
        c.hidden_layers = vec![16];
        c.learning_rate = 2e-2;
        c.batch_size = 0;
        let art = run_offline(&c, Exec::Serial).unwrap();
        let run = run_mlp_baseline(
            &art,
            BaselineKind::Out,
            &TrainRunOptions {
                epochs: Some(8000),
                seed: Some(5),
                ..Default::default()
            },
            Exec::Serial,
        )
        .unwrap();
        let first = run.history.first().unwrap().train_loss;
        let last = run.history.last().unwrap().train_loss;
        assert!(
            last < 1e-3 && last < first * 2e-3,
            "memorization failed: {first:.3e} -> {last:.3e}"
        );
    }

    #[test]
    fn baseline_unscale_round_trip() {
        let art = run_offline(&small_config(), Exec::Serial).unwrap();
        let opts = TrainRunOptions {
            epochs: Some(1),
            ..Default::default()
        };
        let run = run_mlp_baseline(&art, BaselineKind::Both, &opts, Exec::Serial).unwrap();
        let y_row = art.dataset.y.row(0);
        let mu_row = art.dataset.mu.row(0);
        let mut scaled = run.y_scaler.as_ref().unwrap().invert(&y_row);
        scaled.extend(run.mu_scaler.as_ref().unwrap().invert(&mu_row));
        let (y_back, mu_back) = run.unscale(&scaled);
        for (a, b) in y_back.unwrap().iter().zip(y_row.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in mu_back.unwrap().iter().zip(mu_row.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
