//! Minibatch training loop with per-epoch train/validation tracking.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::DenseMatrix;
use crate::rng::SplitMix64;

use super::adam::AdamState;
use super::loss::{mean_absolute_error, mse_loss};
use super::model::NetworkModel;

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    /// 0 means full batch.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Abort when more than this fraction of reduced solves in one epoch
    /// needed the Tikhonov recovery.
    pub shift_abort_fraction: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 500,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            shift_abort_fraction: 0.01,
        }
    }
}

/// One row of the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Batch-mean squared error averaged over the epoch's samples.
    pub train_loss: f64,
    /// Raw-sum convention of the same quantity (mean times sample count).
    pub train_loss_sum: f64,
    pub train_mae: f64,
    pub val_loss: f64,
    pub val_loss_sum: f64,
    pub val_mae: f64,
    pub shifted_solves: usize,
}

pub fn gather_rows(m: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    m.select_rows(rows)
}

/// Trains in place; the dataset split is the caller's responsibility.
pub fn train(
    model: &mut NetworkModel,
    x_train: &DenseMatrix,
    y_train: &DenseMatrix,
    x_val: &DenseMatrix,
    y_val: &DenseMatrix,
    opts: &TrainOptions,
    exec: Exec,
) -> Result<Vec<EpochRecord>> {
    let n_train = x_train.rows();
    if n_train == 0 {
        return Err(Error::InvalidArgument {
            op: "train",
            detail: "empty training set".into(),
        });
    }
    if y_train.rows() != n_train || x_val.rows() != y_val.rows() {
        return Err(Error::Dimension {
            op: "train",
            detail: "input/target row counts differ".into(),
        });
    }
    let mut history = Vec::with_capacity(opts.epochs);
    if opts.epochs == 0 {
        return Ok(history);
    }
    let batch = if opts.batch_size == 0 {
        n_train
    } else {
        opts.batch_size.min(n_train)
    };
    let mut rng = SplitMix64::new(opts.seed);
    let mut adam = AdamState::new(opts.learning_rate);
    let mut order: Vec<usize> = (0..n_train).collect();

    for epoch in 0..opts.epochs {
        rng.shuffle(&mut order);
        let mut loss_acc = 0.0;
        let mut mae_acc = 0.0;
        let mut shifted = 0usize;
        let mut solves = 0usize;
        for chunk in order.chunks(batch) {
            let xb = gather_rows(x_train, chunk);
            let yb = gather_rows(y_train, chunk);
            let pass = model.forward(&xb, exec)?;
            shifted += pass.shifted_solves;
            solves += chunk.len();
            let (loss, d_y) = mse_loss(&yb, &pass.y)?;
            mae_acc += mean_absolute_error(&yb, &pass.y)? * chunk.len() as f64;
            loss_acc += loss * chunk.len() as f64;
            let grads = model.backward(&pass, &d_y, exec)?;
            let flat = grads.flat();
            let owned: Vec<Vec<f64>> = flat.iter().map(|g| g.to_vec()).collect();
            let grad_refs: Vec<&[f64]> = owned.iter().map(|g| g.as_slice()).collect();
            let mut groups = model.param_groups_mut();
            adam.step(&mut groups, &grad_refs)?;
        }
        if solves > 0 && (shifted as f64) / (solves as f64) > opts.shift_abort_fraction {
            return Err(Error::Training(format!(
                "epoch {epoch}: {shifted} of {solves} reduced solves needed regularization"
            )));
        }
        let train_loss = loss_acc / n_train as f64;
        let train_mae = mae_acc / n_train as f64;
        let (val_loss, val_mae) = if x_val.rows() > 0 {
            let (y_hat, _) = model.predict(x_val, exec)?;
            let (l, _) = mse_loss(y_val, &y_hat)?;
            (l, mean_absolute_error(y_val, &y_hat)?)
        } else {
            (f64::NAN, f64::NAN)
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            train_loss_sum: train_loss * n_train as f64,
            train_mae,
            val_loss,
            val_loss_sum: val_loss * x_val.rows() as f64,
            val_mae,
            shifted_solves: shifted,
        });
    }
    Ok(history)
}
