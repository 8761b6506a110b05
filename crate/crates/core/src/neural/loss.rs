//! Mean squared error and the metrics tracked per epoch.

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Batch-mean squared error: loss = (1/N_b) sum_ij (Y - Yhat)^2, gradient
/// dL/dYhat = (2/N_b)(Yhat - Y). The raw-sum convention is loss * N_b.
pub fn mse_loss(y_true: &DenseMatrix, y_pred: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    if y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols() {
        return Err(Error::Dimension {
            op: "mse_loss",
            detail: format!(
                "{}x{} vs {}x{}",
                y_true.rows(),
                y_true.cols(),
                y_pred.rows(),
                y_pred.cols()
            ),
        });
    }
    let n_b = y_true.rows() as f64;
    let mut grad = DenseMatrix::zeros(y_pred.rows(), y_pred.cols());
    let mut loss = 0.0;
    for ((g, p), t) in grad
        .data_mut()
        .iter_mut()
        .zip(y_pred.data().iter())
        .zip(y_true.data().iter())
    {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / n_b;
    }
    Ok((loss / n_b, grad))
}

/// Mean absolute error over all entries.
pub fn mean_absolute_error(y_true: &DenseMatrix, y_pred: &DenseMatrix) -> Result<f64> {
    if y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols() {
        return Err(Error::Dimension {
            op: "mean_absolute_error",
            detail: "shape mismatch".into(),
        });
    }
    let n = (y_true.rows() * y_true.cols()) as f64;
    let sum: f64 = y_pred
        .data()
        .iter()
        .zip(y_true.data().iter())
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(sum / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn identical_predictions_give_zero() {
        let y = DenseMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let (loss, grad) = mse_loss(&y, &y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_sample_difference_two() {
        let t = DenseMatrix::from_fn(1, 1, |_, _| 1.0);
        let p = DenseMatrix::from_fn(1, 1, |_, _| 3.0);
        let (loss, grad) = mse_loss(&t, &p).unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(grad.get(0, 0), 4.0);
    }

    #[test]
    fn random_batch_matches_double_loop_oracle() {
        let mut rng = SplitMix64::new(51);
        let t = DenseMatrix::from_fn(7, 4, |_, _| rng.uniform(-2.0, 2.0));
        let p = DenseMatrix::from_fn(7, 4, |_, _| rng.uniform(-2.0, 2.0));
        let (loss, grad) = mse_loss(&t, &p).unwrap();
        let mut want = 0.0;
        for i in 0..7 {
            for j in 0..4 {
                let d = p.get(i, j) - t.get(i, j);
                want += d * d;
                assert!((grad.get(i, j) - 2.0 * d / 7.0).abs() < 1e-13);
            }
        }
        want /= 7.0;
        assert!((loss - want).abs() < 1e-13);
        // raw-sum convention recoverable by multiplying with the batch size
        assert!((loss * 7.0 - want * 7.0).abs() < 1e-13);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = DenseMatrix::zeros(2, 2);
        let b = DenseMatrix::zeros(3, 2);
        assert!(mse_loss(&a, &b).is_err());
        assert!(mean_absolute_error(&a, &b).is_err());
    }

    #[test]
    fn mae_simple_value() {
        let t = DenseMatrix::from_fn(2, 2, |_, _| 0.0);
        let p = DenseMatrix::from_fn(2, 2, |i, j| if i == 0 && j == 0 { 2.0 } else { 0.0 });
        assert!((mean_absolute_error(&t, &p).unwrap() - 0.5).abs() < 1e-15);
    }
}
