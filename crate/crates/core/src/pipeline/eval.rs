//! Test-set construction and the evaluation harness, including the
//! standalone reduced-basis comparator.

use crate::error::{Error, Result};
use crate::exec::{map_collect, Exec};
use crate::fem::{h1_error, Variant};
use crate::neural::NetworkModel;
use crate::numerics::{lu_factor, norm2, sub, DenseMatrix};
use crate::rng::SplitMix64;
use crate::rom::{rb_assemble, reconstruct};

use super::config::stream_tags;
use super::dataset::{generate_snapshots, rows_from_snapshots};
use super::offline::OfflineArtifacts;
use super::sampling::sample_parameters;
use super::train_driver::{BaselineKind, BaselineRun};

#[derive(Debug, Clone)]
pub struct TestSet {
    pub mus: Vec<Vec<f64>>,
    /// Full-order test solutions, one column per parameter.
    pub full: DenseMatrix,
    pub x: DenseMatrix,
    pub y: DenseMatrix,
}

/// Draws test parameters disjoint from every training parameter and solves
/// the full-order model at each.
pub fn build_test_set(artifacts: &OfflineArtifacts, exec: Exec) -> Result<TestSet> {
    let config = &artifacts.config;
    if config.n_test == 0 {
        return Err(Error::InvalidArgument {
            op: "build_test_set",
            detail: "empty test set".into(),
        });
    }
    let mut rng = SplitMix64::substream(config.seed, stream_tags::TEST);
    let mut training: Vec<Vec<f64>> = artifacts.snapshot_mus.clone();
    for i in 0..artifacts.dataset.mu.rows() {
        training.push(artifacts.dataset.mu.row(i));
    }
    let mut mus = Vec::with_capacity(config.n_test);
    while mus.len() < config.n_test {
        let draw = sample_parameters(&artifacts.problem.param_box, 1, &mut rng)
            .pop()
            .expect("one draw");
        if !training.iter().any(|m| m == &draw) && !mus.contains(&draw) {
            mus.push(draw);
        }
    }
    let full = generate_snapshots(
        &artifacts.problem,
        &artifacts.disc,
        &mus,
        config.solver_tol,
        exec,
    )?;
    let (x, y) = rows_from_snapshots(
        &full,
        &artifacts.sensors.input_nodes,
        &artifacts.sensors.output_nodes,
    );
    Ok(TestSet { mus, full, x, y })
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-sample normalized sensor errors ||y - yhat|| / ||y||.
pub fn sensor_errors(y_true: &DenseMatrix, y_pred: &DenseMatrix) -> Result<Vec<f64>> {
    if y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols() {
        return Err(Error::Dimension {
            op: "sensor_errors",
            detail: "prediction shape mismatch".into(),
        });
    }
    Ok((0..y_true.rows())
        .map(|i| {
            let t = y_true.row(i);
            let p = y_pred.row(i);
            norm2(&sub(&p, &t)) / norm2(&t).max(1e-300)
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub n_test: usize,
    pub output_error_mean: f64,
    pub output_error_median: f64,
    /// Per-parameter errors normalized over the parameter ranges.
    pub param_error_mean: Option<Vec<f64>>,
    pub param_error_median: Option<Vec<f64>>,
    /// Full-domain H1 statistics (autoencoder studies).
    pub h1_mean: Option<f64>,
    pub h1_median: Option<f64>,
    /// H1 statistics of the pure reduced-basis solve at the exact
    /// coefficients, as the comparator.
    pub rb_h1_mean: Option<f64>,
    pub rb_h1_median: Option<f64>,
}

impl EvaluationReport {
    pub fn csv_rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let header = vec!["metric", "value"];
        let mut rows = vec![
            vec!["n_test".to_string(), self.n_test.to_string()],
            vec![
                "output_error_mean".to_string(),
                self.output_error_mean.to_string(),
            ],
            vec![
                "output_error_median".to_string(),
                self.output_error_median.to_string(),
            ],
        ];
        if let (Some(means), Some(medians)) = (&self.param_error_mean, &self.param_error_median) {
            for (k, (m, md)) in means.iter().zip(medians.iter()).enumerate() {
                rows.push(vec![format!("param{k}_error_mean"), m.to_string()]);
                rows.push(vec![format!("param{k}_error_median"), md.to_string()]);
            }
        }
        for (name, v) in [
            ("h1_mean", self.h1_mean),
            ("h1_median", self.h1_median),
            ("rb_h1_mean", self.rb_h1_mean),
            ("rb_h1_median", self.rb_h1_median),
        ] {
            if let Some(v) = v {
                rows.push(vec![name.to_string(), v.to_string()]);
            }
        }
        (header, rows)
    }
}

/// Exact-coefficient reduced solve reconstructed on the full mesh (affine
/// variant; the comparator for the autoencoder study).
pub fn rb_exact_full_solution(artifacts: &OfflineArtifacts, mu: &[f64]) -> Result<Vec<f64>> {
    let ops = artifacts.affine_set_for(artifacts.config.q_a)?;
    let (theta_a, theta_f) = artifacts.theta_for_mu(mu, artifacts.config.q_a)?;
    let (a_n, f_n) = rb_assemble(&theta_a, &theta_f, &ops)?;
    let u_n = solve_with_shift(&a_n, &f_n)?;
    let mut full = reconstruct(&artifacts.basis.basis, &u_n)?;
    let lift = artifacts.problem.lifting(&artifacts.disc.mesh);
    for (f, l) in full.iter_mut().zip(lift.iter()) {
        *f += l;
    }
    Ok(full)
}

fn solve_with_shift(a_n: &DenseMatrix, f_n: &[f64]) -> Result<Vec<f64>> {
    match lu_factor(a_n) {
        Ok(f) => f.solve(f_n),
        Err(Error::SingularMatrix { .. }) => {
            let n = a_n.rows();
            let trace: f64 = (0..n).map(|i| a_n.get(i, i)).sum();
            let shift = 1e-10 * (trace.abs() / n as f64).max(1.0);
            let mut shifted = a_n.clone();
            for i in 0..n {
                shifted.set(i, i, shifted.get(i, i) + shift);
            }
            lu_factor(&shifted)?.solve(f_n)
        }
        Err(e) => Err(e),
    }
}

/// Evaluates a trained reduced-head network on the test set.
pub fn run_eval(
    artifacts: &OfflineArtifacts,
    model: &NetworkModel,
    test: &TestSet,
    exec: Exec,
) -> Result<EvaluationReport> {
    if test.mus.is_empty() {
        return Err(Error::InvalidArgument {
            op: "run_eval",
            detail: "empty test set".into(),
        });
    }
    let pass = model.forward(&test.x, exec)?;
    let errors = sensor_errors(&test.y, &pass.y)?;

    // latent parameter readout, normalized over the parameter ranges
    let (param_error_mean, param_error_median) = if artifacts.problem.variant
        == Variant::AffineAdvectionDiffusion
        && pass.latents.cols() == artifacts.problem.dim()
    {
        let p = artifacts.problem.dim();
        let mut per_coord_mean = Vec::with_capacity(p);
        let mut per_coord_median = Vec::with_capacity(p);
        for k in 0..p {
            let (lo, hi) = artifacts.problem.param_box[k];
            let width = hi - lo;
            let errs: Vec<f64> = (0..test.mus.len())
                .map(|i| (pass.latents.get(i, k) - test.mus[i][k]).abs() / width)
                .collect();
            per_coord_mean.push(mean(&errs));
            per_coord_median.push(median(&errs));
        }
        (Some(per_coord_mean), Some(per_coord_median))
    } else {
        (None, None)
    };

    // full-domain H1 study in autoencoder mode
    let (h1_mean, h1_median, rb_h1_mean, rb_h1_median) = if artifacts.config.autoencoder
        && artifacts.problem.variant == Variant::AffineAdvectionDiffusion
    {
        let lift = artifacts.problem.lifting(&artifacts.disc.mesh);
        let mut h1s = Vec::with_capacity(test.mus.len());
        for i in 0..test.mus.len() {
            let u_n = pass.reduced_solution(i).ok_or(Error::InvalidArgument {
                op: "run_eval",
                detail: "model head is not a reduced solver".into(),
            })?;
            let mut full = reconstruct(&artifacts.basis.basis, u_n)?;
            for (f, l) in full.iter_mut().zip(lift.iter()) {
                *f += l;
            }
            h1s.push(h1_error(
                &full,
                test.full.col(i),
                &artifacts.disc.stiffness_unit,
                &artifacts.disc.mass,
            )?);
        }
        let rb_h1: Vec<f64> = map_collect(exec, test.mus.len(), |i| {
            rb_exact_full_solution(artifacts, &test.mus[i]).and_then(|full| {
                h1_error(
                    &full,
                    test.full.col(i),
                    &artifacts.disc.stiffness_unit,
                    &artifacts.disc.mass,
                )
            })
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        (
            Some(mean(&h1s)),
            Some(median(&h1s)),
            Some(mean(&rb_h1)),
            Some(median(&rb_h1)),
        )
    } else {
        (None, None, None, None)
    };

    Ok(EvaluationReport {
        n_test: test.mus.len(),
        output_error_mean: mean(&errors),
        output_error_median: median(&errors),
        param_error_mean,
        param_error_median,
        h1_mean,
        h1_median,
        rb_h1_mean,
        rb_h1_median,
    })
}

#[derive(Debug, Clone)]
pub struct RbBaselineReport {
    pub q_a: usize,
    pub output_error_mean: f64,
    pub output_error_median: f64,
    pub failed_solves: usize,
}

/// Standalone reduced-basis comparator: coefficients from the interpolation
/// problem (or the exact functions for the affine variant), then the reduced
/// solve, then the sensor error.
pub fn run_rb_baseline(
    artifacts: &OfflineArtifacts,
    q_a: usize,
    test: &TestSet,
    exec: Exec,
) -> Result<RbBaselineReport> {
    let ops = artifacts.affine_set_for(q_a)?;
    let output_map = artifacts.output_map();
    let results: Vec<Result<Vec<f64>>> = map_collect(exec, test.mus.len(), |i| {
        let (theta_a, theta_f) = artifacts.theta_for_mu(&test.mus[i], q_a)?;
        let (a_n, f_n) = rb_assemble(&theta_a, &theta_f, &ops)?;
        let u_n = solve_with_shift(&a_n, &f_n)?;
        output_map.matvec(&u_n)
    });
    let mut errors = Vec::with_capacity(test.mus.len());
    let mut failed = 0usize;
    for (i, item) in results.into_iter().enumerate() {
        match item {
            Ok(y_rb) => {
                let t = test.y.row(i);
                errors.push(norm2(&sub(&y_rb, &t)) / norm2(&t).max(1e-300));
            }
            Err(Error::SingularMatrix { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if errors.is_empty() {
        return Err(Error::Pipeline(format!(
            "reduced baseline at q_a = {q_a}: every test solve was singular"
        )));
    }
    Ok(RbBaselineReport {
        q_a,
        output_error_mean: mean(&errors),
        output_error_median: median(&errors),
        failed_solves: failed,
    })
}

#[derive(Debug, Clone)]
pub struct BaselineReport {
    pub kind: &'static str,
    pub output_error_mean: Option<f64>,
    pub output_error_median: Option<f64>,
    pub param_error_mean: Option<Vec<f64>>,
    pub param_error_median: Option<Vec<f64>>,
}

/// Evaluates a trained baseline on the test set, unscaling predictions.
pub fn eval_baseline(
    artifacts: &OfflineArtifacts,
    run: &BaselineRun,
    test: &TestSet,
    exec: Exec,
) -> Result<BaselineReport> {
    let (pred, _) = run.model.predict(&test.x, exec)?;
    let n = test.mus.len();
    let mut out_errors: Vec<f64> = Vec::new();
    let p = artifacts.problem.dim();
    let mut param_errors: Vec<Vec<f64>> = vec![Vec::new(); p];
    for i in 0..n {
        let (y_opt, mu_opt) = run.unscale(&pred.row(i));
        if let Some(y_hat) = y_opt {
            let t = test.y.row(i);
            out_errors.push(norm2(&sub(&y_hat, &t)) / norm2(&t).max(1e-300));
        }
        if let Some(mu_hat) = mu_opt {
            for k in 0..p {
                let (lo, hi) = artifacts.problem.param_box[k];
                param_errors[k].push((mu_hat[k] - test.mus[i][k]).abs() / (hi - lo));
            }
        }
    }
    let has_out = matches!(run.kind, BaselineKind::Out | BaselineKind::Both);
    let has_mu = matches!(run.kind, BaselineKind::Mu | BaselineKind::Both);
    Ok(BaselineReport {
        kind: run.kind.tag(),
        output_error_mean: has_out.then(|| mean(&out_errors)),
        output_error_median: has_out.then(|| median(&out_errors)),
        param_error_mean: has_mu.then(|| param_errors.iter().map(|e| mean(e)).collect()),
        param_error_median: has_mu.then(|| param_errors.iter().map(|e| median(e)).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::ExperimentConfig;
    use crate::pipeline::offline::run_offline;
    use crate::pipeline::train_driver::{run_train, TrainRunOptions};

    fn small_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::variant1();
        c.nx = 10;
        c.ny = 10;
        c.n_fom_snapshots = 6;
        c.n_samples = 12;
        c.n_test = 5;
        c.n_in = 5;
        c.n_out = 6;
        c.eps_pod = 1e-9;
        c.augment_eps_pod = 1e-11;
        c.hidden_layers = vec![8];
        c.epochs = 2;
        c.batch_size = 4;
        c.seed = 4321;
        c
    }

    #[test]
    fn test_set_is_disjoint_from_training() {
        let art = run_offline(&small_config(), Exec::Serial).unwrap();
        let test = build_test_set(&art, Exec::Serial).unwrap();
        assert_eq!(test.mus.len(), 5);
        for mu in &test.mus {
            assert!(!art.snapshot_mus.contains(mu));
        }
        // sensor rows match the full solutions
        for i in 0..test.mus.len() {
            for (j, &node) in art.sensors.output_nodes.iter().enumerate() {
                assert_eq!(test.y.get(i, j), test.full.col(i)[node]);
            }
        }
    }

    #[test]
    fn median_of_even_and_odd_lists() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn perfect_predictions_give_zero_error_and_scale_invariance() {
        let y = DenseMatrix::from_fn(4, 3, |i, j| 1.0 + (i * j) as f64);
        let errs = sensor_errors(&y, &y).unwrap();
        assert!(errs.iter().all(|&e| e == 0.0));
        // scaling truth and prediction jointly leaves the error unchanged
        let mut y_hat = y.clone();
        y_hat.set(0, 0, y_hat.get(0, 0) + 0.5);
        let e1 = sensor_errors(&y, &y_hat).unwrap();
        let mut y2 = y.clone();
        y2.scale(3.0);
        let mut y_hat2 = y_hat.clone();
        y_hat2.scale(3.0);
        let e2 = sensor_errors(&y2, &y_hat2).unwrap();
        for (a, b) in e1.iter().zip(e2.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn oracle_latent_matches_pure_rb_error_at_sensors() {
        // feeding the head a latent that exactly encodes the test parameter
        // must reproduce the standalone reduced solve at the sensors
        let art = run_offline(&small_config(), Exec::Serial).unwrap();
        let test = build_test_set(&art, Exec::Serial).unwrap();
        let ops = art.affine_set_for(3).unwrap();
        let rb =
            crate::neural::RbOutputLayer::new(ops, art.output_map(), art.latent_mode()).unwrap();
        let output_map = art.output_map();
        let mut compared = 0usize;
        for (i, mu) in test.mus.iter().enumerate() {
            // only parameters the sigmoid latent can actually reach
            if !rb.ops.scaler.contains(mu) {
                continue;
            }
            let xi = rb.ops.scaler.invert(mu);
            // logit: z such that sigmoid(z) = xi
            let z: Vec<f64> = xi.iter().map(|x| (x / (1.0 - x)).ln()).collect();
            let (y_oracle, _) = rb.forward_sample(&z).unwrap();
            // the standalone reduced route at the same parameter
            let (ta, tf) = art.theta_for_mu(mu, 3).unwrap();
            let (a_n, f_n) = rb_assemble(&ta, &tf, &rb.ops).unwrap();
            let u_n = solve_with_shift(&a_n, &f_n).unwrap();
            let y_rb = output_map.matvec(&u_n).unwrap();
            // the layer output itself matches the reduced route to 1e-10
            let y_diff = norm2(&sub(&y_oracle, &y_rb)) / norm2(&y_rb).max(1e-300);
            assert!(
                y_diff <= 1e-10,
                "sample {i}: sensor value deviation {y_diff}"
            );
            let t = test.y.row(i);
            let e_oracle = norm2(&sub(&y_oracle, &t)) / norm2(&t);
            let e_rb = norm2(&sub(&y_rb, &t)) / norm2(&t);
            assert!(
                (e_oracle - e_rb).abs() <= 1e-9,
                "sample {i}: oracle {e_oracle} vs reduced {e_rb}"
            );
            compared += 1;
        }
        assert!(compared > 0, "no test parameter inside the latent range");
    }

    #[test]
    fn empty_test_set_is_rejected() {
        let mut config = small_config();
        config.n_test = 0;
        let art = run_offline(&config, Exec::Serial).unwrap();
        assert!(build_test_set(&art, Exec::Serial).is_err());
    }

    #[test]
    fn eval_report_has_parameter_errors_for_the_affine_variant() {
        let art = run_offline(&small_config(), Exec::Serial).unwrap();
        let run = run_train(
            &art,
            &TrainRunOptions {
                epochs: Some(2),
                ..Default::default()
            },
            Exec::Serial,
        )
        .unwrap();
        let test = build_test_set(&art, Exec::Serial).unwrap();
        let report = run_eval(&art, &run.model, &test, Exec::Serial).unwrap();
        assert_eq!(report.n_test, 5);
        assert!(report.output_error_mean.is_finite());
        let pm = report.param_error_mean.clone().unwrap();
        assert_eq!(pm.len(), 2);
        assert!(pm.iter().all(|v| v.is_finite()));
        let (_, rows) = report.csv_rows();
        assert!(rows.iter().any(|r| r[0] == "output_error_mean"));
        assert!(rows.iter().any(|r| r[0] == "param0_error_median"));
    }

    #[test]
    fn autoencoder_eval_reports_h1_statistics() {
        let mut config = small_config();
        config.autoencoder = true;
        config.n_out = config.n_in;
        let art = run_offline(&config, Exec::Serial).unwrap();
        let run = run_train(
            &art,
            &TrainRunOptions {
                epochs: Some(2),
                ..Default::default()
            },
            Exec::Serial,
        )
        .unwrap();
        let test = build_test_set(&art, Exec::Serial).unwrap();
        let report = run_eval(&art, &run.model, &test, Exec::Serial).unwrap();
        let h1 = report.h1_mean.unwrap();
        let rb_h1 = report.rb_h1_mean.unwrap();
        assert!(h1.is_finite() && h1 > 0.0);
        assert!(rb_h1.is_finite() && rb_h1 > 0.0);
        // the network cannot beat the exact-coefficient reduced solve by much
        assert!(h1 >= 0.5 * rb_h1);
    }

    #[test]
    fn exact_affine_baseline_matches_pod_accuracy_at_training_points() {
        // with exact coefficients, baseline error at a training parameter is
        // at the projection level
        let art = run_offline(&small_config(), Exec::Serial).unwrap();
        let mu = art.snapshot_mus[0].clone();
        let full = rb_exact_full_solution(&art, &mu).unwrap();
        let truth = crate::fem::fom_solve(
            &art.problem,
            &art.disc.mesh,
            &art.disc.pattern,
            &mu,
            1e-11,
            Exec::Serial,
        )
        .unwrap();
        let err = norm2(&sub(&full, &truth)) / norm2(&truth);
        assert!(err <= 1e-6, "full-field error {err}");
    }
}
