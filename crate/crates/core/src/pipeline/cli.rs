//! Command-line interface.
//!
//! Subcommands: `offline`, `train`, `eval`, `rb-baseline`, `mlp-baseline`,
//! `gradcheck`, `fom-solve`. Exit codes: 0 success, 2 configuration error,
//! 3 numerical failure, 4 missing artifact.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::neural::{gradient_check, NetworkModel, RbOutputLayer};
use crate::numerics::DenseMatrix;
use crate::rng::SplitMix64;
use crate::rom::{AffineOperatorSet, CoeffScaler, Provenance};

use super::artifacts::{
    export_dataset_csv, load_artifacts, load_checkpoint, save_artifacts, save_checkpoint,
    save_field, write_csv, write_history_csv,
};
use super::config::ExperimentConfig;
use super::eval::{build_test_set, eval_baseline, run_eval, run_rb_baseline};
use super::offline::run_offline;
use super::train_driver::{run_mlp_baseline, run_train, BaselineKind, TrainRunOptions};

const USAGE: &str = "\
usage: rbnet <command> [flags]

commands:
  offline       build snapshots, reduced basis, hyper-reduction and dataset
                  (--config <path|variant1|variant2> --out <dir> [--seed <u64>])
  train         train the reduced-head network on offline artifacts
                  (--out <dir> [--q-a <n>] [--epochs <n>] [--seed <u64>])
  eval          evaluate the trained checkpoint on a fresh test set
                  (--out <dir>)
  rb-baseline   standalone reduced-basis comparator on the test set
                  (--out <dir> [--q-a <n>])
  mlp-baseline  train and evaluate the three plain-MLP baselines
                  (--out <dir> [--epochs <n>] [--seed <u64>])
  gradcheck     finite-difference audit of the hand-derived gradients
                  ([--seed <u64>])
  fom-solve     one full-order solve, field written as a binary blob
                  (--config <path|variant1|variant2> --mu <v1,v2,...> --out <dir>)
";

#[derive(Debug, Default)]
struct Flags {
    config: Option<String>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    q_a: Option<usize>,
    epochs: Option<usize>,
    mu: Option<Vec<f64>>,
}

fn parse_flags(args: &[String]) -> Result<Flags> {
    let mut flags = Flags::default();
    let mut i = 0;
    while i < args.len() {
        let flag = args[i].as_str();
        let value = args
            .get(i + 1)
            .ok_or_else(|| Error::Config(format!("flag {flag} needs a value")))?;
        match flag {
            "--config" => flags.config = Some(value.clone()),
            "--out" => flags.out = Some(PathBuf::from(value)),
            "--seed" => {
                flags.seed = Some(value.parse().map_err(|_| {
                    Error::Config(format!("--seed expects an unsigned integer, got '{value}'"))
                })?)
            }
            "--q-a" => {
                flags.q_a = Some(value.parse().map_err(|_| {
                    Error::Config(format!("--q-a expects a positive integer, got '{value}'"))
                })?)
            }
            "--epochs" => {
                flags.epochs = Some(value.parse().map_err(|_| {
                    Error::Config(format!("--epochs expects an integer, got '{value}'"))
                })?)
            }
            "--mu" => {
                let parsed: std::result::Result<Vec<f64>, _> =
                    value.split(',').map(|s| s.trim().parse::<f64>()).collect();
                flags.mu = Some(parsed.map_err(|_| {
                    Error::Config(format!(
                        "--mu expects comma-separated floats, got '{value}'"
                    ))
                })?);
            }
            other => return Err(Error::Config(format!("unknown flag '{other}'"))),
        }
        i += 2;
    }
    Ok(flags)
}

fn require_out(flags: &Flags) -> Result<&Path> {
    flags
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("--out <dir> is required".into()))
}

fn require_config(flags: &Flags) -> Result<ExperimentConfig> {
    let spec = flags
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <path|variant1|variant2> is required".into()))?;
    ExperimentConfig::load(spec)
}

fn cmd_offline(flags: &Flags) -> Result<()> {
    let mut config = require_config(flags)?;
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    let out = require_out(flags)?;
    let exec = Exec::default();
    let artifacts = run_offline(&config, exec)?;
    save_artifacts(out, &artifacts)?;
    export_dataset_csv(&out.join("dataset.csv"), &artifacts.dataset)?;
    println!(
        "offline: basis {} modes (augment {}), dataset {} rows ({} skipped), written to {}",
        artifacts.basis.dim(),
        artifacts.augment_basis.dim(),
        artifacts.dataset.n_rows(),
        artifacts.augment_skipped,
        out.display()
    );
    Ok(())
}

fn cmd_train(flags: &Flags) -> Result<()> {
    let out = require_out(flags)?;
    let artifacts = load_artifacts(out)?;
    let opts = TrainRunOptions {
        q_a: flags.q_a,
        epochs: flags.epochs,
        seed: flags.seed,
    };
    let exec = Exec::default();
    let run = run_train(&artifacts, &opts, exec)?;
    save_checkpoint(
        &out.join("model"),
        &run.model,
        &artifacts.config,
        run.q_a,
        run.epochs,
        run.seed,
    )?;
    write_history_csv(&out.join("history.csv"), &run.history)?;
    match run.history.last() {
        Some(last) => println!(
            "train: {} epochs, final train loss {:.3e}, val loss {:.3e}, checkpoint in {}",
            run.epochs,
            last.train_loss,
            last.val_loss,
            out.join("model").display()
        ),
        None => println!(
            "train: 0 epochs, checkpoint equals initialization, written to {}",
            out.join("model").display()
        ),
    }
    Ok(())
}

fn cmd_eval(flags: &Flags) -> Result<()> {
    let out = require_out(flags)?;
    let artifacts = load_artifacts(out)?;
    let (model, info) = load_checkpoint(&out.join("model"), &artifacts)?;
    let exec = Exec::default();
    let test = build_test_set(&artifacts, exec)?;
    let report = run_eval(&artifacts, &model, &test, exec)?;
    let (header, rows) = report.csv_rows();
    write_csv(&out.join("eval_report.csv"), &header, &rows)?;
    println!(
        "eval: checkpoint q_a = {}, {} test samples, output error mean {:.3e} median {:.3e}",
        info.q_a, report.n_test, report.output_error_mean, report.output_error_median
    );
    if let Some(pm) = &report.param_error_median {
        let joined: Vec<String> = pm.iter().map(|v| format!("{v:.3e}")).collect();
        println!(
            "eval: median normalized parameter errors [{}]",
            joined.join(", ")
        );
    }
    if let (Some(h1), Some(rb)) = (report.h1_median, report.rb_h1_median) {
        println!("eval: median H1 error {h1:.3e} (pure reduced solve {rb:.3e})");
    }
    Ok(())
}

fn cmd_rb_baseline(flags: &Flags) -> Result<()> {
    let out = require_out(flags)?;
    let artifacts = load_artifacts(out)?;
    let q_a = flags.q_a.unwrap_or(artifacts.config.q_a);
    let exec = Exec::default();
    let test = build_test_set(&artifacts, exec)?;
    let report = run_rb_baseline(&artifacts, q_a, &test, exec)?;
    write_csv(
        &out.join(format!("rb_baseline_qa{q_a:03}.csv")),
        &["metric", "value"],
        &[
            vec!["q_a".into(), report.q_a.to_string()],
            vec![
                "output_error_mean".into(),
                report.output_error_mean.to_string(),
            ],
            vec![
                "output_error_median".into(),
                report.output_error_median.to_string(),
            ],
            vec!["failed_solves".into(), report.failed_solves.to_string()],
        ],
    )?;
    println!(
        "rb-baseline: q_a = {}, output error mean {:.3e} median {:.3e} ({} failed solves)",
        report.q_a, report.output_error_mean, report.output_error_median, report.failed_solves
    );
    Ok(())
}

fn cmd_mlp_baseline(flags: &Flags) -> Result<()> {
    let out = require_out(flags)?;
    let artifacts = load_artifacts(out)?;
    let exec = Exec::default();
    let test = build_test_set(&artifacts, exec)?;
    let opts = TrainRunOptions {
        q_a: None,
        epochs: flags.epochs,
        seed: flags.seed,
    };
    let mut rows = Vec::new();
    for kind in [BaselineKind::Mu, BaselineKind::Out, BaselineKind::Both] {
        let run = run_mlp_baseline(&artifacts, kind, &opts, exec)?;
        write_history_csv(
            &out.join(format!("history_{}.csv", kind.tag())),
            &run.history,
        )?;
        let report = eval_baseline(&artifacts, &run, &test, exec)?;
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let fmt_vec = |v: &Option<Vec<f64>>| {
            v.as_ref()
                .map(|xs| {
                    xs.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(";")
                })
                .unwrap_or_default()
        };
        println!(
            "mlp-baseline {}: output error median {} | parameter error median {}",
            report.kind,
            fmt_opt(report.output_error_median),
            fmt_vec(&report.param_error_median),
        );
        rows.push(vec![
            report.kind.to_string(),
            fmt_opt(report.output_error_mean),
            fmt_opt(report.output_error_median),
            fmt_vec(&report.param_error_mean),
            fmt_vec(&report.param_error_median),
        ]);
    }
    write_csv(
        &out.join("mlp_baseline_report.csv"),
        &[
            "model",
            "output_error_mean",
            "output_error_median",
            "param_error_mean",
            "param_error_median",
        ],
        &rows,
    )?;
    Ok(())
}

/// Small synthetic reduced-head network exercised by the gradcheck command.
fn gradcheck_model(seed: u64) -> Result<(NetworkModel, DenseMatrix, DenseMatrix)> {
    let mut rng = SplitMix64::new(seed);
    let n = 3;
    let mats: Vec<DenseMatrix> = (0..2)
        .map(|_| {
            DenseMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    2.0 + rng.uniform(0.0, 1.0)
                } else {
                    0.3 * rng.uniform(-1.0, 1.0)
                }
            })
        })
        .collect();
    let vecs: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    let scaler = CoeffScaler::from_bounds(&[(0.5, 2.0), (0.2, 1.0), (0.3, 1.2), (0.1, 0.9)])?;
    let ops = AffineOperatorSet::new(mats, vecs, scaler, Provenance::ExactAffine)?;
    let pv = DenseMatrix::from_fn(4, n, |_, _| rng.uniform(-1.0, 1.0));
    let rb = RbOutputLayer::new(ops, pv, crate::neural::LatentMode::AffineCoeffs)?;
    let model = NetworkModel::new_rb(5, &[8, 8], rb, &mut rng)?;
    let x = DenseMatrix::from_fn(2, 5, |_, _| rng.uniform(-1.0, 1.0));
    let y = DenseMatrix::from_fn(2, 4, |_, _| rng.uniform(-0.5, 0.5));
    Ok((model, x, y))
}

fn cmd_gradcheck(flags: &Flags) -> Result<()> {
    let seed = flags.seed.unwrap_or(17);
    let (mut model, x, y) = gradcheck_model(seed)?;
    let report = gradient_check(&mut model, &x, &y, 1e-5, 1e-5)?;
    println!(
        "gradcheck: {} | max relative error {:.3e} over {} components ({} kink-flagged)",
        if report.pass { "PASS" } else { "FAIL" },
        report.max_rel_error,
        report.checked,
        report.skipped_kinks
    );
    if report.pass {
        Ok(())
    } else {
        Err(Error::NonConvergence {
            op: "gradcheck",
            iterations: report.checked,
            residual: report.max_rel_error,
        })
    }
}

fn cmd_fom_solve(flags: &Flags) -> Result<()> {
    let config = require_config(flags)?;
    let out = require_out(flags)?;
    let mu = flags
        .mu
        .clone()
        .ok_or_else(|| Error::Config("--mu <v1,v2,...> is required".into()))?;
    let problem = config.problem();
    if !problem.contains(&mu) {
        return Err(Error::OutOfDomain {
            detail: format!("mu = {mu:?}, box = {:?}", problem.param_box),
        });
    }
    let disc = crate::fem::discretize(config.nx, config.ny)?;
    let field = crate::fem::fom_solve(
        &problem,
        &disc.mesh,
        &disc.pattern,
        &mu,
        config.solver_tol,
        Exec::default(),
    )?;
    save_field(out, "field", &field, &mu)?;
    let max = field.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let min = field.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    println!(
        "fom-solve: {} nodes, field range [{min:.6}, {max:.6}], written to {}",
        field.len(),
        out.display()
    );
    Ok(())
}

/// Entry point; returns the process exit code.
pub fn cli_main(args: &[String]) -> i32 {
    if args.is_empty() {
        eprint!("{USAGE}");
        return 2;
    }
    let command = args[0].as_str();
    let flags = match parse_flags(&args[1..]) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let result = match command {
        "offline" => cmd_offline(&flags),
        "train" => cmd_train(&flags),
        "eval" => cmd_eval(&flags),
        "rb-baseline" => cmd_rb_baseline(&flags),
        "mlp-baseline" => cmd_mlp_baseline(&flags),
        "gradcheck" => cmd_gradcheck(&flags),
        "fom-solve" => cmd_fom_solve(&flags),
        "help" | "--help" | "-h" => {
            print!("{USAGE}");
            return 0;
        }
        other => {
            eprintln!("error: unknown command '{other}'");
            eprint!("{USAGE}");
            return 2;
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
