//! Experiment orchestration: sampling, offline construction, training and
//! evaluation drivers, persistence and the command-line interface.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod offline;
pub mod sampling;
pub mod train_driver;

pub use artifacts::{load_artifacts, load_checkpoint, save_artifacts, save_checkpoint};
pub use config::ExperimentConfig;
pub use dataset::{
    assemble_dataset, augment_dataset_with_rb, generate_snapshots, split_train_val, RowProvenance,
    SensorDataset,
};
pub use eval::{
    build_test_set, eval_baseline, median, run_eval, run_rb_baseline, sensor_errors,
    BaselineReport, EvaluationReport, RbBaselineReport, TestSet,
};
pub use offline::{run_offline, OfflineArtifacts, VariantArtifacts};
pub use sampling::{sample_parameters, sample_sensors, SensorSet};
pub use train_driver::{
    run_mlp_baseline, run_train, BaselineKind, BaselineRun, TrainRunOptions, TrainedRun,
};
