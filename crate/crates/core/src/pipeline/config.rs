//! Experiment configuration: JSON files with per-variant presets.
//!
//! A config file must name its `variant`; every other field is optional and
//! falls back to the preset of that variant. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// 1 = affine advection-diffusion, 2 = nonaffine diffusion.
    pub variant: u8,
    pub nx: usize,
    pub ny: usize,
    pub eps_pod: f64,
    /// Tolerance of the (tighter) basis used to generate augmented rows.
    pub augment_eps_pod: f64,
    /// Full-order snapshot count n_s.
    pub n_fom_snapshots: usize,
    /// Total dataset rows N_s (FOM rows plus reduced-solver rows).
    pub n_samples: usize,
    pub n_test: usize,
    pub n_in: usize,
    pub n_out: usize,
    /// Output sensors coincide with input sensors.
    pub autoencoder: bool,
    /// Matrix affine terms kept by hyper-reduction (variant 2).
    pub q_a: usize,
    /// Right-hand-side affine terms (variant 2).
    pub q_f: usize,
    /// Term counts for which coefficient scalers are tabulated offline.
    pub q_a_sweep: Vec<usize>,
    /// Matrix snapshots used to build the hyper-reduction basis.
    pub deim_matrix_snapshots: usize,
    pub hidden_layers: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Relative residual tolerance of full-order solves.
    pub solver_tol: f64,
}

impl ExperimentConfig {
    pub fn variant1() -> Self {
        ExperimentConfig {
            variant: 1,
            nx: 50,
            ny: 50,
            eps_pod: 1e-5,
            augment_eps_pod: 1e-7,
            n_fom_snapshots: 200,
            n_samples: 2000,
            n_test: 200,
            n_in: 20,
            n_out: 20,
            autoencoder: false,
            q_a: 3,
            q_f: 3,
            q_a_sweep: vec![],
            deim_matrix_snapshots: 0,
            hidden_layers: vec![256, 256, 256, 256],
            epochs: 500,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 20240,
            solver_tol: 1e-10,
        }
    }

    pub fn variant2() -> Self {
        ExperimentConfig {
            variant: 2,
            nx: 100,
            ny: 100,
            eps_pod: 1e-4,
            augment_eps_pod: 1e-7,
            n_fom_snapshots: 400,
            n_samples: 4000,
            n_test: 200,
            n_in: 40,
            n_out: 100,
            autoencoder: false,
            q_a: 40,
            q_f: 20,
            q_a_sweep: vec![1, 2, 3, 4, 5, 10, 20, 40],
            deim_matrix_snapshots: 200,
            hidden_layers: vec![64, 64, 64, 64],
            epochs: 1000,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 20240,
            solver_tol: 1e-10,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "variant1" => Ok(Self::variant1()),
            "variant2" => Ok(Self::variant2()),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected variant1 or variant2)"
            ))),
        }
    }

    /// `spec` is either a preset name or a path to a JSON file that names a
    /// variant and overrides any subset of the preset fields.
    pub fn load(spec: &str) -> Result<Self> {
        if let Ok(preset) = Self::preset(spec) {
            return Ok(preset);
        }
        let path = Path::new(spec);
        if !path.exists() {
            return Err(Error::Config(format!(
                "config '{spec}' is neither a preset name nor an existing file"
            )));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {spec}: {e}")))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("config root must be a JSON object".into()))?;
        let variant = obj
            .get("variant")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Config("config must set \"variant\" to 1 or 2".into()))?;
        let preset = match variant {
            1 => Self::variant1(),
            2 => Self::variant2(),
            other => {
                return Err(Error::Config(format!(
                    "variant must be 1 or 2, got {other}"
                )))
            }
        };
        let mut merged = serde_json::to_value(&preset)
            .map_err(|e| Error::Config(format!("internal preset serialization: {e}")))?;
        let merged_obj = merged.as_object_mut().expect("preset is an object");
        for (k, v) in obj {
            merged_obj.insert(k.clone(), v.clone());
        }
        let config: ExperimentConfig = serde_json::from_value(merged)
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.variant != 1 && self.variant != 2 {
            return fail(format!("variant must be 1 or 2, got {}", self.variant));
        }
        if self.nx < 2 || self.ny < 2 {
            return fail("mesh needs nx, ny >= 2".into());
        }
        if !(self.eps_pod > 0.0 && self.eps_pod < 1.0) {
            return fail(format!("eps_pod must lie in (0,1), got {}", self.eps_pod));
        }
        if !(self.augment_eps_pod > 0.0 && self.augment_eps_pod < 1.0) {
            return fail("augment_eps_pod must lie in (0,1)".into());
        }
        if self.n_fom_snapshots == 0 {
            return fail("need at least one full-order snapshot".into());
        }
        if self.n_samples < self.n_fom_snapshots {
            return fail(format!(
                "n_samples ({}) must be >= n_fom_snapshots ({})",
                self.n_samples, self.n_fom_snapshots
            ));
        }
        if self.n_in == 0 || self.n_out == 0 {
            return fail("sensor counts must be positive".into());
        }
        if self.hidden_layers.is_empty() {
            return fail("hidden architecture must be nonempty".into());
        }
        if self.variant == 2 {
            if self.q_a == 0 || self.q_f == 0 {
                return fail("variant 2 needs q_a >= 1 and q_f >= 1".into());
            }
            if self.deim_matrix_snapshots == 0 {
                return fail("variant 2 needs matrix snapshots for hyper-reduction".into());
            }
            if self.q_a_sweep.iter().any(|&q| q == 0 || q > self.q_a) {
                return fail("q_a_sweep entries must lie in 1..=q_a".into());
            }
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning rate must be positive".into());
        }
        if !(self.solver_tol > 0.0) {
            return fail("solver tolerance must be positive".into());
        }
        Ok(())
    }

    pub fn problem(&self) -> crate::fem::Problem {
        match self.variant {
            1 => crate::fem::Problem::affine_advection_diffusion(),
            _ => crate::fem::Problem::nonaffine_diffusion(),
        }
    }
}

/// Substream tags deriving the independent random streams of one experiment.
pub mod stream_tags {
    pub const SENSORS: u64 = 1;
    pub const SNAPSHOTS: u64 = 2;
    pub const DEIM: u64 = 3;
    pub const AUGMENT: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const INIT: u64 = 6;
    pub const SHUFFLE: u64 = 7;
    pub const TEST: u64 = 8;
}
