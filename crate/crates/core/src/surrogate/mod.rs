//! Learned cost model: a two-head MLP over one-hot (architecture, accelerator)
//! features that predicts chip area and latency.

mod dataset;
mod features;
mod mlp;
mod train;

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

pub use dataset::{candidate, generate_dataset, label, uniform_config, Record};
pub use features::{featurize, FeatureLayout, FeatureVector};
pub use mlp::{BatchLoss, Mlp, Scratch, Targets};
pub use train::{
    error_report, split, train, train_with, CurvePoint, ErrorReport, Labeled, LrSchedule, Standardizer, TrainOutcome, TrainSpec,
};

use crate::accel::{AccelError, AcceleratorConfig};
use crate::nas::{encode, ArchitectureSpec, NasError, SearchSpaceDef};
use crate::oracle::{CostModel, EvaluatorKind, HwMetrics};
use crate::perf::{self, EnergyModelParams, PerfParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SurrogateError {
    #[error("expected {expected} decisions or domain size, got {got}")]
    Decisions { expected: usize, got: usize },
    #[error(transparent)]
    Accel(#[from] AccelError),
    #[error(transparent)]
    Nas(#[from] NasError),
    #[error("feature vector has {got} entries, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("training diverged at step {step}")]
    Diverged { step: u64 },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("log labels need strictly positive area and latency")]
    NonPositiveLabel,
    #[error("invalid training hyperparameters")]
    Spec,
    #[error("model format version {0} is not supported")]
    Version(u32),
    #[error("model layout does not match the search space")]
    Layout,
}

/// A trained model with everything needed to turn raw outputs back into
/// area and milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub format_version: u32,
    pub layout: FeatureLayout,
    pub mlp: Mlp,
    pub area_norm: Standardizer,
    pub latency_norm: Standardizer,
    pub log_labels: bool,
}

impl SurrogateModel {
    pub fn check(&self) -> Result<(), SurrogateError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(SurrogateError::Version(self.format_version));
        }
        if self.mlp.input_dim != self.layout.len() {
            return Err(SurrogateError::Dimension { expected: self.layout.len(), got: self.mlp.input_dim });
        }
        Ok(())
    }

    /// (area, latency_ms).
    pub fn predict(&self, x: &FeatureVector) -> Result<(f64, f64), SurrogateError> {
        self.predict_with(x, &mut self.mlp.scratch())
    }

    pub fn predict_with(&self, x: &FeatureVector, scratch: &mut Scratch) -> Result<(f64, f64), SurrogateError> {
        if x.len() != self.mlp.input_dim {
            return Err(SurrogateError::Dimension { expected: self.mlp.input_dim, got: x.len() });
        }
        let (a, l) = self.mlp.forward(x.as_slice(), scratch);
        Ok((
            train::from_model_space(self.area_norm.invert(a), self.log_labels),
            train::from_model_space(self.latency_norm.invert(l), self.log_labels),
        ))
    }
}

/// [`CostModel`] backed by a [`SurrogateModel`]. Energy is the analytical
/// dynamic energy plus static power over the predicted latency.
#[derive(Debug, Clone)]
pub struct SurrogateCostModel {
    pub model: SurrogateModel,
    pub space: SearchSpaceDef,
    pub perf: PerfParams,
    pub energy: EnergyModelParams,
}

impl SurrogateCostModel {
    pub fn new(model: SurrogateModel, space: SearchSpaceDef) -> Result<Self, SurrogateError> {
        model.check()?;
        if !model.layout.matches(&space) {
            return Err(SurrogateError::Layout);
        }
        Ok(SurrogateCostModel { model, space, perf: PerfParams::default(), energy: EnergyModelParams::default() })
    }

    fn predict(&self, arch: &ArchitectureSpec, cfg: &AcceleratorConfig) -> Result<(f64, f64), SurrogateError> {
        let d = encode(&self.space, arch)?;
        self.model.predict(&self.model.layout.encode(&d, cfg)?)
    }
}

impl CostModel for SurrogateCostModel {
    fn kind(&self) -> EvaluatorKind {
        EvaluatorKind::Surrogate
    }

    fn measure(&self, arch: &ArchitectureSpec, cfg: &AcceleratorConfig) -> Result<HwMetrics, String> {
        let (area, latency_ms) = self.predict(arch, cfg).map_err(|e| format!("{e}"))?;
        let costs = perf::layer_costs(arch, cfg, &self.perf);
        let dynamic: f64 =
            costs.iter().map(|c| self.energy.e_mac * c.macs as f64 + self.energy.e_dram_byte * c.dram_bytes).sum();
        let energy_mj = dynamic * 1e3 + self.energy.p_static * latency_ms;
        Ok(HwMetrics { latency_ms, energy_mj, area })
    }

    fn area(&self, cfg: &AcceleratorConfig) -> f64 {
        let d = self.space.template_decisions().unwrap_or_default();
        match self.model.layout.encode(&d, cfg).and_then(|x| self.model.predict(&x)) {
            Ok((area, _)) => area,
            Err(_) => f64::NAN,
        }
    }
}
