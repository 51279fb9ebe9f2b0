//! The evaluation bundle: validity, accuracy, latency, energy and area of one
//! (architecture, accelerator) pair.
//!
//! Accuracy comes from an [`AccuracyOracle`]; latency, energy and area from a
//! [`CostModel`]. Both are traits so the search runs unchanged whether the
//! numbers come from the analytical simulator, the learned surrogate or an
//! external provider.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::accel::{self, AccelError, AcceleratorConfig, AreaModelParams, InvalidReason, Validity};
use crate::math::{log10, powf};
use crate::nas::{count_params, ArchitectureSpec, OpType};
use crate::perf::{self, EnergyModelParams, PerfParams};
use crate::rng::{self, Fnv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: Option<f64>,
    pub latency_ms: Option<f64>,
    pub energy_mj: Option<f64>,
    pub area: f64,
    pub valid: bool,
    #[serde(default)]
    pub invalid_reasons: Vec<InvalidReason>,
}

impl EvalResult {
    pub fn valid(accuracy: f64, latency_ms: f64, energy_mj: f64, area: f64) -> Self {
        EvalResult {
            accuracy: Some(accuracy),
            latency_ms: Some(latency_ms),
            energy_mj: Some(energy_mj),
            area,
            valid: true,
            invalid_reasons: Vec::new(),
        }
    }

    pub fn invalid(area: f64, reasons: Vec<InvalidReason>) -> Self {
        EvalResult { accuracy: None, latency_ms: None, energy_mj: None, area, valid: false, invalid_reasons: reasons }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    Simulator,
    Surrogate,
}

/// Hardware-side metrics of a valid pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HwMetrics {
    pub latency_ms: f64,
    pub energy_mj: f64,
    pub area: f64,
}

pub trait CostModel {
    fn kind(&self) -> EvaluatorKind;

    /// Metrics for a pair that passed [`accel::validate`]. An error means the
    /// model cannot price this pair at all.
    fn measure(&self, arch: &ArchitectureSpec, cfg: &AcceleratorConfig) -> Result<HwMetrics, String>;

    /// Area of any configuration, used for invalid pairs.
    fn area(&self, cfg: &AcceleratorConfig) -> f64;
}

pub trait AccuracyOracle {
    /// Accuracy in [0, 1]. `draw` distinguishes repeated evaluations of the
    /// same network so that noisy oracles can be averaged.
    fn accuracy(&self, arch: &ArchitectureSpec, draw: u64) -> f64;
}

/// Analytical area and roofline models.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimulatorCostModel {
    #[serde(default)]
    pub area: AreaModelParams,
    #[serde(default)]
    pub perf: PerfParams,
    #[serde(default)]
    pub energy: EnergyModelParams,
}

impl CostModel for SimulatorCostModel {
    fn kind(&self) -> EvaluatorKind {
        EvaluatorKind::Simulator
    }

    fn measure(&self, arch: &ArchitectureSpec, cfg: &AcceleratorConfig) -> Result<HwMetrics, String> {
        let costs = perf::layer_costs(arch, cfg, &self.perf);
        let total = perf::totals(&costs, &self.perf, &self.energy);
        Ok(HwMetrics { latency_ms: total.latency_ms, energy_mj: total.energy_mj, area: accel::chip_area(cfg, &self.area) })
    }

    fn area(&self, cfg: &AcceleratorConfig) -> f64 {
        accel::chip_area(cfg, &self.area)
    }
}

impl<T: CostModel + ?Sized> CostModel for &T {
    fn kind(&self) -> EvaluatorKind {
        (**self).kind()
    }
    fn measure(&self, arch: &ArchitectureSpec, cfg: &AcceleratorConfig) -> Result<HwMetrics, String> {
        (**self).measure(arch, cfg)
    }
    fn area(&self, cfg: &AcceleratorConfig) -> f64 {
        (**self).area(cfg)
    }
}

impl<T: AccuracyOracle + ?Sized> AccuracyOracle for &T {
    fn accuracy(&self, arch: &ArchitectureSpec, draw: u64) -> f64 {
        (**self).accuracy(arch, draw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticOracleParams {
    pub acc_max: f64,
    pub capacity_scale: f64,
    /// Additive bonus per block of the given type.
    #[serde(default)]
    pub op_bonus: BTreeMap<OpType, f64>,
    pub exponent: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SyntheticOracleParams {
    fn default() -> Self {
        let mut op_bonus = BTreeMap::new();
        op_bonus.insert(OpType::FusedIbn, 0.003);
        SyntheticOracleParams { acc_max: 0.8, capacity_scale: 1.2e7, op_bonus, exponent: 10.0, noise_sigma: 0.0, seed: 0 }
    }
}

/// `acc_max - capacity_scale * log10(params)^-exponent + sum(op_bonus)`,
/// clamped to [0, 1], plus optional seeded Gaussian noise. Independent of the
/// accelerator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SyntheticOracle {
    pub params: SyntheticOracleParams,
}

impl SyntheticOracle {
    pub fn new(params: SyntheticOracleParams) -> Self {
        SyntheticOracle { params }
    }
}

/// Noise-free synthetic accuracy.
pub fn synthetic_accuracy(arch: &ArchitectureSpec, params: &SyntheticOracleParams) -> f64 {
    let n = count_params(arch).max(2) as f64;
    let bonus: f64 = arch.blocks.iter().map(|b| params.op_bonus.get(&b.op_type).copied().unwrap_or(0.0)).sum();
    let acc = params.acc_max - params.capacity_scale * powf(log10(n), -params.exponent) + bonus;
    acc.clamp(0.0, 1.0)
}

/// Hash of everything that defines a network's structure.
pub fn fingerprint(arch: &ArchitectureSpec) -> u64 {
    let mut h = Fnv::default();
    h.write_u64(arch.input_resolution as u64);
    for l in arch.layers() {
        h.write_u64(l.op_type as u64);
        for v in [l.kernel, l.expansion, l.out_channels, l.stride, l.groups] {
            h.write_u64(v as u64);
        }
        h.write_u64(l.filter_scale.to_bits());
    }
    h.finish()
}

impl AccuracyOracle for SyntheticOracle {
    fn accuracy(&self, arch: &ArchitectureSpec, draw: u64) -> f64 {
        let base = synthetic_accuracy(arch, &self.params);
        if self.params.noise_sigma == 0.0 {
            return base;
        }
        let mut r = rng::rng(rng::derive(fingerprint(arch) ^ self.params.seed, draw));
        (base + self.params.noise_sigma * rng::standard_normal(&mut r)).clamp(0.0, 1.0)
    }
}

/// Evaluates one pair. Never fails: invalid pairs come back with
/// `valid = false` and the violated rules.
pub fn evaluate(
    arch: &ArchitectureSpec,
    cfg: &AcceleratorConfig,
    cost: &dyn CostModel,
    oracle: &dyn AccuracyOracle,
    draw: u64,
) -> EvalResult {
    match accel::validate(cfg, arch) {
        Err(AccelError::Domain { knob, value }) => {
            EvalResult::invalid(cost.area(cfg), vec![InvalidReason::OutOfDomain { knob: knob.to_string(), value }])
        }
        Err(e) => EvalResult::invalid(
            cost.area(cfg),
            vec![InvalidReason::OutOfDomain { knob: e.to_string(), value: cfg.clock_ghz }],
        ),
        Ok(Validity::Invalid(reasons)) => EvalResult::invalid(cost.area(cfg), reasons),
        Ok(Validity::Valid) => {
            match cost.measure(arch, cfg) {
                Ok(hw) => EvalResult::valid(oracle.accuracy(arch, draw), hw.latency_ms, hw.energy_mj, hw.area),
                Err(message) => EvalResult::invalid(cost.area(cfg), vec![InvalidReason::Evaluator { message }]),
            }
        }
    }
}
