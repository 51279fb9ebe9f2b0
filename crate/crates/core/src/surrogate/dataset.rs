use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::train::Labeled;
use super::{FeatureLayout, SurrogateError};
use crate::accel::{self, AcceleratorConfig, HwKnob, DEFAULT_CLOCK_GHZ};
use crate::nas::{decode, sample_uniform, DecisionVector, SearchSpaceDef};
use crate::oracle::{CostModel, SimulatorCostModel};
use crate::rng;

/// One simulator-labeled sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub decisions: DecisionVector,
    pub config: AcceleratorConfig,
    pub area: f64,
    pub latency_ms: f64,
}

impl Record {
    pub fn labeled(&self, layout: &FeatureLayout) -> Result<Labeled, SurrogateError> {
        Ok(Labeled { features: layout.encode(&self.decisions, &self.config)?, area: self.area, latency_ms: self.latency_ms })
    }
}

pub fn uniform_config(seed: u64) -> AcceleratorConfig {
    let mut r = rng::rng(seed);
    let idx = HwKnob::ALL.map(|k| r.gen_range(0..k.domain_len()));
    AcceleratorConfig::from_indices(&idx, DEFAULT_CLOCK_GHZ).expect("indices in range")
}

/// The `attempt`-th candidate of a dataset stream.
pub fn candidate(def: &SearchSpaceDef, seed: u64, attempt: u64) -> (DecisionVector, AcceleratorConfig) {
    let s = rng::derive(seed, attempt);
    (sample_uniform(def, rng::derive(s, 0)), uniform_config(rng::derive(s, 1)))
}

/// Labels a candidate with the analytical models; `None` when invalid.
pub fn label(
    def: &SearchSpaceDef,
    decisions: DecisionVector,
    config: AcceleratorConfig,
    sim: &SimulatorCostModel,
) -> Option<Record> {
    let arch = decode(def, &decisions).ok()?;
    if !accel::validate(&config, &arch).ok()?.is_valid() {
        return None;
    }
    let m = sim.measure(&arch, &config).ok()?;
    Some(Record { decisions, config, area: m.area, latency_ms: m.latency_ms })
}

/// `n` valid uniform samples; invalid candidates are skipped, so the stream
/// of attempts is longer than `n`.
pub fn generate_dataset(def: &SearchSpaceDef, n: usize, seed: u64, sim: &SimulatorCostModel) -> Vec<Record> {
    let mut out = Vec::with_capacity(n);
    let mut attempt = 0;
    while out.len() < n {
        let (d, cfg) = candidate(def, seed, attempt);
        attempt += 1;
        if let Some(r) = label(def, d, cfg, sim) {
            out.push(r);
        }
    }
    out
}
