use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::accel::{baseline_config, AcceleratorConfig, HwKnob, DEFAULT_CLOCK_GHZ};
use crate::nas::{DecisionVector, SearchSpaceDef};

/// Full (architecture, accelerator) decisions of one sample.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointDecision {
    pub arch: DecisionVector,
    pub hw: [usize; 7],
}

/// The controller's view of a search: which architecture decision points and
/// hardware knobs are free. Everything else is pinned to `arch_base` /
/// `hw_base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpace {
    pub arch: SearchSpaceDef,
    /// Indices into `arch.decision_points`.
    pub arch_searched: Vec<usize>,
    pub arch_base: DecisionVector,
    pub hw_searched: Vec<HwKnob>,
    pub hw_base: [usize; 7],
    pub clock_ghz: f64,
}

fn knob_index(k: HwKnob) -> usize {
    HwKnob::ALL.iter().position(|&x| x == k).expect("knob listed in ALL")
}

impl JointSpace {
    /// Every decision point and knob free; pinned values default to the
    /// template network and the baseline accelerator.
    pub fn joint(arch: SearchSpaceDef) -> Result<Self, SearchError> {
        let arch_base = arch.template_decisions()?;
        Ok(JointSpace {
            arch_searched: (0..arch.decision_points.len()).collect(),
            arch_base,
            arch,
            hw_searched: HwKnob::ALL.to_vec(),
            hw_base: baseline_config().to_indices()?,
            clock_ghz: DEFAULT_CLOCK_GHZ,
        })
    }

    /// Keeps only the named architecture decision points free.
    pub fn with_arch_points(mut self, ids: &[String]) -> Result<Self, SearchError> {
        let mut picked = Vec::with_capacity(ids.len());
        for id in ids {
            let i = self
                .arch
                .decision_points
                .iter()
                .position(|d| d.id == *id)
                .ok_or_else(|| SearchError::UnknownDecision(id.clone()))?;
            if picked.contains(&i) {
                return Err(SearchError::UnknownDecision(id.clone()));
            }
            picked.push(i);
        }
        self.arch_searched = picked;
        Ok(self)
    }

    /// Keeps only the listed hardware knobs free, in table order.
    pub fn with_hw_knobs(mut self, knobs: &[HwKnob]) -> Self {
        self.hw_searched = HwKnob::ALL.iter().copied().filter(|k| knobs.contains(k)).collect();
        self
    }

    /// Pins the accelerator.
    pub fn fix_hw(mut self, cfg: &AcceleratorConfig) -> Result<Self, SearchError> {
        self.hw_base = cfg.to_indices()?;
        self.clock_ghz = cfg.clock_ghz;
        self.hw_searched.clear();
        Ok(self)
    }

    /// Pins the architecture.
    pub fn fix_arch(mut self, d: DecisionVector) -> Result<Self, SearchError> {
        self.arch.check(&d)?;
        self.arch_base = d;
        self.arch_searched.clear();
        Ok(self)
    }

    pub fn base_config(&self) -> AcceleratorConfig {
        self.config(&self.hw_base)
    }

    pub fn config(&self, hw: &[usize; 7]) -> AcceleratorConfig {
        AcceleratorConfig::from_indices(hw, self.clock_ghz).expect("indices come from domains")
    }

    /// Domain size of each free decision, architecture first.
    pub fn domain_sizes(&self) -> Vec<usize> {
        self.arch_searched
            .iter()
            .map(|&i| self.arch.decision_points[i].domain.len())
            .chain(self.hw_searched.iter().map(|k| k.domain_len()))
            .collect()
    }

    pub fn point_names(&self) -> Vec<String> {
        self.arch_searched
            .iter()
            .map(|&i| self.arch.decision_points[i].id.clone())
            .chain(self.hw_searched.iter().map(|k| k.as_str().to_string()))
            .collect()
    }

    pub fn cardinality(&self) -> u128 {
        self.domain_sizes().iter().map(|&n| n as u128).product()
    }

    /// Expands a choice over the free decisions into full decisions.
    pub fn assemble(&self, choice: &[usize]) -> JointDecision {
        assert_eq!(choice.len(), self.arch_searched.len() + self.hw_searched.len());
        let (a, h) = choice.split_at(self.arch_searched.len());
        let mut arch = self.arch_base.clone();
        for (&i, &v) in self.arch_searched.iter().zip(a) {
            arch.0[i] = v;
        }
        let mut hw = self.hw_base;
        for (&k, &v) in self.hw_searched.iter().zip(h) {
            hw[knob_index(k)] = v;
        }
        JointDecision { arch, hw }
    }

    /// The `rank`-th choice in mixed-radix order (last decision fastest).
    pub fn unrank(&self, mut rank: u128) -> Vec<usize> {
        let sizes = self.domain_sizes();
        let mut out = alloc::vec![0; sizes.len()];
        for (slot, &n) in out.iter_mut().zip(&sizes).rev() {
            *slot = (rank % n as u128) as usize;
            rank /= n as u128;
        }
        out
    }
}
