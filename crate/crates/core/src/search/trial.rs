use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::space::JointDecision;
use crate::accel::AcceleratorConfig;
use crate::oracle::{EvalResult, EvaluatorKind};
use crate::reward::{compute_reward, RewardSpec};

pub const TRIAL_SCHEMA_VERSION: u32 = 1;

/// Where a trial's randomness came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    /// Seed of the whole run.
    pub run: u64,
    /// Seed of the phase (equals `run` outside phase search).
    pub stream: u64,
    /// Seed from which this trial's accuracy draws derive.
    pub trial: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub schema_version: u32,
    pub trial_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<u8>,
    pub decisions: JointDecision,
    pub config: AcceleratorConfig,
    pub eval: EvalResult,
    pub reward: f64,
    pub evaluator_kind: EvaluatorKind,
    /// Evaluation wall time; absent unless timing was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    pub seed: SeedLineage,
}

impl Trial {
    /// Reward recomputed from the stored evaluation.
    pub fn recomputed_reward(&self, spec: &RewardSpec) -> f64 {
        compute_reward(&self.eval, spec)
    }
}

/// Append-only record of a search.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialLog {
    pub trials: Vec<Trial>,
}

impl TrialLog {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Highest-reward trial; ties go to the earliest.
    pub fn best(&self) -> Option<&Trial> {
        best_of(self.trials.iter())
    }

    pub fn best_reward(&self) -> Option<f64> {
        self.best().map(|t| t.reward)
    }

    pub fn phase(&self, phase: u8) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(move |t| t.phase == Some(phase))
    }
}

pub fn best_of<'a>(trials: impl Iterator<Item = &'a Trial>) -> Option<&'a Trial> {
    trials.fold(None, |best: Option<&Trial>, t| match best {
        Some(b) if b.reward >= t.reward => Some(b),
        _ => Some(t),
    })
}
