//! Joint architecture/accelerator search: random, REINFORCE and PPO
//! controllers over a shared categorical policy, the phase-based baseline,
//! exhaustive search and Pareto analysis.

mod brute;
mod controllers;
mod eval;
mod pareto;
mod policy;
mod space;
mod trial;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use brute::{brute_force, BruteForce, DEFAULT_BRUTE_FORCE_CAP};
pub use controllers::{
    policy_gradient, ppo_gradient, ppo_update, run_ppo, run_random, run_reinforce, Baseline, ControllerState,
    Observer, PpoConfig, PpoSample, RandomConfig, ReinforceConfig, SearchContext,
};
pub use eval::{average, BatchEvaluator, EvalRequest, EvalResponse, Pipeline};
pub use pareto::{compare_frontiers, dominates, frontier_points, pareto_frontier, CostAxis, FrontierComparison};
pub use policy::Policy;
pub use space::{JointDecision, JointSpace};
pub use trial::{best_of, SeedLineage, Trial, TrialLog, TRIAL_SCHEMA_VERSION};

use crate::accel::{baseline_config, AccelError, AcceleratorConfig, HwKnob};
use crate::nas::{build_space, DecisionVector, NasError, SpaceName};
use crate::oracle::{EvaluatorKind, SimulatorCostModel, SyntheticOracleParams};
use crate::reward::{RewardError, RewardMode, RewardSpec};
use crate::rng;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("budget must be at least 1")]
    Budget,
    #[error("reward_averaging_n must be at least 1")]
    Averaging,
    #[error("phase1_budget must be between 1 and budget - 1 (got {phase1} of {budget})")]
    PhaseSplit { phase1: u64, budget: u64 },
    #[error("unknown or repeated decision point `{0}`")]
    UnknownDecision(String),
    #[error("space has {size} points, above the cap of {cap}")]
    CapExceeded { size: u128, cap: u128 },
    #[error("space is empty")]
    EmptySpace,
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Nas(#[from] NasError),
    #[error(transparent)]
    Accel(#[from] AccelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Random,
    Reinforce,
    Ppo,
}

fn baseline() -> AcceleratorConfig {
    baseline_config()
}

/// What is searched. Pinned parts default to the template network and the
/// baseline accelerator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SearchMode {
    #[default]
    Joint,
    NasOnly {
        #[serde(default = "baseline")]
        config: AcceleratorConfig,
    },
    HasOnly {
        #[serde(default)]
        decisions: Option<DecisionVector>,
    },
    /// Accelerator search on a fixed network with the soft reward, then
    /// architecture search with the hard reward on the best accelerator.
    Phase {
        phase1_budget: u64,
        #[serde(default)]
        initial_decisions: Option<DecisionVector>,
    },
}

fn one() -> u32 {
    1
}

fn simulator() -> EvaluatorKind {
    EvaluatorKind::Simulator
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub space: SpaceName,
    /// Free architecture decision points; all when absent.
    #[serde(default)]
    pub arch_points: Option<Vec<String>>,
    /// Free accelerator knobs; all when absent.
    #[serde(default)]
    pub hw_knobs: Option<Vec<HwKnob>>,
    #[serde(default)]
    pub mode: SearchMode,
    pub controller: ControllerKind,
    pub budget: u64,
    pub reward: RewardSpec,
    #[serde(default = "simulator")]
    pub evaluator_kind: EvaluatorKind,
    /// Trained model file, required when `evaluator_kind` is `surrogate`.
    #[serde(default)]
    pub surrogate_model: Option<String>,
    #[serde(default = "one")]
    pub reward_averaging_n: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub random: RandomConfig,
    #[serde(default)]
    pub reinforce: ReinforceConfig,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub oracle: SyntheticOracleParams,
    #[serde(default)]
    pub simulator: SimulatorCostModel,
}

impl SearchConfig {
    pub fn new(space: SpaceName, controller: ControllerKind, budget: u64, reward: RewardSpec) -> Self {
        SearchConfig {
            space,
            arch_points: None,
            hw_knobs: None,
            mode: SearchMode::Joint,
            controller,
            budget,
            reward,
            evaluator_kind: EvaluatorKind::Simulator,
            surrogate_model: None,
            reward_averaging_n: 1,
            seed: 0,
            random: RandomConfig::default(),
            reinforce: ReinforceConfig::default(),
            ppo: PpoConfig::default(),
            oracle: SyntheticOracleParams::default(),
            simulator: SimulatorCostModel::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.budget == 0 {
            return Err(SearchError::Budget);
        }
        if self.reward_averaging_n == 0 {
            return Err(SearchError::Averaging);
        }
        self.reward.validate()?;
        if let SearchMode::Phase { phase1_budget, .. } = self.mode {
            if phase1_budget == 0 || phase1_budget >= self.budget {
                return Err(SearchError::PhaseSplit { phase1: phase1_budget, budget: self.budget });
            }
        }
        self.joint_space()?;
        Ok(())
    }

    /// The space with every configured subset applied but no mode pinning.
    pub fn joint_space(&self) -> Result<JointSpace, SearchError> {
        let mut space = JointSpace::joint(build_space(self.space))?;
        if let Some(ids) = &self.arch_points {
            space = space.with_arch_points(ids)?;
        }
        if let Some(knobs) = &self.hw_knobs {
            space = space.with_hw_knobs(knobs);
        }
        Ok(space)
    }

    /// The space a single controller run explores: `joint_space` with the
    /// mode's pinning applied. Phase mode is left unpinned.
    pub fn pinned_space(&self) -> Result<JointSpace, SearchError> {
        let joint = self.joint_space()?;
        match &self.mode {
            SearchMode::NasOnly { config } => joint.fix_hw(config),
            SearchMode::HasOnly { decisions } => {
                let d = decisions.clone().unwrap_or_else(|| joint.arch_base.clone());
                joint.fix_arch(d)
            }
            SearchMode::Joint | SearchMode::Phase { .. } => Ok(joint),
        }
    }
}

/// Runs the configured controller over `ctx`.
pub fn run_controller(
    ctx: &SearchContext<'_>,
    cfg: &SearchConfig,
    budget: u64,
    observer: Observer<'_>,
) -> TrialLog {
    match cfg.controller {
        ControllerKind::Random => run_random(ctx, budget, &cfg.random, observer),
        ControllerKind::Reinforce => run_reinforce(ctx, budget, &cfg.reinforce, observer).0,
        ControllerKind::Ppo => run_ppo(ctx, budget, &cfg.ppo, observer).0,
    }
}

/// Runs the configured search. With one serial evaluator the log is a pure
/// function of the configuration.
pub fn run_search(
    cfg: &SearchConfig,
    evaluator: &dyn BatchEvaluator,
    observer: Observer<'_>,
) -> Result<TrialLog, SearchError> {
    cfg.validate()?;
    let joint = cfg.joint_space()?;
    let context = |space, reward, stream_seed, phase, first_trial_id| SearchContext {
        space,
        reward,
        evaluator,
        averaging_n: cfg.reward_averaging_n,
        run_seed: cfg.seed,
        stream_seed,
        phase,
        first_trial_id,
    };
    let SearchMode::Phase { phase1_budget, initial_decisions } = &cfg.mode else {
        let space = cfg.pinned_space()?;
        return Ok(run_controller(&context(&space, &cfg.reward, cfg.seed, None, 0), cfg, cfg.budget, observer));
    };
    let d = initial_decisions.clone().unwrap_or_else(|| joint.arch_base.clone());
    let has = joint.clone().fix_arch(d)?;
    let soft = cfg.reward.with_mode(RewardMode::Soft);
    let ctx1 = context(&has, &soft, rng::derive(cfg.seed, 1), Some(1), 0);
    let mut log = run_controller(&ctx1, cfg, *phase1_budget, observer);
    let best_cfg = best_of(log.trials.iter().filter(|t| t.eval.valid))
        .map(|t| t.config)
        .unwrap_or_else(|| joint.base_config());
    let nas = joint.fix_hw(&best_cfg)?;
    let hard = cfg.reward.with_mode(RewardMode::Hard);
    let ctx2 = context(&nas, &hard, rng::derive(cfg.seed, 2), Some(2), *phase1_budget);
    log.trials.extend(run_controller(&ctx2, cfg, cfg.budget - phase1_budget, observer).trials);
    Ok(log)
}
