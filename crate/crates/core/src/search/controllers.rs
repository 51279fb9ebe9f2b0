use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::eval::{average, BatchEvaluator, EvalRequest};
use super::policy::Policy;
use super::space::JointSpace;
use super::trial::{SeedLineage, Trial, TrialLog, TRIAL_SCHEMA_VERSION};
use crate::math::exp;
use crate::optim::{clip_grad_norm, Adam, AdamConfig};
use crate::reward::{compute_reward, RewardSpec};
use crate::rng;

const CONTROLLER_STREAM: u64 = 0x00c0_7201;
const TRIAL_STREAM: u64 = 0x7219_a100;

/// Everything a controller needs besides its own hyperparameters.
#[derive(Clone, Copy)]
pub struct SearchContext<'a> {
    pub space: &'a JointSpace,
    pub reward: &'a RewardSpec,
    pub evaluator: &'a dyn BatchEvaluator,
    /// Evaluations averaged into each trial's accuracy.
    pub averaging_n: u32,
    pub run_seed: u64,
    /// Seed of this controller run; equals `run_seed` outside phase search.
    pub stream_seed: u64,
    pub phase: Option<u8>,
    pub first_trial_id: u64,
}

impl core::fmt::Debug for SearchContext<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SearchContext")
            .field("points", &self.space.point_names())
            .field("reward", self.reward)
            .field("averaging_n", &self.averaging_n)
            .field("stream_seed", &self.stream_seed)
            .field("phase", &self.phase)
            .finish_non_exhaustive()
    }
}

impl SearchContext<'_> {
    fn controller_rng(&self) -> rng::Rng {
        rng::rng(rng::derive(self.stream_seed, CONTROLLER_STREAM))
    }

    /// Evaluates choices as trials `first_id, first_id + 1, ...`.
    pub(crate) fn evaluate_choices(&self, choices: &[Vec<usize>], first_id: u64) -> Vec<Trial> {
        let n = self.averaging_n.max(1) as usize;
        let mut requests = Vec::with_capacity(choices.len() * n);
        let mut meta = Vec::with_capacity(choices.len());
        for (i, c) in choices.iter().enumerate() {
            let trial_id = first_id + i as u64;
            let trial_seed = rng::derive(rng::derive(self.stream_seed, TRIAL_STREAM), trial_id);
            let decisions = self.space.assemble(c);
            let config = self.space.config(&decisions.hw);
            for k in 0..n {
                requests.push(EvalRequest { arch: decisions.arch.clone(), config, draw: rng::derive(trial_seed, k as u64) });
            }
            meta.push((trial_id, trial_seed, decisions, config));
        }
        let responses = self.evaluator.evaluate_batch(&requests);
        assert_eq!(responses.len(), requests.len(), "evaluator dropped requests");
        meta.into_iter()
            .zip(responses.chunks(n))
            .map(|((trial_id, trial_seed, decisions, config), rs)| {
                let folded = average(rs);
                Trial {
                    schema_version: TRIAL_SCHEMA_VERSION,
                    trial_id,
                    phase: self.phase,
                    decisions,
                    config,
                    reward: compute_reward(&folded.result, self.reward),
                    eval: folded.result,
                    evaluator_kind: self.evaluator.kind(),
                    wall_time_s: folded.wall_time_s,
                    seed: SeedLineage { run: self.run_seed, stream: self.stream_seed, trial: trial_seed },
                }
            })
            .collect()
    }
}

pub type Observer<'a> = &'a mut dyn FnMut(&Trial);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomConfig {
    /// Never evaluate the same point twice; stops early once the space is exhausted.
    pub dedup: bool,
    /// Samples handed to the evaluator at once.
    pub batch_size: usize,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig { dedup: false, batch_size: 64 }
    }
}

pub fn run_random(ctx: &SearchContext<'_>, budget: u64, cfg: &RandomConfig, observer: Observer<'_>) -> TrialLog {
    let sizes = ctx.space.domain_sizes();
    let cardinality = ctx.space.cardinality();
    let mut rng = ctx.controller_rng();
    let mut seen = BTreeSet::new();
    let mut log = TrialLog::default();
    let mut next_id = ctx.first_trial_id;
    let mut remaining = budget;
    while remaining > 0 {
        let mut batch = Vec::new();
        while batch.len() < cfg.batch_size.max(1) && (batch.len() as u64) < remaining {
            if cfg.dedup && seen.len() as u128 >= cardinality {
                break;
            }
            let c: Vec<usize> = sizes.iter().map(|&n| rng.gen_range(0..n)).collect();
            if cfg.dedup && !seen.insert(c.clone()) {
                continue;
            }
            batch.push(c);
        }
        if batch.is_empty() {
            break;
        }
        for t in ctx.evaluate_choices(&batch, next_id) {
            observer(&t);
            log.trials.push(t);
        }
        next_id += batch.len() as u64;
        remaining -= batch.len() as u64;
    }
    log
}

/// Exponential moving average of rewards.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Baseline {
    value: Option<f64>,
}

impl Baseline {
    pub fn value(&self) -> Option<f64> {
        self.value
    }

    pub fn update(&mut self, reward: f64, momentum: f64) {
        self.value = Some(match self.value {
            None => reward,
            Some(b) => b + (1.0 - momentum) * (reward - b),
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReinforceConfig {
    pub learning_rate: f64,
    pub baseline_momentum: f64,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        ReinforceConfig { learning_rate: 0.0048, baseline_momentum: 0.95 }
    }
}

/// Final controller state, for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub policy: Policy,
    pub baseline: Baseline,
    pub updates: u64,
}

/// One sample per step: advantage against the moving-average baseline,
/// Adam ascent on the log-likelihood.
pub fn run_reinforce(
    ctx: &SearchContext<'_>,
    budget: u64,
    cfg: &ReinforceConfig,
    observer: Observer<'_>,
) -> (TrialLog, ControllerState) {
    let mut policy = Policy::uniform(&ctx.space.domain_sizes());
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.learning_rate), policy.logits.len());
    let mut grad = vec![0.0; policy.logits.len()];
    let mut baseline = Baseline::default();
    let mut rng = ctx.controller_rng();
    let mut log = TrialLog::default();
    for step in 0..budget {
        let choice = policy.sample(&mut rng);
        let trial = ctx.evaluate_choices(core::slice::from_ref(&choice), ctx.first_trial_id + step).remove(0);
        let advantage = trial.reward - baseline.value().unwrap_or(trial.reward);
        grad.iter_mut().for_each(|g| *g = 0.0);
        policy.add_log_prob_grad(&choice, -advantage, &mut grad);
        adam.step(&mut policy.logits, &grad);
        baseline.update(trial.reward, cfg.baseline_momentum);
        observer(&trial);
        log.trials.push(trial);
    }
    let updates = adam.steps();
    (log, ControllerState { policy, baseline, updates })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    /// Samples drawn from one policy snapshot.
    pub batch_size: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub max_grad_norm: f64,
    pub baseline_momentum: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            learning_rate: 5e-4,
            clip_epsilon: 0.2,
            batch_size: 32,
            epochs: 1,
            minibatch_size: 32,
            max_grad_norm: 1.0,
            baseline_momentum: 0.95,
        }
    }
}

/// A sampled action with the behaviour policy's log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoSample {
    pub choice: Vec<usize>,
    pub old_log_prob: f64,
    pub advantage: f64,
}

/// Gradient of the negated clipped surrogate, averaged over `samples`.
pub fn ppo_gradient(policy: &Policy, samples: &[PpoSample], clip_epsilon: f64) -> Vec<f64> {
    let mut grad = vec![0.0; policy.logits.len()];
    let m = samples.len().max(1) as f64;
    for s in samples {
        let ratio = exp(policy.log_prob(&s.choice) - s.old_log_prob);
        let clipped = (s.advantage > 0.0 && ratio > 1.0 + clip_epsilon)
            || (s.advantage < 0.0 && ratio < 1.0 - clip_epsilon);
        if !clipped {
            policy.add_log_prob_grad(&s.choice, -s.advantage * ratio / m, &mut grad);
        }
    }
    grad
}

/// Gradient of the negated plain policy-gradient objective.
pub fn policy_gradient(policy: &Policy, samples: &[PpoSample]) -> Vec<f64> {
    let mut grad = vec![0.0; policy.logits.len()];
    let m = samples.len().max(1) as f64;
    for s in samples {
        policy.add_log_prob_grad(&s.choice, -s.advantage / m, &mut grad);
    }
    grad
}

/// One PPO update on a batch: `epochs` passes of minibatch steps.
pub fn ppo_update(policy: &mut Policy, adam: &mut Adam, samples: &[PpoSample], cfg: &PpoConfig) {
    for _ in 0..cfg.epochs {
        for mb in samples.chunks(cfg.minibatch_size.max(1)) {
            let mut grad = ppo_gradient(policy, mb, cfg.clip_epsilon);
            clip_grad_norm(&mut grad, cfg.max_grad_norm);
            adam.step(&mut policy.logits, &grad);
        }
    }
}

/// Clipped-surrogate PPO without a value network; the moving-average
/// baseline acts as the critic. The last batch is truncated to the budget.
pub fn run_ppo(ctx: &SearchContext<'_>, budget: u64, cfg: &PpoConfig, observer: Observer<'_>) -> (TrialLog, ControllerState) {
    let mut policy = Policy::uniform(&ctx.space.domain_sizes());
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.learning_rate), policy.logits.len());
    let mut baseline = Baseline::default();
    let mut rng = ctx.controller_rng();
    let mut log = TrialLog::default();
    let mut done = 0;
    while done < budget {
        let k = (cfg.batch_size.max(1) as u64).min(budget - done);
        let choices: Vec<Vec<usize>> = (0..k).map(|_| policy.sample(&mut rng)).collect();
        let trials = ctx.evaluate_choices(&choices, ctx.first_trial_id + done);
        let b = baseline
            .value()
            .unwrap_or_else(|| trials.iter().map(|t| t.reward).sum::<f64>() / trials.len() as f64);
        let samples: Vec<PpoSample> = choices
            .into_iter()
            .zip(&trials)
            .map(|(choice, t)| PpoSample { old_log_prob: policy.log_prob(&choice), advantage: t.reward - b, choice })
            .collect();
        ppo_update(&mut policy, &mut adam, &samples, cfg);
        if baseline.value().is_none() {
            baseline = Baseline { value: Some(b) };
        }
        for t in trials {
            baseline.update(t.reward, cfg.baseline_momentum);
            observer(&t);
            log.trials.push(t);
        }
        done += k;
    }
    let updates = adam.steps();
    (log, ControllerState { policy, baseline, updates })
}
