use std::cell::Cell;

use nahas_core::accel::baseline_config;
use nahas_core::nas::{build_space, SpaceName};
use nahas_core::oracle::{EvaluatorKind, SyntheticOracleParams};
use nahas_core::reward::{compute_reward, RewardMode};
use nahas_core::search::*;
use nahas_core::{EvalResult, HwKnob, RewardSpec, SimulatorCostModel, SyntheticOracle};

type SimPipeline = Pipeline<SimulatorCostModel, SyntheticOracle>;

fn pipeline() -> SimPipeline {
    Pipeline::new(build_space(SpaceName::S1MobileNetV2), SimulatorCostModel::default(), SyntheticOracle::default())
}

fn tiny_space() -> JointSpace {
    JointSpace::joint(build_space(SpaceName::S1MobileNetV2))
        .unwrap()
        .with_arch_points(&["block3.kernel".into(), "block6.expansion".into()])
        .unwrap()
        .with_hw_knobs(&[HwKnob::ComputeLanes, HwKnob::SimdUnits])
}

fn ctx<'a>(space: &'a JointSpace, reward: &'a RewardSpec, ev: &'a dyn BatchEvaluator, seed: u64) -> SearchContext<'a> {
    SearchContext {
        space,
        reward,
        evaluator: ev,
        averaging_n: 1,
        run_seed: seed,
        stream_seed: seed,
        phase: None,
        first_trial_id: 0,
    }
}

/// Counts evaluator calls and optionally answers with a constant.
struct Counting<E> {
    inner: E,
    calls: Cell<u64>,
    constant: Option<EvalResult>,
}

impl<E: BatchEvaluator> Counting<E> {
    fn new(inner: E) -> Self {
        Counting { inner, calls: Cell::new(0), constant: None }
    }
}

impl<E: BatchEvaluator> BatchEvaluator for Counting<E> {
    fn kind(&self) -> EvaluatorKind {
        self.inner.kind()
    }

    fn evaluate_batch(&self, requests: &[EvalRequest]) -> Vec<EvalResponse> {
        self.calls.set(self.calls.get() + requests.len() as u64);
        match &self.constant {
            Some(c) => requests.iter().map(|_| EvalResponse { result: c.clone(), wall_time_s: None }).collect(),
            None => self.inner.evaluate_batch(requests),
        }
    }
}

#[test]
fn random_budget_of_one_gives_one_trial() {
    let (space, reward, ev) = (tiny_space(), RewardSpec::hard(0.2, 1.0), pipeline());
    let log = run_random(&ctx(&space, &reward, &ev, 3), 1, &RandomConfig::default(), &mut |_| {});
    assert_eq!(log.len(), 1);
    assert_eq!(log.trials[0].trial_id, 0);
}

#[test]
fn exhaustive_random_matches_brute_force() {
    let (space, reward, ev) = (tiny_space(), RewardSpec::hard(0.2, 1.0), pipeline());
    let c = ctx(&space, &reward, &ev, 5);
    let n = space.cardinality() as u64;
    let log = run_random(&c, n, &RandomConfig { dedup: true, batch_size: 7 }, &mut |_| {});
    assert_eq!(log.len() as u64, n);
    let bf = brute_force(&c, DEFAULT_BRUTE_FORCE_CAP, CostAxis::Latency).unwrap();
    assert_eq!(log.best_reward(), Some(bf.optimum.reward));
}

#[test]
fn same_seed_same_log() {
    let (space, reward, ev) = (tiny_space(), RewardSpec::hard(0.2, 1.0), pipeline());
    let c = ctx(&space, &reward, &ev, 11);
    assert_eq!(
        run_random(&c, 50, &RandomConfig::default(), &mut |_| {}),
        run_random(&c, 50, &RandomConfig::default(), &mut |_| {})
    );
    assert_eq!(
        run_reinforce(&c, 50, &ReinforceConfig::default(), &mut |_| {}).0,
        run_reinforce(&c, 50, &ReinforceConfig::default(), &mut |_| {}).0
    );
    assert_eq!(run_ppo(&c, 70, &PpoConfig::default(), &mut |_| {}).0, run_ppo(&c, 70, &PpoConfig::default(), &mut |_| {}).0);
    let other = ctx(&space, &reward, &ev, 12);
    assert_ne!(
        run_random(&c, 50, &RandomConfig::default(), &mut |_| {}),
        run_random(&other, 50, &RandomConfig::default(), &mut |_| {})
    );
}

#[test]
fn constant_reward_leaves_policy_uniform() {
    let space = tiny_space();
    let reward = RewardSpec::hard(0.2, 1.0);
    let mut ev = Counting::new(pipeline());
    ev.constant = Some(EvalResult::valid(0.7, 0.1, 0.5, 0.5));
    let (_, state) = run_reinforce(&ctx(&space, &reward, &ev, 1), 400, &ReinforceConfig::default(), &mut |_| {});
    assert!(state.policy.logits.iter().all(|l| l.abs() < 1e-9), "{:?}", state.policy.logits);
    let (_, state) = run_ppo(&ctx(&space, &reward, &ev, 1), 400, &PpoConfig::default(), &mut |_| {});
    assert!(state.policy.logits.iter().all(|l| l.abs() < 1e-9), "{:?}", state.policy.logits);
}

#[test]
fn infeasible_latency_keeps_controller_finite() {
    let (space, ev) = (tiny_space(), pipeline());
    let reward = RewardSpec::hard(1e-6, 1.0);
    let c = ctx(&space, &reward, &ev, 2);
    let (log, state) = run_reinforce(&c, 500, &ReinforceConfig::default(), &mut |_| {});
    assert!(state.policy.logits.iter().all(|l| l.is_finite()));
    let best = log.best_reward().unwrap();
    assert!(best > 0.0 && best < 1e-3, "{best}");
    let (_, state) = run_ppo(&c, 500, &PpoConfig::default(), &mut |_| {});
    assert!(state.policy.logits.iter().all(|l| l.is_finite()));
}

#[test]
fn evaluator_calls_equal_budget_times_averaging() {
    let space = tiny_space();
    let reward = RewardSpec::hard(0.2, 1.0);
    for n in [1u32, 3, 10] {
        let ev = Counting::new(pipeline());
        let mut c = ctx(&space, &reward, &ev, 4);
        c.averaging_n = n;
        run_random(&c, 37, &RandomConfig::default(), &mut |_| {});
        run_reinforce(&c, 41, &ReinforceConfig::default(), &mut |_| {});
        run_ppo(&c, 45, &PpoConfig::default(), &mut |_| {});
        assert_eq!(ev.calls.get(), (37 + 41 + 45) * n as u64);
    }
}

#[test]
fn averaging_a_noise_free_oracle_changes_nothing() {
    let (space, reward, ev) = (tiny_space(), RewardSpec::hard(0.2, 1.0), pipeline());
    let one = ctx(&space, &reward, &ev, 8);
    let ten = SearchContext { averaging_n: 10, ..one };
    assert_eq!(run_ppo(&one, 200, &PpoConfig::default(), &mut |_| {}), run_ppo(&ten, 200, &PpoConfig::default(), &mut |_| {}));
}

#[test]
fn averaging_a_noisy_oracle_reduces_spread() {
    let space = tiny_space();
    let reward = RewardSpec::hard(10.0, 10.0);
    let noisy = SyntheticOracle::new(SyntheticOracleParams { noise_sigma: 0.01, ..Default::default() });
    let ev = Pipeline::new(build_space(SpaceName::S1MobileNetV2), SimulatorCostModel::default(), noisy);
    let fixed = JointSpace::joint(build_space(SpaceName::S1MobileNetV2))
        .unwrap()
        .fix_arch(space.arch_base.clone())
        .unwrap()
        .fix_hw(&baseline_config())
        .unwrap()
        .with_hw_knobs(&[HwKnob::IoBandwidthGbps]);
    let spread = |n: u32| {
        let c = SearchContext { averaging_n: n, ..ctx(&fixed, &reward, &ev, 1) };
        let acc: Vec<f64> = run_random(&c, 200, &RandomConfig::default(), &mut |_| {})
            .trials
            .iter()
            .map(|t| t.eval.accuracy.unwrap())
            .collect();
        let m = acc.iter().sum::<f64>() / acc.len() as f64;
        (acc.iter().map(|a| (a - m).powi(2)).sum::<f64>() / acc.len() as f64).sqrt()
    };
    let (s1, s10) = (spread(1), spread(10));
    assert!((s1 - 0.01).abs() < 0.003, "{s1}");
    assert!(s10 < s1 / 2.0, "{s1} {s10}");
}

#[test]
fn ppo_without_clipping_is_the_policy_gradient() {
    let mut policy = Policy::uniform(&[3, 2, 4]);
    policy.logits.iter_mut().enumerate().for_each(|(i, l)| *l = (i as f64 * 0.7).cos());
    let mut rng = nahas_core::rng::rng(1);
    let samples: Vec<PpoSample> = (0..32)
        .map(|i| {
            let choice = policy.sample(&mut rng);
            PpoSample { old_log_prob: policy.log_prob(&choice), advantage: (i as f64 * 1.3).sin(), choice }
        })
        .collect();
    let a = ppo_gradient(&policy, &samples, f64::INFINITY);
    let b = policy_gradient(&policy, &samples);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }

    let cfg = PpoConfig { clip_epsilon: f64::INFINITY, ..Default::default() };
    let mut p1 = policy.clone();
    let mut adam1 = nahas_core::optim::Adam::new(nahas_core::optim::AdamConfig::with_lr(cfg.learning_rate), p1.logits.len());
    ppo_update(&mut p1, &mut adam1, &samples, &cfg);
    let mut p2 = policy.clone();
    let mut adam2 = nahas_core::optim::Adam::new(nahas_core::optim::AdamConfig::with_lr(cfg.learning_rate), p2.logits.len());
    let mut g = policy_gradient(&p2, &samples);
    nahas_core::optim::clip_grad_norm(&mut g, cfg.max_grad_norm);
    adam2.step(&mut p2.logits, &g);
    for (x, y) in p1.logits.iter().zip(&p2.logits) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn clipping_stops_gradient_outside_the_trust_region() {
    let mut policy = Policy::uniform(&[2]);
    let s = PpoSample { choice: vec![0], old_log_prob: (0.5f64).ln(), advantage: 1.0 };
    policy.logits[0] = 2.0;
    assert!(ppo_gradient(&policy, std::slice::from_ref(&s), 0.2).iter().all(|g| *g == 0.0));
    assert!(ppo_gradient(&policy, std::slice::from_ref(&s), 10.0).iter().any(|g| *g != 0.0));
}

#[test]
fn policy_stays_on_the_simplex() {
    let (space, reward, ev) = (tiny_space(), RewardSpec::hard(0.2, 1.0), pipeline());
    let c = ctx(&space, &reward, &ev, 6);
    let (_, r) = run_reinforce(&c, 1500, &ReinforceConfig { learning_rate: 0.5, ..Default::default() }, &mut |_| {});
    assert!(r.policy.simplex_error() < 1e-9);
    let (_, p) = run_ppo(&c, 2000, &PpoConfig { learning_rate: 0.5, ..Default::default() }, &mut |_| {});
    assert!(p.policy.simplex_error() < 1e-9);
}

#[test]
fn reinforce_and_ppo_learn_with_larger_steps() {
    let (space, reward, ev) = (tiny_space(), RewardSpec::hard(0.2, 1.0), pipeline());
    let c = ctx(&space, &reward, &ev, 9);
    let bf = brute_force(&c, DEFAULT_BRUTE_FORCE_CAP, CostAxis::Latency).unwrap();
    let mode_reward = |p: &Policy| {
        let d = space.assemble(&p.mode());
        bf.log.trials.iter().find(|t| t.decisions == d).unwrap().reward
    };
    let (_, r) = run_reinforce(&c, 1500, &ReinforceConfig { learning_rate: 0.05, ..Default::default() }, &mut |_| {});
    assert!(mode_reward(&r.policy) >= 0.99 * bf.optimum.reward, "{}", mode_reward(&r.policy));
    let (_, p) = run_ppo(&c, 2000, &PpoConfig { learning_rate: 0.02, epochs: 4, minibatch_size: 8, ..Default::default() }, &mut |_| {});
    let uniform_mean = bf.log.trials.iter().map(|t| t.reward).sum::<f64>() / bf.log.len() as f64;
    assert!(mode_reward(&p.policy) >= 0.95 * bf.optimum.reward, "{}", mode_reward(&p.policy));
    assert!(mode_reward(&p.policy) > uniform_mean);
}

#[test]
fn stored_rewards_are_recomputable() {
    let ev = pipeline();
    let mut cfg = SearchConfig::new(SpaceName::S1MobileNetV2, ControllerKind::Reinforce, 300, RewardSpec::hard(0.2, 1.0));
    cfg.mode = SearchMode::Phase { phase1_budget: 100, initial_decisions: None };
    let log = run_search(&cfg, &ev, &mut |_| {}).unwrap();
    for t in &log.trials {
        let spec = match t.phase {
            Some(1) => cfg.reward.with_mode(RewardMode::Soft),
            _ => cfg.reward,
        };
        assert_eq!(t.reward, t.recomputed_reward(&spec));
    }
    let ids: Vec<u64> = log.trials.iter().map(|t| t.trial_id).collect();
    assert_eq!(ids, (0..300).collect::<Vec<_>>());
}

#[test]
fn phase_one_varies_only_hardware() {
    let ev = pipeline();
    let mut cfg = SearchConfig::new(SpaceName::S1MobileNetV2, ControllerKind::Random, 200, RewardSpec::hard(0.2, 1.0));
    cfg.mode = SearchMode::Phase { phase1_budget: 120, initial_decisions: None };
    let log = run_search(&cfg, &ev, &mut |_| {}).unwrap();
    let p1: Vec<&Trial> = log.phase(1).collect();
    let p2: Vec<&Trial> = log.phase(2).collect();
    assert_eq!((p1.len(), p2.len()), (120, 80));
    assert!(p1.iter().all(|t| t.decisions.arch == p1[0].decisions.arch));
    assert!(p1.iter().any(|t| t.decisions.hw != p1[0].decisions.hw));
    assert!(p2.iter().all(|t| t.decisions.hw == p2[0].decisions.hw));
    assert!(p2.iter().any(|t| t.decisions.arch != p2[0].decisions.arch));
}

#[test]
fn doubling_the_phase_budget_helps_on_average() {
    let ev = pipeline();
    let hard = RewardSpec::hard(0.15, 1.0);
    let mean_best = |budget: u64| {
        (0..5)
            .map(|seed| {
                let mut cfg = SearchConfig::new(SpaceName::S1MobileNetV2, ControllerKind::Reinforce, budget, hard);
                cfg.seed = seed;
                cfg.mode = SearchMode::Phase { phase1_budget: budget / 2, initial_decisions: None };
                let log = run_search(&cfg, &ev, &mut |_| {}).unwrap();
                log.trials.iter().map(|t| compute_reward(&t.eval, &hard)).fold(f64::MIN, f64::max)
            })
            .sum::<f64>()
            / 5.0
    };
    let (single, double) = (mean_best(500), mean_best(1000));
    assert!(double >= single, "{single} {double}");
}

#[test]
fn config_validation() {
    let mut cfg = SearchConfig::new(SpaceName::S1MobileNetV2, ControllerKind::Random, 0, RewardSpec::hard(0.2, 1.0));
    assert!(matches!(cfg.validate(), Err(SearchError::Budget)));
    cfg.budget = 10;
    cfg.mode = SearchMode::Phase { phase1_budget: 10, initial_decisions: None };
    assert!(matches!(cfg.validate(), Err(SearchError::PhaseSplit { .. })));
    cfg.mode = SearchMode::Joint;
    cfg.arch_points = Some(vec!["block99.kernel".into()]);
    assert!(matches!(cfg.validate(), Err(SearchError::UnknownDecision(_))));
    cfg.arch_points = None;
    cfg.reward_averaging_n = 0;
    assert!(matches!(cfg.validate(), Err(SearchError::Averaging)));
}

#[test]
fn config_json_round_trip_and_defaults() {
    let text = r#"{"space":"S1_mobilenetv2","controller":"ppo","budget":5,
        "reward":{"t_latency":0.2,"t_area":1.0,"mode":"hard","p":0.0,"q":-1.0},
        "mode":{"kind":"nas_only"}}"#;
    let cfg: SearchConfig = serde_json::from_str(text).unwrap();
    assert_eq!(cfg.mode, SearchMode::NasOnly { config: baseline_config() });
    assert_eq!(cfg.reward_averaging_n, 1);
    assert_eq!(cfg.ppo, PpoConfig::default());
    let back: SearchConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert!(serde_json::from_str::<SearchConfig>(&text.replace("\"ppo\"", "\"bogus\"")).is_err());
}

#[test]
fn nas_only_keeps_the_accelerator() {
    let ev = pipeline();
    let mut cfg = SearchConfig::new(SpaceName::S1MobileNetV2, ControllerKind::Random, 30, RewardSpec::hard(0.2, 1.0));
    cfg.mode = SearchMode::NasOnly { config: baseline_config() };
    let log = run_search(&cfg, &ev, &mut |_| {}).unwrap();
    assert!(log.trials.iter().all(|t| t.config == baseline_config()));
    cfg.mode = SearchMode::HasOnly { decisions: None };
    let log = run_search(&cfg, &ev, &mut |_| {}).unwrap();
    let template = build_space(SpaceName::S1MobileNetV2).template_decisions().unwrap();
    assert!(log.trials.iter().all(|t| t.decisions.arch == template));
}

#[test]
fn brute_force_on_two_points_and_cap() {
    let space = JointSpace::joint(build_space(SpaceName::S1MobileNetV2))
        .unwrap()
        .with_arch_points(&["block1.expansion".into()])
        .unwrap()
        .with_hw_knobs(&[]);
    let (reward, ev) = (RewardSpec::hard(0.5, 1.0), pipeline());
    let c = ctx(&space, &reward, &ev, 0);
    let bf = brute_force(&c, 2, CostAxis::Latency).unwrap();
    assert_eq!(bf.log.len(), 2);
    assert_eq!(bf.optimum.reward, bf.log.trials[0].reward.max(bf.log.trials[1].reward));
    assert!(matches!(brute_force(&c, 1, CostAxis::Latency), Err(SearchError::CapExceeded { size: 2, cap: 1 })));
}

#[test]
fn sampled_frontier_is_inside_the_exhaustive_one() {
    let (space, reward, ev) = (tiny_space(), RewardSpec::hard(0.2, 1.0), pipeline());
    let c = ctx(&space, &reward, &ev, 0);
    let bf = brute_force(&c, DEFAULT_BRUTE_FORCE_CAP, CostAxis::Latency).unwrap();
    for seed in 0..5 {
        let sample = run_random(&ctx(&space, &reward, &ev, seed), 40, &RandomConfig::default(), &mut |_| {});
        for axis in [CostAxis::Latency, CostAxis::Energy] {
            let full = pareto_frontier(&bf.log.trials, axis);
            let part = pareto_frontier(&sample.trials, axis);
            let full_pts = frontier_points(&full, axis);
            let cmp = compare_frontiers(&full_pts, &frontier_points(&part, axis));
            assert!(cmp.weakly_dominates);
        }
    }
    let frontier = pareto_frontier(&bf.log.trials, CostAxis::Latency);
    assert!(frontier.windows(2).all(|w| w[0].eval.latency_ms <= w[1].eval.latency_ms));
}
