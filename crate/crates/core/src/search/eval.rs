use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::accel::{AcceleratorConfig, InvalidReason};
use crate::math::RunningMean;
use crate::nas::{decode, DecisionVector, SearchSpaceDef};
use crate::oracle::{evaluate, AccuracyOracle, CostModel, EvalResult, EvaluatorKind};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRequest {
    pub arch: DecisionVector,
    pub config: AcceleratorConfig,
    /// Distinguishes repeated evaluations of one pair.
    pub draw: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResponse {
    pub result: EvalResult,
    pub wall_time_s: Option<f64>,
}

/// Evaluates a batch of requests; responses come back in request order.
/// Implementations may evaluate concurrently.
pub trait BatchEvaluator {
    fn kind(&self) -> EvaluatorKind;
    fn evaluate_batch(&self, requests: &[EvalRequest]) -> Vec<EvalResponse>;
}

impl<T: BatchEvaluator + ?Sized> BatchEvaluator for &T {
    fn kind(&self) -> EvaluatorKind {
        (**self).kind()
    }
    fn evaluate_batch(&self, requests: &[EvalRequest]) -> Vec<EvalResponse> {
        (**self).evaluate_batch(requests)
    }
}

/// Decode, validate, price and score one request at a time.
#[derive(Debug, Clone)]
pub struct Pipeline<C, O> {
    pub space: SearchSpaceDef,
    pub cost: C,
    pub oracle: O,
}

impl<C: CostModel, O: AccuracyOracle> Pipeline<C, O> {
    pub fn new(space: SearchSpaceDef, cost: C, oracle: O) -> Self {
        Pipeline { space, cost, oracle }
    }

    pub fn evaluate_one(&self, r: &EvalRequest) -> EvalResult {
        match decode(&self.space, &r.arch) {
            Ok(arch) => evaluate(&arch, &r.config, &self.cost, &self.oracle, r.draw),
            Err(e) => EvalResult::invalid(
                self.cost.area(&r.config),
                vec![InvalidReason::Evaluator { message: format!("{e}") }],
            ),
        }
    }
}

impl<C: CostModel, O: AccuracyOracle> BatchEvaluator for Pipeline<C, O> {
    fn kind(&self) -> EvaluatorKind {
        self.cost.kind()
    }

    fn evaluate_batch(&self, requests: &[EvalRequest]) -> Vec<EvalResponse> {
        requests.iter().map(|r| EvalResponse { result: self.evaluate_one(r), wall_time_s: None }).collect()
    }
}

/// Folds repeated evaluations of one pair: accuracy is averaged, the
/// deterministic hardware metrics are taken from the first draw.
pub fn average(responses: &[EvalResponse]) -> EvalResponse {
    let first = &responses[0];
    let mut result = first.result.clone();
    if result.valid {
        let mut mean = RunningMean::default();
        for r in responses {
            if let Some(a) = r.result.accuracy {
                mean.push(a);
            }
        }
        result.accuracy = Some(mean.mean());
    }
    let wall_time_s = responses.iter().map(|r| r.wall_time_s).sum::<Option<f64>>();
    EvalResponse { result, wall_time_s }
}
