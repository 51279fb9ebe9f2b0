//! Thread-parallel evaluation with deterministic result order.

use std::num::NonZeroUsize;
use std::thread;
use std::time::Instant;

use nahas_core::nas::SearchSpaceDef;
use nahas_core::oracle::{AccuracyOracle, CostModel, EvaluatorKind, SimulatorCostModel};
use nahas_core::search::{BatchEvaluator, EvalRequest, EvalResponse, Pipeline};
use nahas_core::surrogate::{candidate, label, Record};

/// Maps `f` over `items` on up to `workers` scoped threads; output order
/// matches input order.
pub fn par_map<T: Sync, U: Send>(items: &[T], workers: NonZeroUsize, f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = workers.get().min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("evaluation worker panicked")).collect()
    })
}

/// [`Pipeline`] evaluated on a worker pool, optionally timing each request.
pub struct ParallelEvaluator<C, O> {
    pub pipeline: Pipeline<C, O>,
    pub workers: NonZeroUsize,
    pub timings: bool,
}

impl<C: CostModel + Sync, O: AccuracyOracle + Sync> BatchEvaluator for ParallelEvaluator<C, O> {
    fn kind(&self) -> EvaluatorKind {
        self.pipeline.kind()
    }

    fn evaluate_batch(&self, requests: &[EvalRequest]) -> Vec<EvalResponse> {
        par_map(requests, self.workers, |r| {
            let start = self.timings.then(Instant::now);
            let result = self.pipeline.evaluate_one(r);
            EvalResponse { result, wall_time_s: start.map(|s| s.elapsed().as_secs_f64()) }
        })
    }
}

/// Same records as `nahas_core::surrogate::generate_dataset`, with candidates
/// labeled in parallel.
pub fn generate_dataset(
    def: &SearchSpaceDef,
    n: usize,
    seed: u64,
    sim: &SimulatorCostModel,
    workers: NonZeroUsize,
) -> Vec<Record> {
    let mut out = Vec::with_capacity(n);
    let mut next = 0u64;
    let chunk = 4096u64.max(workers.get() as u64);
    while out.len() < n {
        let attempts: Vec<u64> = (next..next + chunk).collect();
        next += chunk;
        let labeled = par_map(&attempts, workers, |&a| {
            let (d, cfg) = candidate(def, seed, a);
            label(def, d, cfg, sim)
        });
        out.extend(labeled.into_iter().flatten().take(n - out.len()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nahas_core::nas::{build_space, SpaceName};

    #[test]
    fn parallel_dataset_matches_serial() {
        let s1 = build_space(SpaceName::S1MobileNetV2);
        let sim = SimulatorCostModel::default();
        let serial = nahas_core::surrogate::generate_dataset(&s1, 300, 4, &sim);
        let parallel = generate_dataset(&s1, 300, 4, &sim, NonZeroUsize::new(3).unwrap());
        assert_eq!(serial, parallel);
    }

    #[test]
    fn par_map_keeps_order() {
        let xs: Vec<u32> = (0..1000).collect();
        assert_eq!(par_map(&xs, NonZeroUsize::new(7).unwrap(), |x| x * 2), xs.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
