use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::controllers::SearchContext;
use super::pareto::{pareto_frontier, CostAxis};
use super::trial::{Trial, TrialLog};
use super::SearchError;

pub const DEFAULT_BRUTE_FORCE_CAP: u128 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForce {
    /// Every point, in rank order.
    pub log: TrialLog,
    pub optimum: Trial,
    pub frontier: Vec<Trial>,
}

/// Exhaustive evaluation of the free decisions of `ctx.space`.
pub fn brute_force(ctx: &SearchContext<'_>, cap: u128, axis: CostAxis) -> Result<BruteForce, SearchError> {
    let n = ctx.space.cardinality();
    if n > cap {
        return Err(SearchError::CapExceeded { size: n, cap });
    }
    let mut log = TrialLog::default();
    let mut rank = 0u128;
    while rank < n {
        let end = (rank + 256).min(n);
        let choices: Vec<Vec<usize>> = (rank..end).map(|r| ctx.space.unrank(r)).collect();
        log.trials.extend(ctx.evaluate_choices(&choices, ctx.first_trial_id + rank as u64));
        rank = end;
    }
    let optimum = log.best().cloned().ok_or(SearchError::EmptySpace)?;
    let frontier = pareto_frontier(&log.trials, axis).into_iter().cloned().collect();
    Ok(BruteForce { log, optimum, frontier })
}
