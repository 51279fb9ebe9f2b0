use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::trial::Trial;

/// Cost axis traded against accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostAxis {
    #[default]
    Latency,
    Energy,
}

impl CostAxis {
    pub fn cost(self, t: &Trial) -> Option<f64> {
        match self {
            CostAxis::Latency => t.eval.latency_ms,
            CostAxis::Energy => t.eval.energy_mj,
        }
    }
}

/// (accuracy, cost) of a valid trial.
fn point(t: &Trial, axis: CostAxis) -> Option<(f64, f64)> {
    match (t.eval.valid, t.eval.accuracy, axis.cost(t)) {
        (true, Some(a), Some(c)) if a.is_finite() && c.is_finite() => Some((a, c)),
        _ => None,
    }
}

/// Whether `a` dominates `b`: no worse on both axes, better on one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 <= b.1 && (a.0 > b.0 || a.1 < b.1)
}

/// Nondominated valid trials, ordered by cost then trial id. Repeated
/// evaluations of one point appear once (the earliest); distinct points with
/// identical (accuracy, cost) are all kept.
pub fn pareto_frontier<'a>(trials: impl IntoIterator<Item = &'a Trial>, axis: CostAxis) -> Vec<&'a Trial> {
    let mut seen = BTreeSet::new();
    let mut pts: Vec<(&Trial, (f64, f64))> = trials
        .into_iter()
        .filter_map(|t| point(t, axis).map(|p| (t, p)))
        .collect();
    pts.sort_by_key(|(t, _)| t.trial_id);
    pts.retain(|(t, _)| seen.insert((&t.decisions.arch.0, t.decisions.hw)));
    pts.sort_by(|(ta, a), (tb, b)| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(Ordering::Equal)
            .then(b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal))
            .then(ta.trial_id.cmp(&tb.trial_id))
    });
    let mut out: Vec<&Trial> = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for (t, p) in pts {
        let keep = match last {
            None => true,
            Some(l) => p.0 > l.0 || p == l,
        };
        if keep {
            out.push(t);
            last = Some(p);
        }
    }
    out
}

/// How frontier `a` compares with frontier `b`, both given as (accuracy, cost).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierComparison {
    /// Every point of `b` is matched or beaten by some point of `a`.
    pub weakly_dominates: bool,
    /// Points of `b` strictly dominated by some point of `a`.
    pub strictly_dominated_points: usize,
}

pub fn compare_frontiers(a: &[(f64, f64)], b: &[(f64, f64)]) -> FrontierComparison {
    let weakly_dominates = b.iter().all(|pb| a.iter().any(|pa| pa.0 >= pb.0 && pa.1 <= pb.1));
    let strictly_dominated_points = b.iter().filter(|pb| a.iter().any(|pa| dominates(*pa, **pb))).count();
    FrontierComparison { weakly_dominates, strictly_dominated_points }
}

pub fn frontier_points(frontier: &[&Trial], axis: CostAxis) -> Vec<(f64, f64)> {
    frontier.iter().filter_map(|t| point(t, axis)).collect()
}
