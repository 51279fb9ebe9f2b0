//! Weighted-product reward:
//!
//! `accuracy * (latency / T_lat)^w0 * (area / T_area)^w1`
//!
//! where each exponent is `p` when its constraint holds and `q` otherwise.
//! Hard mode uses `(p, q) = (0, -1)`; soft mode `p = q = -0.07`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::powf;
use crate::oracle::EvalResult;

pub const SOFT_EXPONENT: f64 = -0.07;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Hard,
    Soft,
}

/// Optional third factor on energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTarget {
    pub t_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSpec {
    /// Latency target in milliseconds.
    pub t_latency: f64,
    /// Area target in normalized units.
    pub t_area: f64,
    pub mode: RewardMode,
    pub p: f64,
    pub q: f64,
    #[serde(default)]
    pub invalid_penalty: f64,
    #[serde(default)]
    pub energy: Option<EnergyTarget>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("targets must be positive (t_latency={t_latency}, t_area={t_area})")]
    Targets { t_latency: f64, t_area: f64 },
    #[error("hard mode requires (p, q) = (0, -1), got ({p}, {q})")]
    HardExponents { p: f64, q: f64 },
    #[error("energy target must be positive")]
    EnergyTarget,
}

impl RewardSpec {
    pub fn hard(t_latency: f64, t_area: f64) -> Self {
        RewardSpec { t_latency, t_area, mode: RewardMode::Hard, p: 0.0, q: -1.0, invalid_penalty: 0.0, energy: None }
    }

    pub fn soft(t_latency: f64, t_area: f64) -> Self {
        RewardSpec {
            t_latency,
            t_area,
            mode: RewardMode::Soft,
            p: SOFT_EXPONENT,
            q: SOFT_EXPONENT,
            invalid_penalty: 0.0,
            energy: None,
        }
    }

    /// Same targets, other mode.
    pub fn with_mode(&self, mode: RewardMode) -> Self {
        let base = match mode {
            RewardMode::Hard => Self::hard(self.t_latency, self.t_area),
            RewardMode::Soft => Self::soft(self.t_latency, self.t_area),
        };
        RewardSpec { invalid_penalty: self.invalid_penalty, energy: self.energy, ..base }
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.t_latency > 0.0 && self.t_area > 0.0) {
            return Err(RewardError::Targets { t_latency: self.t_latency, t_area: self.t_area });
        }
        if self.mode == RewardMode::Hard && (self.p != 0.0 || self.q != -1.0) {
            return Err(RewardError::HardExponents { p: self.p, q: self.q });
        }
        if matches!(self.energy, Some(e) if !(e.t_energy > 0.0)) {
            return Err(RewardError::EnergyTarget);
        }
        Ok(())
    }

    fn factor(&self, value: f64, target: f64) -> f64 {
        let w = if value <= target { self.p } else { self.q };
        if w == 0.0 {
            1.0
        } else {
            powf(value / target, w)
        }
    }

    /// Reward from raw metrics.
    pub fn reward_of(&self, accuracy: f64, latency_ms: f64, area: f64, energy_mj: Option<f64>) -> f64 {
        let mut r = accuracy * self.factor(latency_ms, self.t_latency) * self.factor(area, self.t_area);
        if let (Some(target), Some(e)) = (self.energy, energy_mj) {
            r *= self.factor(e, target.t_energy);
        }
        r
    }
}

pub fn compute_reward(r: &EvalResult, spec: &RewardSpec) -> f64 {
    match (r.valid, r.accuracy, r.latency_ms) {
        (true, Some(acc), Some(lat)) => spec.reward_of(acc, lat, r.area, r.energy_mj),
        _ => spec.invalid_penalty,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(acc: f64, lat: f64, area: f64) -> EvalResult {
        EvalResult::valid(acc, lat, 0.0, area)
    }

    #[test]
    fn worked_examples() {
        let hard = RewardSpec::hard(0.5, 1.0);
        assert_eq!(compute_reward(&eval(0.75, 0.4, 0.9), &hard), 0.75);
        assert!((compute_reward(&eval(0.75, 0.6, 0.9), &hard) - 0.625).abs() < 1e-12);
        let soft = RewardSpec::soft(0.5, 1.0);
        let expected = 0.75 * powf(1.2, -0.07);
        let got = compute_reward(&eval(0.75, 0.6, 1.0), &soft);
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.74049).abs() < 1e-5, "{got}");
    }

    #[test]
    fn invalid_gets_penalty() {
        let spec = RewardSpec { invalid_penalty: -1.0, ..RewardSpec::hard(1.0, 1.0) };
        let r = EvalResult::invalid(1.0, alloc::vec::Vec::new());
        assert_eq!(compute_reward(&r, &spec), -1.0);
    }

    #[test]
    fn energy_factor_optional() {
        let mut spec = RewardSpec::hard(1.0, 1.0);
        spec.energy = Some(EnergyTarget { t_energy: 0.5 });
        let r = EvalResult { energy_mj: Some(1.0), ..eval(0.8, 0.5, 0.5) };
        assert!((compute_reward(&r, &spec) - 0.4).abs() < 1e-12);
        spec.energy = None;
        assert_eq!(compute_reward(&r, &spec), 0.8);
    }

    #[test]
    fn validation() {
        assert!(RewardSpec::hard(0.3, 1.0).validate().is_ok());
        assert!(RewardSpec { p: -0.07, ..RewardSpec::hard(0.3, 1.0) }.validate().is_err());
        assert!(RewardSpec::soft(0.0, 1.0).validate().is_err());
    }

    #[test]
    fn soft_is_continuous_at_boundary() {
        let s = RewardSpec::soft(0.5, 1.0);
        let below = s.reward_of(0.7, 0.5 - 1e-12, 1.0, None);
        let above = s.reward_of(0.7, 0.5 + 1e-12, 1.0, None);
        assert!((below - above).abs() < 1e-10);
    }
}
