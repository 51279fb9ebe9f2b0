use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::accel::{AcceleratorConfig, HwKnob};
use crate::nas::{DecisionVector, SearchSpaceDef, SpaceName};

/// One-hot groups: every architecture decision point in definition order,
/// then the seven hardware knobs in table order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub space: SpaceName,
    pub arch_groups: Vec<(String, usize)>,
    pub hw_groups: Vec<(HwKnob, usize)>,
}

impl FeatureLayout {
    pub fn for_space(def: &SearchSpaceDef) -> Self {
        FeatureLayout {
            space: def.name,
            arch_groups: def.decision_points.iter().map(|d| (d.id.clone(), d.domain.len())).collect(),
            hw_groups: HwKnob::ALL.iter().map(|k| (*k, k.domain_len())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.group_sizes().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn group_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.arch_groups.iter().map(|g| g.1).chain(self.hw_groups.iter().map(|g| g.1))
    }

    /// Whether `def` has exactly this layout's decision points.
    pub fn matches(&self, def: &SearchSpaceDef) -> bool {
        *self == FeatureLayout::for_space(def)
    }

    pub fn encode(&self, d: &DecisionVector, cfg: &AcceleratorConfig) -> Result<FeatureVector, SurrogateError> {
        if d.len() != self.arch_groups.len() {
            return Err(SurrogateError::Decisions { expected: self.arch_groups.len(), got: d.len() });
        }
        let hw = cfg.to_indices()?;
        let mut out = vec![0.0; self.len()];
        let mut offset = 0;
        for ((_, size), &idx) in self.arch_groups.iter().zip(d.as_slice()) {
            if idx >= *size {
                return Err(SurrogateError::Decisions { expected: *size, got: idx });
            }
            out[offset + idx] = 1.0;
            offset += size;
        }
        for ((_, size), &idx) in self.hw_groups.iter().zip(hw.iter()) {
            out[offset + idx] = 1.0;
            offset += size;
        }
        Ok(FeatureVector(out))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn featurize(
    def: &SearchSpaceDef,
    d: &DecisionVector,
    cfg: &AcceleratorConfig,
) -> Result<FeatureVector, SurrogateError> {
    def.check(d)?;
    FeatureLayout::for_space(def).encode(d, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::baseline_config;
    use crate::nas::{build_space, sample_uniform};

    #[test]
    fn s1_feature_length() {
        let s1 = build_space(SpaceName::S1MobileNetV2);
        let f = featurize(&s1, &sample_uniform(&s1, 0), &baseline_config()).unwrap();
        assert_eq!(f.len(), 17 * 3 + 16 * 2 + (5 + 5 + 4 + 4 + 5 + 5 + 5));
        assert_eq!(f.len(), 116);
        assert_eq!(f.0.iter().sum::<f64>(), (33 + 7) as f64);
    }

    #[test]
    fn groups_are_one_hot() {
        let s1 = build_space(SpaceName::S1MobileNetV2);
        let layout = FeatureLayout::for_space(&s1);
        let f = layout.encode(&sample_uniform(&s1, 9), &baseline_config()).unwrap();
        let mut offset = 0;
        for size in layout.group_sizes() {
            assert_eq!(f.0[offset..offset + size].iter().sum::<f64>(), 1.0);
            offset += size;
        }
    }

    #[test]
    fn rejects_off_domain_config() {
        let s1 = build_space(SpaceName::S1MobileNetV2);
        let cfg = AcceleratorConfig { register_file_kb: 48, ..baseline_config() };
        assert!(featurize(&s1, &sample_uniform(&s1, 0), &cfg).is_err());
    }
}
