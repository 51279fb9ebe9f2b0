use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::templates::{efficientnet_b0, mobilenet_v2};
use super::{ArchitectureSpec, NasError, OpType};
use crate::math::floor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceName {
    #[serde(rename = "S1_mobilenetv2")]
    S1MobileNetV2,
    #[serde(rename = "S2_efficientnet")]
    S2EfficientNet,
    #[serde(rename = "evolved")]
    Evolved,
}

impl SpaceName {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceName::S1MobileNetV2 => "S1_mobilenetv2",
            SpaceName::S2EfficientNet => "S2_efficientnet",
            SpaceName::Evolved => "evolved",
        }
    }
}

impl fmt::Display for SpaceName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpaceName {
    type Err = NasError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S1_mobilenetv2" | "S1" | "s1" => Ok(SpaceName::S1MobileNetV2),
            "S2_efficientnet" | "S2" | "s2" => Ok(SpaceName::S2EfficientNet),
            "evolved" => Ok(SpaceName::Evolved),
            other => Err(NasError::UnknownSpace(other.to_string())),
        }
    }
}

/// The block attribute a decision point controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKnob {
    Kernel,
    Expansion,
    OpType,
    FilterScale,
    Groups,
}

impl ArchKnob {
    pub fn as_str(self) -> &'static str {
        match self {
            ArchKnob::Kernel => "kernel",
            ArchKnob::Expansion => "expansion",
            ArchKnob::OpType => "op_type",
            ArchKnob::FilterScale => "filter_scale",
            ArchKnob::Groups => "groups",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KnobValue {
    Int(u32),
    Scale(f64),
    Op(OpType),
}

impl fmt::Display for KnobValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KnobValue::Int(v) => write!(f, "{v}"),
            KnobValue::Scale(v) => write!(f, "{v}"),
            KnobValue::Op(op) => write!(f, "{op}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPoint {
    pub id: String,
    pub block: usize,
    pub knob: ArchKnob,
    pub domain: Vec<KnobValue>,
}

/// One chosen domain index per decision point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionVector(pub Vec<usize>);

impl DecisionVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl core::ops::Index<usize> for DecisionVector {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

impl From<Vec<usize>> for DecisionVector {
    fn from(v: Vec<usize>) -> Self {
        DecisionVector(v)
    }
}

/// A search space: a template network plus the decision points that edit it.
/// Attributes without a decision point keep their template value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpaceDef {
    pub name: SpaceName,
    pub decision_points: Vec<DecisionPoint>,
    pub template: ArchitectureSpec,
}

impl SearchSpaceDef {
    pub fn domain_sizes(&self) -> Vec<usize> {
        self.decision_points.iter().map(|d| d.domain.len()).collect()
    }

    /// Number of distinct decision vectors (empty product is 1).
    pub fn cardinality(&self) -> u128 {
        self.decision_points.iter().map(|d| d.domain.len() as u128).product()
    }

    pub fn check(&self, d: &DecisionVector) -> Result<(), NasError> {
        if d.len() != self.decision_points.len() {
            return Err(NasError::DecisionLength { expected: self.decision_points.len(), got: d.len() });
        }
        for (dp, &idx) in self.decision_points.iter().zip(d.as_slice()) {
            if idx >= dp.domain.len() {
                return Err(NasError::DecisionIndex { id: dp.id.clone(), index: idx, size: dp.domain.len() });
            }
        }
        Ok(())
    }

    /// Keeps only the named decision points, in the given order. Dropped
    /// points fall back to the template.
    pub fn restrict(&self, ids: &[&str]) -> Result<SearchSpaceDef, NasError> {
        let mut points = Vec::with_capacity(ids.len());
        for id in ids {
            let dp = self
                .decision_points
                .iter()
                .find(|d| d.id == *id)
                .ok_or_else(|| NasError::DanglingDecision(id.to_string()))?;
            points.push(dp.clone());
        }
        Ok(SearchSpaceDef { decision_points: points, ..self.clone() })
    }

    /// The decision vector that reproduces the template.
    pub fn template_decisions(&self) -> Result<DecisionVector, NasError> {
        encode(self, &self.template)
    }

    /// Checks that ids are unique, domains non-empty and blocks exist.
    pub fn validate(&self) -> Result<(), NasError> {
        for (i, dp) in self.decision_points.iter().enumerate() {
            if dp.domain.is_empty() {
                return Err(NasError::BadLayer { layer: dp.id.clone(), reason: "empty decision domain" });
            }
            if dp.block >= self.template.blocks.len() {
                return Err(NasError::DanglingDecision(dp.id.clone()));
            }
            if self.decision_points[..i].iter().any(|o| o.id == dp.id) {
                return Err(NasError::BadLayer { layer: dp.id.clone(), reason: "duplicate decision id" });
            }
        }
        Ok(())
    }
}

const KERNELS: [u32; 3] = [3, 5, 7];
const EXPANSIONS: [u32; 2] = [3, 6];
const FILTER_SCALES: [f64; 3] = [0.75, 1.0, 1.25];
const GROUPS: [u32; 3] = [1, 2, 4];

fn point(block: usize, knob: ArchKnob, domain: Vec<KnobValue>) -> DecisionPoint {
    DecisionPoint { id: format!("block{block}.{}", knob.as_str()), block, knob, domain }
}

fn ints(values: &[u32]) -> Vec<KnobValue> {
    values.iter().map(|&v| KnobValue::Int(v)).collect()
}

/// Kernel choice on every block, expansion choice on every block but the first.
fn ibn_points(n_blocks: usize) -> Vec<DecisionPoint> {
    let mut points = Vec::new();
    for b in 0..n_blocks {
        points.push(point(b, ArchKnob::Kernel, ints(&KERNELS)));
        if b > 0 {
            points.push(point(b, ArchKnob::Expansion, ints(&EXPANSIONS)));
        }
    }
    points
}

pub fn build_space(name: SpaceName) -> SearchSpaceDef {
    match name {
        SpaceName::S1MobileNetV2 => {
            let template = mobilenet_v2();
            SearchSpaceDef { name, decision_points: ibn_points(template.blocks.len()), template }
        }
        SpaceName::S2EfficientNet => {
            let template = efficientnet_b0();
            SearchSpaceDef { name, decision_points: ibn_points(template.blocks.len()), template }
        }
        SpaceName::Evolved => evolved_space_with_fused(0),
    }
}

/// The evolved space over the EfficientNet-B0 layout. `fused_early` sets how
/// many leading template blocks start out as Fused-IBN.
pub fn evolved_space_with_fused(fused_early: usize) -> SearchSpaceDef {
    let mut template = efficientnet_b0();
    template.name = String::from("evolved");
    for block in template.blocks.iter_mut().take(fused_early) {
        block.op_type = OpType::FusedIbn;
    }
    template.propagate_shapes().expect("fused template is consistent");
    let mut points = Vec::new();
    for b in 0..template.blocks.len() {
        points.push(point(b, ArchKnob::OpType, [OpType::Ibn, OpType::FusedIbn].map(KnobValue::Op).to_vec()));
        points.push(point(b, ArchKnob::Kernel, ints(&KERNELS)));
        if b > 0 {
            points.push(point(b, ArchKnob::Expansion, ints(&EXPANSIONS)));
        }
        points.push(point(b, ArchKnob::FilterScale, FILTER_SCALES.map(KnobValue::Scale).to_vec()));
        points.push(point(b, ArchKnob::Groups, ints(&GROUPS)));
    }
    SearchSpaceDef { name: SpaceName::Evolved, decision_points: points, template }
}

/// Scaled channel count, rounded to the nearest multiple of 8 (minimum 8).
pub(crate) fn scaled_channels(base: u32, scale: f64) -> u32 {
    let eighths = floor(base as f64 * scale / 8.0 + 0.5) as u32;
    eighths.max(1) * 8
}

pub fn decode(def: &SearchSpaceDef, d: &DecisionVector) -> Result<ArchitectureSpec, NasError> {
    def.check(d)?;
    let mut arch = def.template.clone();
    for (dp, &idx) in def.decision_points.iter().zip(d.as_slice()) {
        let block = arch.blocks.get_mut(dp.block).ok_or_else(|| NasError::DanglingDecision(dp.id.clone()))?;
        let value = dp.domain[idx];
        match (dp.knob, value) {
            (ArchKnob::Kernel, KnobValue::Int(k)) => block.kernel = k,
            (ArchKnob::Expansion, KnobValue::Int(e)) => block.expansion = e,
            (ArchKnob::Groups, KnobValue::Int(g)) => block.groups = g,
            (ArchKnob::OpType, KnobValue::Op(op)) if matches!(op, OpType::Ibn | OpType::FusedIbn) => {
                block.op_type = op
            }
            (ArchKnob::FilterScale, KnobValue::Scale(s)) => {
                block.filter_scale = s;
                block.out_channels = scaled_channels(block.base_channels, s);
            }
            _ => return Err(NasError::ValueNotInDomain { id: dp.id.clone(), value: value.to_string() }),
        }
    }
    arch.propagate_shapes()?;
    Ok(arch)
}

/// Reads the decisions back out of a network built from `def`'s template.
pub fn encode(def: &SearchSpaceDef, arch: &ArchitectureSpec) -> Result<DecisionVector, NasError> {
    let mut out = Vec::with_capacity(def.decision_points.len());
    for dp in &def.decision_points {
        let block = arch.blocks.get(dp.block).ok_or_else(|| NasError::DanglingDecision(dp.id.clone()))?;
        let value = match dp.knob {
            ArchKnob::Kernel => KnobValue::Int(block.kernel),
            ArchKnob::Expansion => KnobValue::Int(block.expansion),
            ArchKnob::Groups => KnobValue::Int(block.groups),
            ArchKnob::OpType => KnobValue::Op(block.op_type),
            ArchKnob::FilterScale => KnobValue::Scale(block.filter_scale),
        };
        let idx = dp
            .domain
            .iter()
            .position(|v| *v == value)
            .ok_or_else(|| NasError::ValueNotInDomain { id: dp.id.clone(), value: value.to_string() })?;
        out.push(idx);
    }
    Ok(DecisionVector(out))
}

/// Independent uniform choice per decision point.
pub fn sample_uniform(def: &SearchSpaceDef, seed: u64) -> DecisionVector {
    let mut rng = crate::rng::rng(seed);
    DecisionVector(def.decision_points.iter().map(|dp| rng.gen_range(0..dp.domain.len())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nas::{count_macs, mobilenet_v2};
    use alloc::vec;

    #[test]
    fn s1_s2_cardinalities() {
        assert_eq!(build_space(SpaceName::S1MobileNetV2).cardinality(), 8_463_329_722_368);
        assert_eq!(build_space(SpaceName::S2EfficientNet).cardinality(), 1_410_554_953_728);
        let s1 = build_space(SpaceName::S1MobileNetV2);
        assert_eq!(s1.decision_points.iter().filter(|d| d.knob == ArchKnob::Kernel).count(), 17);
        assert_eq!(s1.decision_points.iter().filter(|d| d.knob == ArchKnob::Expansion).count(), 16);
    }

    #[test]
    fn empty_space_has_cardinality_one() {
        let s = build_space(SpaceName::S1MobileNetV2).restrict(&[]).unwrap();
        assert_eq!(s.cardinality(), 1);
        assert_eq!(decode(&s, &DecisionVector::default()).unwrap(), s.template);
    }

    #[test]
    fn all_k3_e6_is_mobilenet_v2() {
        let s1 = build_space(SpaceName::S1MobileNetV2);
        let d = DecisionVector(
            s1.decision_points.iter().map(|dp| if dp.knob == ArchKnob::Kernel { 0 } else { 1 }).collect(),
        );
        assert_eq!(decode(&s1, &d).unwrap(), mobilenet_v2());
        assert_eq!(s1.template_decisions().unwrap(), d);
    }

    #[test]
    fn evolved_fused_block() {
        let mut def = evolved_space_with_fused(0);
        // Put a 64-channel, 14x14 block in the template to match the worked example.
        def.template.input_resolution = 14;
        def.template.stem = crate::nas::LayerSpec::conv(1, 64, 1);
        def.template.blocks = vec![crate::nas::LayerSpec::ibn(3, 6, 64, 1)];
        def.template.head.clear();
        def.template.propagate_shapes().unwrap();
        let def = def.restrict(&["block0.op_type", "block0.kernel"]).unwrap();

        let fused = decode(&def, &DecisionVector(vec![1, 0])).unwrap();
        let ibn = decode(&def, &DecisionVector(vec![0, 0])).unwrap();
        let block_macs = |a: &ArchitectureSpec| count_macs(a) - a.stem.primitives("s")[0].macs();
        assert_eq!(block_macs(&fused), 48_168_960);
        assert_eq!(block_macs(&ibn), 10_311_168);
        let p = fused.blocks[0].primitives("b");
        assert_eq!((p[0].kernel, p[0].input.c, p[0].output.c), (3, 64, 384));
    }

    #[test]
    fn filter_scaling_rounds_to_eight() {
        assert_eq!(scaled_channels(16, 0.75), 16);
        assert_eq!(scaled_channels(16, 1.25), 24);
        assert_eq!(scaled_channels(40, 0.75), 32);
        assert_eq!(scaled_channels(4, 0.75), 8);
        assert_eq!(scaled_channels(320, 1.25), 400);
    }

    #[test]
    fn decode_rejects_bad_index() {
        let s1 = build_space(SpaceName::S1MobileNetV2);
        let mut d = sample_uniform(&s1, 1);
        d.0[0] = 3;
        assert!(matches!(decode(&s1, &d), Err(NasError::DecisionIndex { .. })));
        assert!(matches!(decode(&s1, &DecisionVector(vec![0])), Err(NasError::DecisionLength { .. })));
    }

    #[test]
    fn sampling_is_seeded() {
        let s = build_space(SpaceName::Evolved);
        assert_eq!(sample_uniform(&s, 42), sample_uniform(&s, 42));
        assert_ne!(sample_uniform(&s, 42), sample_uniform(&s, 43));
    }

    #[test]
    fn single_option_domain_always_chosen() {
        let mut s = build_space(SpaceName::S1MobileNetV2).restrict(&["block3.kernel"]).unwrap();
        s.decision_points[0].domain.truncate(1);
        for seed in 0..50 {
            assert_eq!(sample_uniform(&s, seed).0, vec![0]);
        }
    }

    #[test]
    fn uniform_frequencies_within_three_sigma() {
        let s = build_space(SpaceName::S1MobileNetV2).restrict(&["block0.kernel"]).unwrap();
        let n = 10_000;
        let mut counts = [0usize; 3];
        for seed in 0..n {
            counts[sample_uniform(&s, crate::rng::derive(7, seed))[0]] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = crate::math::sqrt(n as f64 * p * (1.0 - p));
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn space_names_parse() {
        assert_eq!("S1_mobilenetv2".parse::<SpaceName>().unwrap(), SpaceName::S1MobileNetV2);
        assert!("S3".parse::<SpaceName>().is_err());
        assert!(build_space(SpaceName::Evolved).validate().is_ok());
    }
}
