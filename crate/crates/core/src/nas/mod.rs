//! Architecture search spaces and static network metrics.
//!
//! A network is a stem, an ordered list of blocks and a head. Blocks are
//! either inverted bottlenecks (IBN: 1x1 expand, kxk depthwise, 1x1 project)
//! or fused inverted bottlenecks (one kxk full convolution replacing the
//! expand + depthwise pair, then a 1x1 projection). For costing, every layer
//! is flattened into [`Primitive`] operators.

mod space;
mod templates;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use space::{
    build_space, decode, encode, evolved_space_with_fused, sample_uniform, ArchKnob, DecisionPoint,
    DecisionVector, KnobValue, SearchSpaceDef, SpaceName,
};
pub use templates::{efficientnet_b0, mobilenet_v2, MOBILENET_V2_BLOCKS, EFFICIENTNET_B0_STAGES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NasError {
    #[error("unknown search space `{0}`")]
    UnknownSpace(String),
    #[error("decision vector has {got} entries, space has {expected} decision points")]
    DecisionLength { expected: usize, got: usize },
    #[error("decision `{id}`: index {index} outside domain of size {size}")]
    DecisionIndex { id: String, index: usize, size: usize },
    #[error("decision `{id}`: value {value} not in domain")]
    ValueNotInDomain { id: String, value: String },
    #[error("layer `{layer}`: spatial dimension underflow")]
    ShapeUnderflow { layer: String },
    #[error("layer `{layer}`: {groups} groups do not divide {channels} channels")]
    Groups { layer: String, groups: u32, channels: u32 },
    #[error("layer `{layer}`: {reason}")]
    BadLayer { layer: String, reason: &'static str },
    #[error("decision point `{0}` refers to a block that does not exist")]
    DanglingDecision(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpType {
    #[serde(rename = "ibn")]
    Ibn,
    #[serde(rename = "fused_ibn")]
    FusedIbn,
    Conv,
    DepthwiseConv,
    Pool,
    Dense,
}

impl OpType {
    pub fn as_str(self) -> &'static str {
        match self {
            OpType::Ibn => "ibn",
            OpType::FusedIbn => "fused_ibn",
            OpType::Conv => "conv",
            OpType::DepthwiseConv => "depthwise_conv",
            OpType::Pool => "pool",
            OpType::Dense => "dense",
        }
    }
}

impl fmt::Display for OpType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Height, width, channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TensorShape {
    pub h: u32,
    pub w: u32,
    pub c: u32,
}

impl TensorShape {
    pub const fn new(h: u32, w: u32, c: u32) -> Self {
        TensorShape { h, w, c }
    }

    pub fn elements(&self) -> u64 {
        self.h as u64 * self.w as u64 * self.c as u64
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.c)
    }
}

fn one() -> f64 {
    1.0
}

/// One layer of a network. For blocks (`Ibn`, `FusedIbn`) `expansion` and
/// `groups` are meaningful; for plain layers `expansion` is 1.
///
/// `base_channels` is the channel count before filter scaling; decoding sets
/// `out_channels` from it and `filter_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub op_type: OpType,
    pub kernel: u32,
    pub expansion: u32,
    pub out_channels: u32,
    pub stride: u32,
    pub groups: u32,
    #[serde(default)]
    pub input_shape: TensorShape,
    #[serde(default)]
    pub base_channels: u32,
    #[serde(default = "one")]
    pub filter_scale: f64,
    #[serde(default)]
    pub residual: bool,
}

impl LayerSpec {
    fn plain(op_type: OpType, kernel: u32, out_channels: u32, stride: u32) -> Self {
        LayerSpec {
            op_type,
            kernel,
            expansion: 1,
            out_channels,
            stride,
            groups: 1,
            input_shape: TensorShape::default(),
            base_channels: out_channels,
            filter_scale: 1.0,
            residual: false,
        }
    }

    pub fn conv(kernel: u32, out_channels: u32, stride: u32) -> Self {
        Self::plain(OpType::Conv, kernel, out_channels, stride)
    }

    pub fn depthwise(kernel: u32, stride: u32) -> Self {
        Self::plain(OpType::DepthwiseConv, kernel, 0, stride)
    }

    pub fn global_pool() -> Self {
        Self::plain(OpType::Pool, 0, 0, 1)
    }

    pub fn dense(out_features: u32) -> Self {
        Self::plain(OpType::Dense, 1, out_features, 1)
    }

    pub fn ibn(kernel: u32, expansion: u32, out_channels: u32, stride: u32) -> Self {
        LayerSpec { expansion, ..Self::plain(OpType::Ibn, kernel, out_channels, stride) }
    }

    pub fn fused_ibn(kernel: u32, expansion: u32, out_channels: u32, stride: u32) -> Self {
        LayerSpec { expansion, ..Self::plain(OpType::FusedIbn, kernel, out_channels, stride) }
    }

    pub fn with_input(mut self, input: TensorShape) -> Self {
        self.input_shape = input;
        if matches!(self.op_type, OpType::DepthwiseConv | OpType::Pool) {
            self.out_channels = input.c;
            self.base_channels = input.c;
        }
        self.residual = self.is_block() && self.stride == 1 && input.c == self.out_channels;
        self
    }

    pub fn is_block(&self) -> bool {
        matches!(self.op_type, OpType::Ibn | OpType::FusedIbn)
    }

    pub fn output_shape(&self) -> TensorShape {
        let i = self.input_shape;
        match self.op_type {
            OpType::Pool => TensorShape::new(1, 1, i.c),
            OpType::Dense => TensorShape::new(1, 1, self.out_channels),
            OpType::DepthwiseConv => TensorShape::new(div_ceil(i.h, self.stride), div_ceil(i.w, self.stride), i.c),
            _ => TensorShape::new(div_ceil(i.h, self.stride), div_ceil(i.w, self.stride), self.out_channels),
        }
    }

    /// Width of the expanded (hidden) tensor of a block.
    pub fn expanded_channels(&self) -> u32 {
        self.input_shape.c * self.expansion
    }

    /// Flattens this layer into costed operators.
    pub fn primitives(&self, name: &str) -> Vec<Primitive> {
        let input = self.input_shape;
        let out = self.output_shape();
        let mut v = Vec::new();
        let mut push = |kind, suffix: &'static str, kernel, stride, groups, input: TensorShape, output: TensorShape| {
            let mut n = String::from(name);
            if !suffix.is_empty() {
                n.push('.');
                n.push_str(suffix);
            }
            v.push(Primitive { name: n, kind, kernel, stride, groups, input, output });
        };
        match self.op_type {
            OpType::Conv => push(PrimitiveKind::Conv, "", self.kernel, self.stride, self.groups, input, out),
            OpType::DepthwiseConv => push(PrimitiveKind::Depthwise, "", self.kernel, self.stride, 1, input, out),
            OpType::Pool => push(PrimitiveKind::Pool, "", input.h, 1, 1, input, out),
            OpType::Dense => push(PrimitiveKind::Dense, "", 1, 1, 1, input, out),
            OpType::Ibn => {
                let mid = self.expanded_channels();
                let hidden_in = TensorShape::new(input.h, input.w, mid);
                let hidden_out = TensorShape::new(out.h, out.w, mid);
                let project_groups = if self.expansion > 1 {
                    push(PrimitiveKind::Conv, "expand", 1, 1, self.groups, input, hidden_in);
                    1
                } else {
                    self.groups
                };
                push(PrimitiveKind::Depthwise, "depthwise", self.kernel, self.stride, 1, hidden_in, hidden_out);
                push(PrimitiveKind::Conv, "project", 1, 1, project_groups, hidden_out, out);
            }
            OpType::FusedIbn => {
                let hidden_out = TensorShape::new(out.h, out.w, self.expanded_channels());
                push(PrimitiveKind::Conv, "fused", self.kernel, self.stride, self.groups, input, hidden_out);
                push(PrimitiveKind::Conv, "project", 1, 1, 1, hidden_out, out);
            }
        }
        v
    }
}

#[inline]
fn div_ceil(a: u32, b: u32) -> u32 {
    a.div_ceil(b.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    /// Full (optionally grouped) convolution, 1x1 included.
    Conv,
    Depthwise,
    /// Global average pooling.
    Pool,
    Dense,
}

impl PrimitiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PrimitiveKind::Conv => "conv",
            PrimitiveKind::Depthwise => "depthwise",
            PrimitiveKind::Pool => "pool",
            PrimitiveKind::Dense => "dense",
        }
    }
}

/// A single costed operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub name: String,
    pub kind: PrimitiveKind,
    pub kernel: u32,
    pub stride: u32,
    pub groups: u32,
    pub input: TensorShape,
    pub output: TensorShape,
}

impl Primitive {
    pub fn macs(&self) -> u64 {
        let o = self.output;
        let k2 = self.kernel as u64 * self.kernel as u64;
        match self.kind {
            PrimitiveKind::Conv => {
                o.h as u64 * o.w as u64 * k2 * self.input.c as u64 * o.c as u64 / self.groups as u64
            }
            PrimitiveKind::Depthwise => o.h as u64 * o.w as u64 * k2 * o.c as u64,
            PrimitiveKind::Dense => self.input.c as u64 * o.c as u64,
            PrimitiveKind::Pool => 0,
        }
    }

    /// Weights, plus the bias of dense layers. Batch-norm is folded.
    pub fn params(&self) -> u64 {
        let k2 = self.kernel as u64 * self.kernel as u64;
        match self.kind {
            PrimitiveKind::Conv => k2 * self.input.c as u64 * self.output.c as u64 / self.groups as u64,
            PrimitiveKind::Depthwise => k2 * self.output.c as u64,
            PrimitiveKind::Dense => self.input.c as u64 * self.output.c as u64 + self.output.c as u64,
            PrimitiveKind::Pool => 0,
        }
    }

    /// 8-bit weights.
    pub fn weight_bytes(&self) -> u64 {
        self.params()
    }

    pub fn input_bytes(&self) -> u64 {
        self.input.elements()
    }

    pub fn output_bytes(&self) -> u64 {
        self.output.elements()
    }

    /// Input channels seen by one output channel.
    pub fn input_channels_per_group(&self) -> u32 {
        match self.kind {
            PrimitiveKind::Conv => self.input.c / self.groups.max(1),
            PrimitiveKind::Depthwise | PrimitiveKind::Pool => 1,
            PrimitiveKind::Dense => self.input.c,
        }
    }
}

/// A concrete network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub name: String,
    pub input_resolution: u32,
    #[serde(default = "three")]
    pub input_channels: u32,
    pub stem: LayerSpec,
    pub blocks: Vec<LayerSpec>,
    pub head: Vec<LayerSpec>,
}

fn three() -> u32 {
    3
}

impl ArchitectureSpec {
    /// Recomputes every layer's input shape and residual flag from
    /// `input_resolution`, and checks channel/group consistency.
    pub fn propagate_shapes(&mut self) -> Result<(), NasError> {
        let mut shape = TensorShape::new(self.input_resolution, self.input_resolution, self.input_channels);
        let names = self.layer_names();
        for (layer, name) in self.layers_mut().zip(names) {
            if shape.h == 0 || shape.w == 0 {
                return Err(NasError::ShapeUnderflow { layer: name });
            }
            if layer.stride == 0 || !matches!(layer.stride, 1 | 2) {
                return Err(NasError::BadLayer { layer: name, reason: "stride must be 1 or 2" });
            }
            if layer.op_type == OpType::Dense && (shape.h != 1 || shape.w != 1) {
                return Err(NasError::BadLayer { layer: name, reason: "dense layer needs a 1x1 input" });
            }
            if layer.groups == 0 || layer.expansion == 0 {
                return Err(NasError::BadLayer { layer: name, reason: "groups and expansion must be >= 1" });
            }
            *layer = layer.clone().with_input(shape);
            check_groups(layer, &name)?;
            shape = layer.output_shape();
        }
        if shape.h == 0 || shape.w == 0 {
            return Err(NasError::ShapeUnderflow { layer: String::from("output") });
        }
        Ok(())
    }

    pub fn layers(&self) -> impl Iterator<Item = &LayerSpec> {
        core::iter::once(&self.stem).chain(self.blocks.iter()).chain(self.head.iter())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut LayerSpec> {
        core::iter::once(&mut self.stem).chain(self.blocks.iter_mut()).chain(self.head.iter_mut())
    }

    /// `stem`, `block0`..`blockN`, `head0`..`headM`, in layer order.
    pub fn layer_names(&self) -> Vec<String> {
        use alloc::format;
        let mut names = Vec::with_capacity(1 + self.blocks.len() + self.head.len());
        names.push(String::from("stem"));
        names.extend((0..self.blocks.len()).map(|i| format!("block{i}")));
        names.extend((0..self.head.len()).map(|i| format!("head{i}")));
        names
    }

    pub fn primitives(&self) -> Vec<Primitive> {
        self.layers()
            .zip(self.layer_names())
            .flat_map(|(l, n)| l.primitives(&n))
            .collect()
    }

    pub fn output_shape(&self) -> TensorShape {
        self.head.last().or(self.blocks.last()).unwrap_or(&self.stem).output_shape()
    }

    /// Total downsampling factor of the feature extractor (stem + blocks).
    pub fn spatial_reduction(&self) -> u32 {
        core::iter::once(&self.stem).chain(self.blocks.iter()).map(|l| l.stride).product()
    }
}

fn check_groups(layer: &LayerSpec, name: &str) -> Result<(), NasError> {
    let g = layer.groups;
    let c_in = layer.input_shape.c;
    let grouped_channels: &[u32] = match layer.op_type {
        OpType::Conv => &[c_in, layer.out_channels],
        OpType::Ibn if layer.expansion > 1 => &[c_in, layer.expanded_channels()],
        OpType::Ibn => &[c_in, layer.out_channels],
        OpType::FusedIbn => &[c_in, layer.expanded_channels()],
        _ => &[],
    };
    for &c in grouped_channels {
        if c == 0 || c % g != 0 {
            return Err(NasError::Groups { layer: String::from(name), groups: g, channels: c });
        }
    }
    Ok(())
}

pub fn count_macs(arch: &ArchitectureSpec) -> u64 {
    arch.primitives().iter().map(Primitive::macs).sum()
}

pub fn count_params(arch: &ArchitectureSpec) -> u64 {
    arch.primitives().iter().map(Primitive::params).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_on(layer: LayerSpec, input: TensorShape) -> LayerSpec {
        layer.with_input(input)
    }

    #[test]
    fn ibn_macs_by_hand() {
        let b = block_on(LayerSpec::ibn(3, 6, 64, 1), TensorShape::new(14, 14, 64));
        let p = b.primitives("b");
        let macs: Vec<u64> = p.iter().map(Primitive::macs).collect();
        assert_eq!(macs, [4_816_896, 677_376, 4_816_896]);
        assert_eq!(macs.iter().sum::<u64>(), 10_311_168);
        assert!(b.residual);
    }

    #[test]
    fn fused_ibn_macs_by_hand() {
        let b = block_on(LayerSpec::fused_ibn(3, 6, 64, 1), TensorShape::new(14, 14, 64));
        let p = b.primitives("b");
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].kind, PrimitiveKind::Conv);
        assert_eq!((p[0].kernel, p[0].input.c, p[0].output.c), (3, 64, 384));
        assert_eq!((p[1].kernel, p[1].input.c, p[1].output.c), (1, 384, 64));
        let macs: Vec<u64> = p.iter().map(Primitive::macs).collect();
        assert_eq!(macs, [43_352_064, 4_816_896]);
        let ratio = 48_168_960.0 / 10_311_168.0;
        assert!((4.6..4.8).contains(&ratio));
    }

    #[test]
    fn unit_conv_is_one_mac() {
        let c = LayerSpec::conv(1, 1, 1).with_input(TensorShape::new(1, 1, 1));
        assert_eq!(c.primitives("c")[0].macs(), 1);
    }

    #[test]
    fn expansion_one_skips_expand_conv() {
        let b = block_on(LayerSpec::ibn(3, 1, 16, 1), TensorShape::new(112, 112, 32));
        let kinds: Vec<_> = b.primitives("b").iter().map(|p| p.kind).collect();
        assert_eq!(kinds, [PrimitiveKind::Depthwise, PrimitiveKind::Conv]);
        assert!(!b.residual);
    }

    #[test]
    fn stride_uses_ceiling() {
        let c = LayerSpec::conv(3, 8, 2).with_input(TensorShape::new(7, 7, 3));
        assert_eq!(c.output_shape(), TensorShape::new(4, 4, 8));
    }

    #[test]
    fn mobilenet_v2_static_metrics() {
        let net = mobilenet_v2();
        // Reference MobileNetV2 (no batch-norm): 300.8M MACs, 3.50M params.
        let macs = count_macs(&net);
        let params = count_params(&net);
        assert!((295_000_000..310_000_000).contains(&macs), "{macs}");
        assert!((3_400_000..3_600_000).contains(&params), "{params}");
        assert_eq!(net.output_shape(), TensorShape::new(1, 1, 1000));
        assert_eq!(net.spatial_reduction(), 32);
    }

    #[test]
    fn groups_must_divide() {
        let mut net = mobilenet_v2();
        net.stem.groups = 3;
        net.stem.out_channels = 32;
        assert!(matches!(net.propagate_shapes(), Err(NasError::Groups { .. })));
    }

    #[test]
    fn zero_resolution_underflows() {
        let mut net = mobilenet_v2();
        net.input_resolution = 0;
        assert!(matches!(net.propagate_shapes(), Err(NasError::ShapeUnderflow { .. })));
    }
}
