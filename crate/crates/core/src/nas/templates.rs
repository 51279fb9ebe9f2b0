//! Reference network layouts, without squeeze-excite and with ReLU-family
//! activations (activations carry no cost in this model).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{ArchitectureSpec, LayerSpec};

/// MobileNetV2 inverted-residual settings: (expansion, out channels, repeats, first stride).
pub const MOBILENET_V2_BLOCKS: [(u32, u32, u32, u32); 7] = [
    (1, 16, 1, 1),
    (6, 24, 2, 2),
    (6, 32, 3, 2),
    (6, 64, 4, 2),
    (6, 96, 3, 1),
    (6, 160, 3, 2),
    (6, 320, 1, 1),
];

/// EfficientNet-B0 stages: (expansion, kernel, first stride, out channels, repeats).
pub const EFFICIENTNET_B0_STAGES: [(u32, u32, u32, u32, u32); 7] = [
    (1, 3, 1, 16, 1),
    (6, 3, 2, 24, 2),
    (6, 5, 2, 40, 2),
    (6, 3, 2, 80, 3),
    (6, 5, 1, 112, 3),
    (6, 5, 2, 192, 4),
    (6, 3, 1, 320, 1),
];

fn classifier_head() -> Vec<LayerSpec> {
    vec![LayerSpec::conv(1, 1280, 1), LayerSpec::global_pool(), LayerSpec::dense(1000)]
}

fn finish(name: &str, blocks: Vec<LayerSpec>) -> ArchitectureSpec {
    let mut arch = ArchitectureSpec {
        name: String::from(name),
        input_resolution: 224,
        input_channels: 3,
        stem: LayerSpec::conv(3, 32, 2),
        blocks,
        head: classifier_head(),
    };
    arch.propagate_shapes().expect("reference template is consistent");
    arch
}

/// MobileNetV2 at 224x224 with 3x3 depthwise kernels: 17 blocks.
pub fn mobilenet_v2() -> ArchitectureSpec {
    let blocks = MOBILENET_V2_BLOCKS
        .iter()
        .flat_map(|&(t, c, n, s)| (0..n).map(move |i| LayerSpec::ibn(3, t, c, if i == 0 { s } else { 1 })))
        .collect();
    finish("mobilenet_v2", blocks)
}

/// EfficientNet-B0 at 224x224 without squeeze-excite: 16 blocks.
pub fn efficientnet_b0() -> ArchitectureSpec {
    let blocks = EFFICIENTNET_B0_STAGES
        .iter()
        .flat_map(|&(e, k, s, c, n)| (0..n).map(move |i| LayerSpec::ibn(k, e, c, if i == 0 { s } else { 1 })))
        .collect();
    finish("efficientnet_b0", blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_counts() {
        assert_eq!(mobilenet_v2().blocks.len(), 17);
        assert_eq!(efficientnet_b0().blocks.len(), 16);
    }

    #[test]
    fn final_feature_map_is_7x7() {
        for net in [mobilenet_v2(), efficientnet_b0()] {
            let last = net.blocks.last().unwrap().output_shape();
            assert_eq!((last.h, last.w, last.c), (7, 7, 320));
        }
    }
}
