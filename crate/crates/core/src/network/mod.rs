//! The widened volumetric residual network.
//!
//! Layer sequence (input `1 x D x H x W`, default 30^3):
//!
//! | group           | output | block                |
//! |-----------------|--------|----------------------|
//! | stem conv       | 30^3   | 3x3x3, 8k            |
//! | max pool 4/4    | 8^3    | high-side zero pad   |
//! | ConvBlock3D     | 8^3    | 3x3x3, 8k            |
//! | IdentityBlock3D | 8^3    | 3x3x3, 8k (x2)       |
//! | ConvBlock3D     | 8^3    | 3x3x3, 16k           |
//! | IdentityBlock3D | 8^3    | 3x3x3, 16k (x2)      |
//! | head            | C      | global avg + dense   |
//!
//! Residual branches are pre-activation (`BN -> relu -> conv -> dropout ->
//! BN -> relu -> conv`); the block output is `relu(shortcut(x) + branch(x))`
//! where the shortcut is the identity or, for ConvBlock3D, a 1x1x1
//! convolution followed by batch norm.

mod checkpoint;
mod model;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::BnConfig;
use crate::util::fnv1a64;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{ForwardPass, Network, Param, ParamCount, ParamKind, StepOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    IdentityBlock3D,
    ConvBlock3D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub in_channels: usize,
    pub width: usize,
    pub kernel: usize,
    pub dropout_rate: f64,
}

/// Block kinds and base widths (multiplied by `k`) in network order.
pub const GROUP_LAYOUT: [(BlockKind, usize); 6] = [
    (BlockKind::ConvBlock3D, 8),
    (BlockKind::IdentityBlock3D, 8),
    (BlockKind::IdentityBlock3D, 8),
    (BlockKind::ConvBlock3D, 16),
    (BlockKind::IdentityBlock3D, 16),
    (BlockKind::IdentityBlock3D, 16),
];

pub const STEM_BASE_WIDTH: usize = 8;
pub const KERNEL: usize = 3;
pub const STEM_POOL_WINDOW: usize = 4;

/// Parameter counts reported for the five widening factors in the original
/// experiments, kept for side-by-side reconciliation.
pub const REFERENCE_PARAM_COUNTS: [(usize, usize); 5] = [
    (1, 122_032),
    (2, 341_688),
    (4, 1_081_672),
    (8, 3_764_328),
    (16, 14_826_408),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSpec {
    /// Widening factor.
    pub k: usize,
    pub num_classes: usize,
    pub input_dims: [usize; 3],
    /// Max-pool after the stem; disabled only for reduced gradient-check networks.
    pub stem_pool: bool,
    pub dropout_rate: f64,
    pub bn: BnConfig,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            k: 1,
            num_classes: 40,
            input_dims: [30, 30, 30],
            stem_pool: true,
            dropout_rate: 0.3,
            bn: BnConfig::default(),
        }
    }
}

impl NetworkSpec {
    pub fn with_k(k: usize) -> Self {
        NetworkSpec {
            k,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config(format!("widening factor k must be >= 1, got {}", self.k)));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        if self.input_dims.contains(&0) {
            return Err(Error::Config(format!("input dims must be >= 1, got {:?}", self.input_dims)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !(0.0..1.0).contains(&self.bn.momentum) || self.bn.eps <= 0.0 {
            return Err(Error::Config(format!("invalid batchnorm config {:?}", self.bn)));
        }
        Ok(())
    }

    pub fn stem_width(&self) -> usize {
        STEM_BASE_WIDTH * self.k
    }

    pub fn blocks(&self) -> Vec<BlockSpec> {
        let mut in_channels = self.stem_width();
        GROUP_LAYOUT
            .iter()
            .map(|&(kind, base)| {
                let width = base * self.k;
                let b = BlockSpec {
                    kind,
                    in_channels,
                    width,
                    kernel: KERNEL,
                    dropout_rate: self.dropout_rate,
                };
                in_channels = width;
                b
            })
            .collect()
    }

    pub fn block_widths(&self) -> Vec<usize> {
        self.blocks().iter().map(|b| b.width).collect()
    }

    pub fn feature_width(&self) -> usize {
        GROUP_LAYOUT[GROUP_LAYOUT.len() - 1].1 * self.k
    }

    /// Spatial extent seen by the residual blocks.
    pub fn block_dims(&self) -> [usize; 3] {
        if self.stem_pool {
            self.input_dims.map(|d| d.div_ceil(STEM_POOL_WINDOW))
        } else {
            self.input_dims
        }
    }

    /// Hash of everything that determines parameter names and shapes.
    pub fn fingerprint(&self) -> u64 {
        let [d, h, w] = self.input_dims;
        let canonical = format!(
            "volres-net/v1;k={};classes={};input={d}x{h}x{w};stem_pool={}",
            self.k, self.num_classes, self.stem_pool
        );
        fnv1a64(canonical.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k8_block_widths() {
        assert_eq!(NetworkSpec::with_k(8).block_widths(), vec![64, 64, 64, 128, 128, 128]);
    }

    #[test]
    fn invalid_specs_are_config_errors() {
        assert!(matches!(NetworkSpec::with_k(0).validate(), Err(Error::Config(_))));
        let spec = NetworkSpec {
            num_classes: 1,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn fingerprint_tracks_architecture_only() {
        let a = NetworkSpec::with_k(1);
        let mut b = a.clone();
        b.dropout_rate = 0.5;
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), NetworkSpec::with_k(2).fingerprint());
        let mut c = a.clone();
        c.stem_pool = false;
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn blocks_see_8_cubed_after_pool() {
        assert_eq!(NetworkSpec::default().block_dims(), [8, 8, 8]);
    }

    #[test]
    fn reference_ratios() {
        let r: Vec<f64> = REFERENCE_PARAM_COUNTS
            .windows(2)
            .map(|w| w[1].1 as f64 / w[0].1 as f64)
            .collect();
        for (got, want) in r.iter().zip([2.80, 3.17, 3.48, 3.94]) {
            assert!((got - want).abs() < 0.005, "{got} vs {want}");
        }
    }
}
