use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupSpec;

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn yes() -> bool {
    true
}

fn config_err(msg: String) -> Error {
    Error::Config(msg)
}

/// Equivariant ViT classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqViTConfig {
    pub image_side: usize,
    #[serde(default = "one")]
    pub in_channels: usize,
    pub patch: usize,
    /// Base channels `c`; the flattened width is `c·|S|`.
    pub channels: usize,
    pub depth: usize,
    pub heads: usize,
    pub group: GroupSpec,
    #[serde(default = "two")]
    pub mlp_ratio: usize,
    pub num_classes: usize,
    #[serde(default = "yes")]
    pub use_ape: bool,
}

impl EqViTConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.group.acts_on_grid() {
            return Err(config_err(format!("group {} does not act on square grids", self.group.name())));
        }
        if self.patch == 0 || self.image_side == 0 || !self.image_side.is_multiple_of(self.patch) {
            return Err(config_err(format!("image side {} is not divisible by patch {}", self.image_side, self.patch)));
        }
        if self.heads == 0 || !self.channels.is_multiple_of(self.heads) {
            return Err(config_err(format!("{} base channels do not split into {} heads", self.channels, self.heads)));
        }
        if self.in_channels == 0 || self.mlp_ratio == 0 || self.num_classes == 0 {
            return Err(config_err("in_channels, mlp_ratio and num_classes must be positive".into()));
        }
        Ok(())
    }

    pub fn grid_side(&self) -> usize {
        self.image_side / self.patch
    }

    /// Flattened width `d = c·|S|`.
    pub fn width(&self) -> usize {
        self.channels * self.group.order()
    }
}

/// Output head of an [`EqSwinConfig`] model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SwinHead {
    Classify {
        num_classes: usize,
    },
    /// Upscales by `scale`; the pixel shuffle factor is `patch · scale`.
    SuperResolve {
        scale: usize,
        /// Adds the nearest-neighbour upsampled input to the prediction.
        #[serde(default = "yes")]
        residual: bool,
    },
}

/// Hierarchical windowed model. Stage `i` has `depths[i]` blocks with
/// `heads[i]` heads and `c·2^i` base channels; a merge sits between stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqSwinConfig {
    pub image_side: usize,
    #[serde(default = "one")]
    pub in_channels: usize,
    pub patch: usize,
    pub channels: usize,
    pub group: GroupSpec,
    #[serde(default = "two")]
    pub mlp_ratio: usize,
    pub window: usize,
    pub shift: usize,
    pub depths: Vec<usize>,
    pub heads: Vec<usize>,
    #[serde(default = "yes")]
    pub use_rpe: bool,
    #[serde(default)]
    pub use_ape: bool,
    pub head: SwinHead,
}

impl EqSwinConfig {
    /// Token grid side at every stage.
    pub fn stage_sides(&self) -> Vec<usize> {
        let mut side = self.image_side / self.patch.max(1);
        let mut out = Vec::with_capacity(self.depths.len());
        for i in 0..self.depths.len() {
            if i > 0 {
                side /= 2;
            }
            out.push(side);
        }
        out
    }

    /// Window side used at a stage whose grid side is `side`.
    pub fn stage_window(&self, side: usize) -> usize {
        self.window.min(side)
    }

    pub fn stage_channels(&self, stage: usize) -> usize {
        self.channels << stage
    }

    pub fn validate(&self) -> Result<()> {
        if !self.group.acts_on_grid() {
            return Err(config_err(format!("group {} does not act on square grids", self.group.name())));
        }
        if self.patch == 0 || self.image_side == 0 || !self.image_side.is_multiple_of(self.patch) {
            return Err(config_err(format!("image side {} is not divisible by patch {}", self.image_side, self.patch)));
        }
        if self.depths.is_empty() || self.depths.len() != self.heads.len() {
            return Err(config_err("depths and heads must be non-empty and of equal length".into()));
        }
        if self.window == 0 || self.shift >= self.window {
            return Err(config_err(format!("shift {} must be below window {}", self.shift, self.window)));
        }
        if self.in_channels == 0 || self.mlp_ratio == 0 {
            return Err(config_err("in_channels and mlp_ratio must be positive".into()));
        }
        let mut side = self.image_side / self.patch;
        for (i, &h) in self.heads.iter().enumerate() {
            if i > 0 {
                if !side.is_multiple_of(2) {
                    return Err(config_err(format!("stage {i}: grid side {side} cannot be merged by 2")));
                }
                side /= 2;
            }
            let m = self.stage_window(side);
            if !side.is_multiple_of(m) {
                return Err(config_err(format!("stage {i}: grid side {side} is not divisible by window {m}")));
            }
            let c = self.stage_channels(i);
            if h == 0 || !c.is_multiple_of(h) {
                return Err(config_err(format!("stage {i}: {c} base channels do not split into {h} heads")));
            }
        }
        match self.head {
            SwinHead::Classify { num_classes: 0 } => Err(config_err("num_classes must be positive".into())),
            SwinHead::SuperResolve { scale, .. } if scale == 0 || self.depths.len() != 1 => {
                Err(config_err("super-resolution needs a positive scale and a single stage".into()))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swin() -> EqSwinConfig {
        EqSwinConfig {
            image_side: 16,
            in_channels: 1,
            patch: 1,
            channels: 4,
            group: GroupSpec::c4(),
            mlp_ratio: 2,
            window: 4,
            shift: 2,
            depths: vec![2, 2],
            heads: vec![2, 2],
            use_rpe: true,
            use_ape: false,
            head: SwinHead::Classify { num_classes: 3 },
        }
    }

    #[test]
    fn vit_invariants() {
        let mut cfg = EqViTConfig {
            image_side: 32,
            in_channels: 1,
            patch: 4,
            channels: 8,
            depth: 2,
            heads: 2,
            group: GroupSpec::c4(),
            mlp_ratio: 2,
            num_classes: 3,
            use_ape: true,
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.grid_side(), 8);
        assert_eq!(cfg.width(), 32);
        cfg.patch = 5;
        assert!(cfg.validate().is_err());
        cfg.patch = 4;
        cfg.heads = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn swin_invariants() {
        let mut cfg = swin();
        cfg.validate().unwrap();
        assert_eq!(cfg.stage_sides(), vec![16, 8]);
        cfg.shift = 4;
        assert!(cfg.validate().is_err());
        cfg = swin();
        cfg.window = 3;
        assert!(cfg.validate().is_err());
        cfg = swin();
        cfg.head = SwinHead::SuperResolve { scale: 2, residual: true };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = swin();
        let text = toml::to_string(&cfg).unwrap();
        let back: EqSwinConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
