//! Run configuration files.
//!
//! A run file has three tables:
//!
//! ```toml
//! [model]
//! kind = "eq_vit"          # eq_vit | plain_vit | eq_swin | plain_swin
//! image_side = 16
//! patch = 4
//! channels = 4
//! depth = 2
//! heads = 2
//! num_classes = 4
//! group = { t = 4, with_reflection = false }
//!
//! [task]
//! task = "shapes"          # shapes | sr
//! image_side = 16
//! train_size = 64
//! test_size = 32
//! seed = 0
//!
//! [optimizer]
//! lr = 0.05
//! epochs = 10
//! batch_size = 16
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use eqvit::models::{EqSwin, EqSwinConfig, EqViT, EqViTConfig, ImageModel, PlainSwin, PlainViT, SwinHead};
use eqvit::nn::{Ctx, Module, Param};
use eqvit::tensor::{Scalar, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    EqVit(EqViTConfig),
    PlainVit(EqViTConfig),
    EqSwin(EqSwinConfig),
    PlainSwin(EqSwinConfig),
}

impl ModelConfig {
    pub fn build<T: Scalar>(&self, seed: u64) -> Result<AnyModel<T>> {
        Ok(match self {
            ModelConfig::EqVit(c) => AnyModel::EqViT(EqViT::new(c, seed)?),
            ModelConfig::PlainVit(c) => AnyModel::PlainViT(PlainViT::new(c, seed)?),
            ModelConfig::EqSwin(c) => AnyModel::EqSwin(EqSwin::new(c, seed)?),
            ModelConfig::PlainSwin(c) => AnyModel::PlainSwin(PlainSwin::new(c, seed)?),
        })
    }

    /// Side of the images the model consumes.
    pub fn image_side(&self) -> usize {
        match self {
            ModelConfig::EqVit(c) | ModelConfig::PlainVit(c) => c.image_side,
            ModelConfig::EqSwin(c) | ModelConfig::PlainSwin(c) => c.image_side,
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            ModelConfig::EqVit(c) | ModelConfig::PlainVit(c) => c.in_channels,
            ModelConfig::EqSwin(c) | ModelConfig::PlainSwin(c) => c.in_channels,
        }
    }

    pub fn is_super_resolution(&self) -> bool {
        matches!(self, ModelConfig::EqSwin(c) | ModelConfig::PlainSwin(c) if matches!(c.head, SwinHead::SuperResolve { .. }))
    }
}

/// One of the four model families behind a single type.
#[derive(Debug, Clone)]
pub enum AnyModel<T: Scalar> {
    EqViT(EqViT<T>),
    PlainViT(PlainViT<T>),
    EqSwin(EqSwin<T>),
    PlainSwin(PlainSwin<T>),
}

macro_rules! each {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            AnyModel::EqViT($m) => $body,
            AnyModel::PlainViT($m) => $body,
            AnyModel::EqSwin($m) => $body,
            AnyModel::PlainSwin($m) => $body,
        }
    };
}

impl<T: Scalar> Module<T> for AnyModel<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        each!(self, m => m.visit_params(f))
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        each!(self, m => m.visit_params_mut(f))
    }
}

impl<T: Scalar> ImageModel<T> for AnyModel<T> {
    fn forward(&self, ctx: &Ctx<T>, image: &Tensor<T>) -> eqvit::Result<Tensor<T>> {
        each!(self, m => m.forward(ctx, image))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Shapes,
    Sr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    CanonicalOnly,
    AllOrientations,
}

/// How low-resolution inputs are made from high-resolution targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degradation {
    /// 2×2 (scale×scale) box average.
    Average,
    /// Targets are the nearest upsampling of the input, so the identity
    /// correction is exact.
    Nearest,
}

fn default_classes() -> usize {
    4
}
fn default_scale() -> usize {
    2
}
fn default_noise() -> f64 {
    0.1
}
fn canonical() -> Orientation {
    Orientation::CanonicalOnly
}
fn all_orientations() -> Orientation {
    Orientation::AllOrientations
}
fn average() -> Degradation {
    Degradation::Average
}

/// Synthetic dataset description. Generation is a pure function of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTaskSpec {
    pub task: TaskKind,
    /// Input side; for SR this is the low-resolution side.
    pub image_side: usize,
    #[serde(default = "default_classes")]
    pub num_classes: usize,
    #[serde(default = "default_scale")]
    pub scale: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
    #[serde(default = "canonical")]
    pub train_orientation: Orientation,
    #[serde(default = "all_orientations")]
    pub test_orientation: Orientation,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "average")]
    pub degradation: Degradation,
}

fn default_momentum() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds model initialisation and minibatch order.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub task: SyntheticTaskSpec,
    pub optimizer: OptimizerConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.image_side() != self.task.image_side {
            bail!("model expects {} px images, task makes {} px", self.model.image_side(), self.task.image_side);
        }
        let sr = self.task.task == TaskKind::Sr;
        if sr != self.model.is_super_resolution() {
            bail!("task {:?} does not fit the model head", self.task.task);
        }
        if self.optimizer.batch_size == 0 || self.optimizer.lr.is_nan() || self.optimizer.lr <= 0.0 {
            bail!("batch_size and lr must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHAPES: &str = include_str!("../configs/shapes_eqvit.toml");
    const SR: &str = include_str!("../configs/sr_eqswin.toml");

    #[test]
    fn shipped_configs_parse_and_round_trip() {
        for text in [SHAPES, SR] {
            let cfg = RunConfig::from_toml(text).unwrap();
            let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(cfg, back);
        }
    }

    #[test]
    fn mismatched_task_is_rejected() {
        let mut cfg = RunConfig::from_toml(SHAPES).unwrap();
        cfg.task.image_side = 32;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::from_toml(SHAPES).unwrap();
        cfg.task.task = TaskKind::Sr;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_fields_are_errors() {
        let text = SHAPES.replace("[optimizer]", "[optimizer]\nwarmup = 3");
        assert!(RunConfig::from_toml(&text).is_err());
    }
}
