use num_integer::Integer;
use serde::Serialize;

use crate::error::Result;
use crate::group::GroupSpec;
use crate::nn::Module;
use crate::tensor::Scalar;

use super::{EqSwinConfig, EqViTConfig, PlainSwin, PlainViT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamCategory {
    Embedding,
    PositionEncoding,
    AttentionLinear,
    MlpLinear,
    Norm,
    Merge,
    Head,
}

impl ParamCategory {
    pub fn of(name: &str) -> Self {
        let has = |s: &str| name.contains(s);
        if name.starts_with("embed.") {
            ParamCategory::Embedding
        } else if name.ends_with(".table") {
            ParamCategory::PositionEncoding
        } else if has(".ln") || name.starts_with("head.ln") {
            ParamCategory::Norm
        } else if has(".attn.") {
            ParamCategory::AttentionLinear
        } else if has(".mlp.") {
            ParamCategory::MlpLinear
        } else if name.starts_with("merge") {
            ParamCategory::Merge
        } else {
            ParamCategory::Head
        }
    }

    pub fn is_block_linear(self) -> bool {
        matches!(self, ParamCategory::AttentionLinear | ParamCategory::MlpLinear)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LedgerEntry {
    pub name: String,
    pub category: ParamCategory,
    pub count: usize,
}

/// Exact per-parameter counts of a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamLedger {
    pub entries: Vec<LedgerEntry>,
}

impl ParamLedger {
    pub fn of<T: Scalar>(model: &dyn Module<T>) -> Self {
        let mut entries = Vec::new();
        model.visit_params(&mut |p| {
            entries.push(LedgerEntry { name: p.name.clone(), category: ParamCategory::of(&p.name), count: p.len() })
        });
        ParamLedger { entries }
    }

    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn category(&self, c: ParamCategory) -> usize {
        self.entries.iter().filter(|e| e.category == c).map(|e| e.count).sum()
    }

    /// Attention and MLP linear parameters, weights and biases.
    pub fn block_linear(&self) -> usize {
        self.entries.iter().filter(|e| e.category.is_block_linear()).map(|e| e.count).sum()
    }
}

/// Unconstrained configuration with the same flattened width `c·|S|`.
pub fn equal_width_vit(cfg: &EqViTConfig) -> EqViTConfig {
    EqViTConfig { group: GroupSpec::trivial(), channels: cfg.width(), ..cfg.clone() }
}

pub fn equal_width_swin(cfg: &EqSwinConfig) -> EqSwinConfig {
    EqSwinConfig { group: GroupSpec::trivial(), channels: cfg.channels * cfg.group.order(), ..cfg.clone() }
}

fn closest(target: usize, step: usize, mut count: impl FnMut(usize) -> Result<usize>) -> Result<usize> {
    let mut best = (usize::MAX, step);
    let mut d = step;
    loop {
        let n = count(d)?;
        let gap = n.abs_diff(target);
        if gap < best.0 {
            best = (gap, d);
        }
        if n > target {
            return Ok(best.1);
        }
        d += step;
    }
}

/// Unconstrained configuration whose total parameter count is closest to
/// `target`, searching widths that keep the head count valid.
pub fn equal_params_vit(cfg: &EqViTConfig, target: usize) -> Result<EqViTConfig> {
    let make = |d: usize| EqViTConfig { group: GroupSpec::trivial(), channels: d, ..cfg.clone() };
    let d = closest(target, cfg.heads, |d| Ok(PlainViT::<f64>::new(&make(d), 0)?.param_count()))?;
    Ok(make(d))
}

pub fn equal_params_swin(cfg: &EqSwinConfig, target: usize) -> Result<EqSwinConfig> {
    let step = cfg.heads.iter().fold(1, |a, &b| a.lcm(&b));
    let make = |d: usize| EqSwinConfig { group: GroupSpec::trivial(), channels: d, ..cfg.clone() };
    let d = closest(target, step, |d| Ok(PlainSwin::<f64>::new(&make(d), 0)?.param_count()))?;
    Ok(make(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::EqViT;

    fn cfg() -> EqViTConfig {
        EqViTConfig {
            image_side: 16,
            in_channels: 1,
            patch: 4,
            channels: 4,
            depth: 2,
            heads: 2,
            group: GroupSpec::c4(),
            mlp_ratio: 2,
            num_classes: 3,
            use_ape: true,
        }
    }

    #[test]
    fn categories_cover_every_parameter() {
        let ledger = ParamLedger::of(&EqViT::<f64>::new(&cfg(), 0).unwrap());
        let cats = [
            ParamCategory::Embedding,
            ParamCategory::PositionEncoding,
            ParamCategory::AttentionLinear,
            ParamCategory::MlpLinear,
            ParamCategory::Norm,
            ParamCategory::Merge,
            ParamCategory::Head,
        ];
        assert_eq!(cats.iter().map(|&c| ledger.category(c)).sum::<usize>(), ledger.total());
        assert_eq!(ParamCategory::of("block0.attn.wq.g1"), ParamCategory::AttentionLinear);
        assert_eq!(ParamCategory::of("block0.ln2.gamma"), ParamCategory::Norm);
        assert_eq!(ParamCategory::of("head.w"), ParamCategory::Head);
        assert_eq!(ParamCategory::of("stage0.block1.rpe.table"), ParamCategory::PositionEncoding);
    }

    #[test]
    fn equal_params_lands_near_target() {
        let c = cfg();
        let target = EqViT::<f64>::new(&c, 0).unwrap().param_count();
        let base = equal_params_vit(&c, target).unwrap();
        let n = PlainViT::<f64>::new(&base, 0).unwrap().param_count();
        let below = PlainViT::<f64>::new(&EqViTConfig { channels: base.channels - 2, ..base.clone() }, 0)
            .map(|m| m.param_count())
            .unwrap_or(0);
        assert!(n.abs_diff(target) <= below.abs_diff(target));
    }
}
