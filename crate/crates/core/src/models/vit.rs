use crate::error::{shape_err, Result};
use crate::layers::{EqApe, EqConvKernel};
use crate::nn::{Ctx, Init, Module, Param};
use crate::tensor::{Scalar, Tensor};

use super::block::{EqBlock, ImageModel, InvariantHead};
use super::EqViTConfig;

/// Equivariant ViT with an invariant classification head.
#[derive(Debug, Clone)]
pub struct EqViT<T: Scalar> {
    pub cfg: EqViTConfig,
    pub embed: EqConvKernel<T>,
    pub ape: Option<EqApe<T>>,
    pub blocks: Vec<EqBlock<T>>,
    pub head: InvariantHead<T>,
}

impl<T: Scalar> EqViT<T> {
    pub fn new(cfg: &EqViTConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init = Init::new(seed);
        let spec = cfg.group;
        let embed = EqConvKernel::new("embed", spec, cfg.patch, cfg.in_channels, cfg.channels, &mut init)?;
        let ape = if cfg.use_ape { Some(EqApe::new("ape", spec, cfg.grid_side(), cfg.channels)?) } else { None };
        let blocks = (0..cfg.depth)
            .map(|i| EqBlock::new(&format!("block{i}"), spec, cfg.channels, cfg.heads, cfg.mlp_ratio, None, &mut init))
            .collect::<Result<_>>()?;
        let head = InvariantHead::new("head", spec, cfg.channels, cfg.num_classes, &mut init);
        Ok(EqViT { cfg: cfg.clone(), embed, ape, blocks, head })
    }

    /// Token features after the last block, `[N, c·|S|]`.
    pub fn features(&self, ctx: &Ctx<T>, image: &Tensor<T>) -> Result<Tensor<T>> {
        let s = image.shape();
        if s != [self.cfg.image_side, self.cfg.image_side, self.cfg.in_channels] {
            return Err(shape_err("EqViT input", s, &[self.cfg.image_side, self.cfg.image_side, self.cfg.in_channels]));
        }
        let mut z = self.embed.forward(ctx, image)?.flat()?;
        if let Some(ape) = &self.ape {
            z = ape.forward_flat(ctx, &z)?;
        }
        for b in &self.blocks {
            z = b.forward_flat(ctx, &z)?;
        }
        Ok(z)
    }
}

impl<T: Scalar> ImageModel<T> for EqViT<T> {
    fn forward(&self, ctx: &Ctx<T>, image: &Tensor<T>) -> Result<Tensor<T>> {
        self.head.forward_flat(ctx, &self.features(ctx, image)?)
    }
}

impl<T: Scalar> Module<T> for EqViT<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.embed.visit_params(f);
        if let Some(a) = &self.ape {
            a.visit_params(f);
        }
        for b in &self.blocks {
            b.visit_params(f);
        }
        self.head.visit_params(f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.embed.visit_params_mut(f);
        if let Some(a) = &mut self.ape {
            a.visit_params_mut(f);
        }
        for b in &mut self.blocks {
            b.visit_params_mut(f);
        }
        self.head.visit_params_mut(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupSpec;
    use crate::layers::spatial_transform;
    use crate::nn::Init;

    pub(crate) fn toy(group: GroupSpec) -> EqViTConfig {
        EqViTConfig {
            image_side: 8,
            in_channels: 1,
            patch: 2,
            channels: 4,
            depth: 1,
            heads: 2,
            group,
            mlp_ratio: 2,
            num_classes: 3,
            use_ape: true,
        }
    }

    #[test]
    fn logits_are_invariant() {
        let spec = GroupSpec::d4();
        let mut model = EqViT::<f64>::new(&toy(spec), 0).unwrap();
        let mut init = Init::new(1);
        if let Some(ape) = &mut model.ape {
            ape.table.value = init.uniform(ape.table.value.shape(), -1.0, 1.0);
        }
        let x = Tensor::constant(init.uniform(&[8, 8, 1], -1.0, 1.0));
        let ctx = Ctx::inference();
        let base = model.forward(&ctx, &x).unwrap();
        for g in spec.elements() {
            let y = model.forward(&ctx, &spatial_transform(&spec, g, &x).unwrap()).unwrap();
            assert!(y.value().max_abs_diff(base.value()).unwrap() < 1e-10, "{g}");
        }
    }

    #[test]
    fn rejects_wrong_input() {
        let model = EqViT::<f64>::new(&toy(GroupSpec::c4()), 0).unwrap();
        let x = Tensor::constant(crate::tensor::NdArray::zeros(vec![4, 4, 1]));
        assert!(model.forward(&Ctx::inference(), &x).is_err());
    }
}
