use crate::error::{shape_err, Result};
use crate::layers::{eq_downsample, eq_pixel_shuffle, EqApe, EqConvKernel, EqLayerNorm, EqLinear, LiftedFeature};
use crate::nn::{Ctx, Init, Module, Param};
use crate::tensor::{Scalar, Tensor};

use super::block::{group_mean, upsample_nearest, EqBlock, ImageModel, InvariantHead, WindowSpec};
use super::{EqSwinConfig, SwinHead};

/// Patch merging: conjugated stride-2 down-sampling, norm, then `c -> 2c`.
#[derive(Debug, Clone)]
pub struct EqMerge<T: Scalar> {
    pub ln: EqLayerNorm<T>,
    pub expand: EqLinear<T>,
}

impl<T: Scalar> EqMerge<T> {
    fn forward(&self, ctx: &Ctx<T>, z: &LiftedFeature<T>) -> Result<LiftedFeature<T>> {
        let down = eq_downsample(&z.to_spatial()?, 2)?.to_tokens()?;
        let normed = self.ln.forward(ctx, &down)?;
        self.expand.forward(ctx, &normed)
    }
}

impl<T: Scalar> Module<T> for EqMerge<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.ln.visit_params(f);
        self.expand.visit_params(f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.ln.visit_params_mut(f);
        self.expand.visit_params_mut(f);
    }
}

#[derive(Debug, Clone)]
pub enum EqSwinHead<T: Scalar> {
    Classify(InvariantHead<T>),
    SuperResolve { expand: EqLinear<T>, shuffle: usize, scale: usize, residual: bool },
}

/// Equivariant Swin-style model with a classification or SR head.
#[derive(Debug, Clone)]
pub struct EqSwin<T: Scalar> {
    pub cfg: EqSwinConfig,
    pub embed: EqConvKernel<T>,
    pub ape: Option<EqApe<T>>,
    pub stages: Vec<Vec<EqBlock<T>>>,
    pub merges: Vec<EqMerge<T>>,
    pub head: EqSwinHead<T>,
}

impl<T: Scalar> EqSwin<T> {
    pub fn new(cfg: &EqSwinConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init = Init::new(seed);
        let spec = cfg.group;
        let embed = EqConvKernel::new("embed", spec, cfg.patch, cfg.in_channels, cfg.channels, &mut init)?;
        let sides = cfg.stage_sides();
        let ape = if cfg.use_ape { Some(EqApe::new("ape", spec, sides[0], cfg.channels)?) } else { None };
        let mut stages = Vec::with_capacity(sides.len());
        let mut merges = Vec::new();
        for (si, (&side, &depth)) in sides.iter().zip(&cfg.depths).enumerate() {
            let c = cfg.stage_channels(si);
            if si > 0 {
                let prev = cfg.stage_channels(si - 1);
                merges.push(EqMerge {
                    ln: EqLayerNorm::new(&format!("merge{si}.ln"), spec, prev),
                    expand: EqLinear::new(&format!("merge{si}.expand"), spec, prev, c, false, &mut init),
                });
            }
            let window = cfg.stage_window(side);
            let blocks = (0..depth)
                .map(|bi| {
                    let w = WindowSpec {
                        grid_side: side,
                        window,
                        shift: if bi % 2 == 1 { cfg.shift } else { 0 },
                        use_rpe: cfg.use_rpe,
                    };
                    EqBlock::new(
                        &format!("stage{si}.block{bi}"),
                        spec,
                        c,
                        cfg.heads[si],
                        cfg.mlp_ratio,
                        Some(w),
                        &mut init,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            stages.push(blocks);
        }
        let last_c = cfg.stage_channels(sides.len() - 1);
        let head = match cfg.head {
            SwinHead::Classify { num_classes } => {
                EqSwinHead::Classify(InvariantHead::new("head", spec, last_c, num_classes, &mut init))
            }
            SwinHead::SuperResolve { scale, residual } => {
                let shuffle = cfg.patch * scale;
                let out = shuffle * shuffle * cfg.in_channels;
                EqSwinHead::SuperResolve {
                    expand: EqLinear::new("head.expand", spec, last_c, out, false, &mut init),
                    shuffle,
                    scale,
                    residual,
                }
            }
        };
        Ok(EqSwin { cfg: cfg.clone(), embed, ape, stages, merges, head })
    }

    /// Lifted token features after the last stage.
    pub fn features(&self, ctx: &Ctx<T>, image: &Tensor<T>) -> Result<LiftedFeature<T>> {
        let want = [self.cfg.image_side, self.cfg.image_side, self.cfg.in_channels];
        if image.shape() != want {
            return Err(shape_err("EqSwin input", image.shape(), &want));
        }
        let spec = self.cfg.group;
        let mut z = self.embed.forward(ctx, image)?;
        if let Some(ape) = &self.ape {
            z = LiftedFeature::from_flat(&ape.forward_flat(ctx, &z.flat()?)?, spec)?;
        }
        for (si, blocks) in self.stages.iter().enumerate() {
            if si > 0 {
                z = self.merges[si - 1].forward(ctx, &z)?;
            }
            let mut flat = z.flat()?;
            for b in blocks {
                flat = b.forward_flat(ctx, &flat)?;
            }
            z = LiftedFeature::from_flat(&flat, spec)?;
        }
        Ok(z)
    }
}

impl<T: Scalar> ImageModel<T> for EqSwin<T> {
    fn forward(&self, ctx: &Ctx<T>, image: &Tensor<T>) -> Result<Tensor<T>> {
        let z = self.features(ctx, image)?;
        match &self.head {
            EqSwinHead::Classify(head) => head.forward_flat(ctx, &z.flat()?),
            EqSwinHead::SuperResolve { expand, shuffle, scale, residual } => {
                let spec = self.cfg.group;
                let up = eq_pixel_shuffle(&expand.forward(ctx, &z)?.to_spatial()?, *shuffle)?;
                let s = up.data().shape().to_vec();
                let flat = up.data().reshape(&[s[0] * s[1], s[2] * s[3]])?;
                let img = group_mean(&flat, &spec)?.reshape(&[s[0], s[1], s[2]])?;
                if *residual {
                    img.add(&upsample_nearest(image, *scale)?)
                } else {
                    Ok(img)
                }
            }
        }
    }
}

impl<T: Scalar> Module<T> for EqSwin<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.embed.visit_params(f);
        if let Some(a) = &self.ape {
            a.visit_params(f);
        }
        for (si, blocks) in self.stages.iter().enumerate() {
            if si > 0 {
                self.merges[si - 1].visit_params(f);
            }
            for b in blocks {
                b.visit_params(f);
            }
        }
        match &self.head {
            EqSwinHead::Classify(h) => h.visit_params(f),
            EqSwinHead::SuperResolve { expand, .. } => expand.visit_params(f),
        }
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.embed.visit_params_mut(f);
        if let Some(a) = &mut self.ape {
            a.visit_params_mut(f);
        }
        for (si, blocks) in self.stages.iter_mut().enumerate() {
            if si > 0 {
                self.merges[si - 1].visit_params_mut(f);
            }
            for b in blocks {
                b.visit_params_mut(f);
            }
        }
        match &mut self.head {
            EqSwinHead::Classify(h) => h.visit_params_mut(f),
            EqSwinHead::SuperResolve { expand, .. } => expand.visit_params_mut(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupSpec;
    use crate::layers::spatial_transform;
    use crate::tensor::NdArray;

    fn cfg(group: GroupSpec, head: SwinHead, depths: Vec<usize>) -> EqSwinConfig {
        let heads = vec![1; depths.len()];
        EqSwinConfig {
            image_side: 8,
            in_channels: 1,
            patch: 1,
            channels: 2,
            group,
            mlp_ratio: 2,
            window: 4,
            shift: 2,
            depths,
            heads,
            use_rpe: true,
            use_ape: true,
            head,
        }
    }

    fn randomize_tables(model: &mut EqSwin<f64>, seed: u64) {
        let mut init = Init::new(seed);
        model.visit_params_mut(&mut |p| {
            if p.name.ends_with(".table") {
                p.value = init.uniform(p.value.shape(), -1.0, 1.0);
            }
        });
    }

    #[test]
    fn classifier_is_invariant_with_shift_and_merge() {
        let spec = GroupSpec::c4();
        let mut model = EqSwin::<f64>::new(&cfg(spec, SwinHead::Classify { num_classes: 3 }, vec![2, 1]), 1).unwrap();
        randomize_tables(&mut model, 2);
        let x = Tensor::constant(Init::new(3).uniform(&[8, 8, 1], -1.0, 1.0));
        let ctx = Ctx::inference();
        let base = model.forward(&ctx, &x).unwrap();
        for g in spec.elements() {
            let y = model.forward(&ctx, &spatial_transform(&spec, g, &x).unwrap()).unwrap();
            assert!(y.value().max_abs_diff(base.value()).unwrap() < 1e-10, "{g}");
        }
    }

    #[test]
    fn sr_is_equivariant() {
        let spec = GroupSpec::d4();
        let head = SwinHead::SuperResolve { scale: 2, residual: true };
        let mut model = EqSwin::<f64>::new(&cfg(spec, head, vec![2]), 4).unwrap();
        randomize_tables(&mut model, 5);
        let x = Tensor::constant(Init::new(6).uniform(&[8, 8, 1], 0.0, 1.0));
        let ctx = Ctx::inference();
        let base = model.forward(&ctx, &x).unwrap();
        assert_eq!(base.shape(), &[16, 16, 1]);
        for g in spec.elements() {
            let y = model.forward(&ctx, &spatial_transform(&spec, g, &x).unwrap()).unwrap();
            let want = spatial_transform(&spec, g, &base).unwrap();
            assert!(y.value().max_abs_diff(want.value()).unwrap() < 1e-10, "{g}");
        }
    }

    #[test]
    fn sr_keeps_constant_images_constant() {
        let head = SwinHead::SuperResolve { scale: 2, residual: false };
        let model = EqSwin::<f64>::new(&cfg(GroupSpec::c4(), head, vec![2]), 7).unwrap();
        let x = Tensor::constant(NdArray::full(vec![8, 8, 1], 0.3));
        let y = model.forward(&Ctx::inference(), &x).unwrap();
        let first = y.value().data()[0];
        assert!(y.value().data().iter().all(|v| (v - first).abs() < 1e-12));
    }

    #[test]
    fn rejects_untileable_grids() {
        let mut c = cfg(GroupSpec::c4(), SwinHead::Classify { num_classes: 2 }, vec![1]);
        c.image_side = 6;
        assert!(EqSwin::<f64>::new(&c, 0).is_err());
    }
}
