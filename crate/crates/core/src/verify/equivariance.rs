use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::group::{GroupElement, GroupSpec};
use crate::layers::{
    eq_downsample, eq_layernorm, eq_linear, eq_pixel_shuffle, lifted_transform_array, spatial_transform_array,
    tiled_matrix, EqApe, EqConvKernel, EqLinear, EqRpe, EqRpeMaps, EqSelfAttention, LiftedFeature, WindowPlan,
};
use crate::models::{EqSwin, EqSwinConfig, EqViT, EqViTConfig, ImageModel, SwinHead};
use crate::nn::{Ctx, Init, Module};
use crate::tensor::{NdArray, Precision, Scalar, Tensor};

use super::report::{EquivarianceReport, ReportCell};

/// How a group element moves an input or output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    /// Lifted action on `[N, c, |S|]` or `[H, W, c, |S|]`.
    Lifted,
    /// Plain spatial action on `[H, W, …]`.
    Spatial,
    /// Identity (invariant outputs such as logits).
    Invariant,
}

impl Transport {
    pub fn apply<T: Scalar>(self, spec: &GroupSpec, g: GroupElement, x: &NdArray<T>) -> Result<NdArray<T>> {
        match self {
            Transport::Lifted => lifted_transform_array(spec, g, x),
            Transport::Spatial => spatial_transform_array(spec, g, x),
            Transport::Invariant => Ok(x.clone()),
        }
    }
}

/// Absolute and relative deviation between `f(π_in(g, x))` and
/// `π_out(g, f(x))`. The relative figure divides by the largest magnitude of
/// the reference output.
pub fn equivariance_error<T: Scalar>(
    f: &dyn Fn(&NdArray<T>) -> Result<NdArray<T>>,
    x: &NdArray<T>,
    g: GroupElement,
    spec: &GroupSpec,
    transport_in: Transport,
    transport_out: Transport,
) -> Result<(f64, f64)> {
    let lhs = f(&transport_in.apply(spec, g, x)?)?;
    let rhs = transport_out.apply(spec, g, &f(x)?)?;
    if lhs.shape() != rhs.shape() {
        return Err(domain(format!("output layouts differ: {:?} vs {:?}", lhs.shape(), rhs.shape())));
    }
    let abs = lhs.max_abs_diff(&rhs)?.as_f64();
    let scale = rhs.max_abs().as_f64();
    Ok((abs, if scale > 0.0 { abs / scale } else { abs }))
}

/// Everything the audit knows how to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AuditTarget {
    PatchEmbed,
    Linear,
    SelfAttention,
    Downsample,
    PixelShuffle,
    LayerNorm,
    EqViT,
    EqSwin,
    EqSwinSr,
    /// An equivariant linear layer with one weight block perturbed so the
    /// sharing pattern no longer holds.
    BrokenLinear,
}

impl AuditTarget {
    pub const LAYERS: [AuditTarget; 6] = [
        AuditTarget::PatchEmbed,
        AuditTarget::Linear,
        AuditTarget::SelfAttention,
        AuditTarget::Downsample,
        AuditTarget::PixelShuffle,
        AuditTarget::LayerNorm,
    ];
    pub const MODELS: [AuditTarget; 3] = [AuditTarget::EqViT, AuditTarget::EqSwin, AuditTarget::EqSwinSr];
    pub const SHIPPED: [AuditTarget; 9] = [
        AuditTarget::PatchEmbed,
        AuditTarget::Linear,
        AuditTarget::SelfAttention,
        AuditTarget::Downsample,
        AuditTarget::PixelShuffle,
        AuditTarget::LayerNorm,
        AuditTarget::EqViT,
        AuditTarget::EqSwin,
        AuditTarget::EqSwinSr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AuditTarget::PatchEmbed => "eq_patch_embed",
            AuditTarget::Linear => "eq_linear",
            AuditTarget::SelfAttention => "eq_self_attention",
            AuditTarget::Downsample => "eq_downsample",
            AuditTarget::PixelShuffle => "eq_pixel_shuffle",
            AuditTarget::LayerNorm => "eq_layernorm",
            AuditTarget::EqViT => "eqvit",
            AuditTarget::EqSwin => "eqswin",
            AuditTarget::EqSwinSr => "eqswin_sr",
            AuditTarget::BrokenLinear => "broken_linear",
        }
    }

    pub fn is_model(self) -> bool {
        Self::MODELS.contains(&self)
    }

    /// Largest accepted max-abs error.
    pub fn threshold(self, precision: Precision) -> f64 {
        match (self.is_model(), precision) {
            (false, Precision::F64) => 1e-10,
            (true, Precision::F64) => 1e-8,
            (false, Precision::F32) => 1e-4,
            (true, Precision::F32) => 1e-3,
        }
    }
}

impl fmt::Display for AuditTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AuditTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::SHIPPED
            .iter()
            .chain(&[AuditTarget::BrokenLinear])
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| domain(format!("unknown audit target {s:?}")))
    }
}

/// Fixed seeds shared by every audit.
pub const AUDIT_SEEDS: [u64; 20] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19];

type Forward<T> = Box<dyn Fn(&NdArray<T>) -> Result<NdArray<T>>>;

struct Case<T: Scalar> {
    f: Forward<T>,
    x: NdArray<T>,
    tin: Transport,
    tout: Transport,
}

fn uniform<T: Scalar>(init: &mut Init, shape: &[usize]) -> NdArray<T> {
    init.uniform(shape, -1.0, 1.0)
}

fn lifted_tokens<T: Scalar>(x: &NdArray<T>, spec: GroupSpec) -> Result<Tensor<T>> {
    LiftedFeature::tokens(Tensor::constant(x.clone()), spec)?.flat()
}

fn randomize_tables<T: Scalar>(model: &mut dyn Module<T>, init: &mut Init) {
    model.visit_params_mut(&mut |p| {
        if p.name.ends_with(".table") {
            p.value = uniform(init, p.value.shape());
        }
    });
}

/// Small configurations shared by audits, degeneration checks and tests.
pub fn toy_vit(spec: GroupSpec) -> EqViTConfig {
    EqViTConfig {
        image_side: 16,
        in_channels: 1,
        patch: 4,
        channels: 4,
        depth: 2,
        heads: 2,
        group: spec,
        mlp_ratio: 2,
        num_classes: 4,
        use_ape: true,
    }
}

pub fn toy_swin(spec: GroupSpec, head: SwinHead) -> EqSwinConfig {
    let sr = matches!(head, SwinHead::SuperResolve { .. });
    EqSwinConfig {
        image_side: if sr { 16 } else { 32 },
        in_channels: 1,
        patch: 2,
        channels: 4,
        group: spec,
        mlp_ratio: 2,
        window: 4,
        shift: 2,
        depths: if sr { vec![2] } else { vec![2, 2] },
        heads: if sr { vec![2] } else { vec![1, 2] },
        use_rpe: true,
        use_ape: true,
        head,
    }
}

fn build<T: Scalar>(target: AuditTarget, spec: GroupSpec, seed: u64) -> Result<Case<T>> {
    let mut init = Init::new(seed);
    let t = spec.order();
    let case = match target {
        AuditTarget::PatchEmbed => {
            let k = EqConvKernel::<T>::new("embed", spec, 2, 2, 3, &mut init)?;
            let x = uniform(&mut init, &[8, 8, 2]);
            Case {
                f: Box::new(move |x| {
                    let ctx = Ctx::inference();
                    Ok(k.forward(&ctx, &Tensor::constant(x.clone()))?.value().clone())
                }),
                x,
                tin: Transport::Spatial,
                tout: Transport::Lifted,
            }
        }
        AuditTarget::Linear => {
            let mut l = EqLinear::<T>::new("l", spec, 3, 2, true, &mut init);
            if let Some(b) = &mut l.bias {
                b.value = uniform(&mut init, &[2]);
            }
            let x = uniform(&mut init, &[16, 3, t]);
            Case {
                f: Box::new(move |x| {
                    let z = LiftedFeature::tokens(Tensor::constant(x.clone()), spec)?;
                    Ok(l.forward(&Ctx::inference(), &z)?.value().clone())
                }),
                x,
                tin: Transport::Lifted,
                tout: Transport::Lifted,
            }
        }
        AuditTarget::SelfAttention => {
            let (side, c, heads, window, shift) = (6, 4, 2, 3, 1);
            let attn = EqSelfAttention::<T>::new("attn", spec, c, heads, &mut init)?;
            let mut ape = EqApe::<T>::new("ape", spec, side, c)?;
            ape.table.value = uniform(&mut init, ape.table.value.shape());
            let mut rpe = EqRpe::<T>::new("rpe", spec, window, heads)?;
            rpe.table.value = uniform(&mut init, rpe.table.value.shape());
            let plan = WindowPlan::new(&spec, side, window, shift, &EqRpeMaps::of(&rpe))?;
            let x = uniform(&mut init, &[side * side, c, t]);
            Case {
                f: Box::new(move |x| {
                    let ctx = Ctx::inference();
                    let z = ape.forward_flat(&ctx, &lifted_tokens(x, spec)?)?;
                    let bias = plan.bias(Some(&ctx.bind(&rpe.table)), heads)?;
                    let out = attn.forward_flat(&ctx, &z, Some(&bias))?;
                    Ok(out.reshape(&[side * side, c, spec.order()])?.value().clone())
                }),
                x,
                tin: Transport::Lifted,
                tout: Transport::Lifted,
            }
        }
        AuditTarget::Downsample | AuditTarget::PixelShuffle => {
            let x = uniform(&mut init, &[4, 4, 4, t]);
            let shuffle = target == AuditTarget::PixelShuffle;
            Case {
                f: Box::new(move |x| {
                    let z = LiftedFeature::spatial(Tensor::constant(x.clone()), spec)?;
                    let out = if shuffle { eq_pixel_shuffle(&z, 2)? } else { eq_downsample(&z, 2)? };
                    Ok(out.value().clone())
                }),
                x,
                tin: Transport::Lifted,
                tout: Transport::Lifted,
            }
        }
        AuditTarget::LayerNorm => {
            let gamma: NdArray<T> = init.uniform(&[3], 0.5, 1.5);
            let beta: NdArray<T> = uniform(&mut init, &[3]);
            let x = uniform(&mut init, &[16, 3, t]);
            Case {
                f: Box::new(move |x| {
                    let z = lifted_tokens(x, spec)?;
                    let out = eq_layernorm(
                        &z,
                        &Tensor::constant(gamma.clone()),
                        &Tensor::constant(beta.clone()),
                        &spec,
                        crate::layers::LAYER_NORM_EPS,
                    )?;
                    Ok(out.reshape(&[16, 3, spec.order()])?.value().clone())
                }),
                x,
                tin: Transport::Lifted,
                tout: Transport::Lifted,
            }
        }
        AuditTarget::EqViT => {
            let mut m = EqViT::<T>::new(&toy_vit(spec), seed)?;
            randomize_tables(&mut m, &mut init);
            let x = uniform(&mut init, &[16, 16, 1]);
            Case {
                f: Box::new(move |x| Ok(m.forward(&Ctx::inference(), &Tensor::constant(x.clone()))?.value().clone())),
                x,
                tin: Transport::Spatial,
                tout: Transport::Invariant,
            }
        }
        AuditTarget::EqSwin | AuditTarget::EqSwinSr => {
            let sr = target == AuditTarget::EqSwinSr;
            let head = if sr {
                SwinHead::SuperResolve { scale: 2, residual: true }
            } else {
                SwinHead::Classify { num_classes: 4 }
            };
            let cfg = toy_swin(spec, head);
            let side = cfg.image_side;
            let mut m = EqSwin::<T>::new(&cfg, seed)?;
            randomize_tables(&mut m, &mut init);
            let x = uniform(&mut init, &[side, side, 1]);
            Case {
                f: Box::new(move |x| Ok(m.forward(&Ctx::inference(), &Tensor::constant(x.clone()))?.value().clone())),
                x,
                tin: Transport::Spatial,
                tout: if sr { Transport::Spatial } else { Transport::Invariant },
            }
        }
        AuditTarget::BrokenLinear => {
            let l = EqLinear::<T>::new("l", spec, 3, 2, false, &mut init);
            let blocks: Vec<NdArray<T>> = l.blocks.iter().map(|p| p.value.clone()).collect();
            let mut tiled = tiled_matrix(&blocks, &spec)?;
            // perturb the (slot 0, slot 0) block only
            for ci in 0..3 {
                for co in 0..2 {
                    let idx = [ci * t, co * t];
                    let v = tiled.get(&idx) + T::lit(init.uniform::<f64>(&[1], 0.5, 1.0).data()[0]);
                    tiled.set(&idx, v);
                }
            }
            let x = uniform(&mut init, &[16, 3, t]);
            let w = Tensor::constant(tiled);
            Case {
                f: Box::new(move |x| {
                    let out = lifted_tokens(x, spec)?.matmul(&w)?;
                    Ok(out.reshape(&[16, 2, spec.order()])?.value().clone())
                }),
                x,
                tin: Transport::Lifted,
                tout: Transport::Lifted,
            }
        }
    };
    Ok(case)
}

fn audit_typed<T: Scalar>(target: AuditTarget, spec: GroupSpec, seeds: &[u64]) -> Result<EquivarianceReport> {
    let mut report = EquivarianceReport::new(target.name(), spec, T::PRECISION);
    for &seed in seeds {
        let case = build::<T>(target, spec, seed)?;
        for g in spec.elements() {
            let (max_abs, max_rel) = equivariance_error(case.f.as_ref(), &case.x, g, &spec, case.tin, case.tout)?;
            report.cells.push(ReportCell { g, seed, max_abs, max_rel });
        }
    }
    report.sort();
    Ok(report)
}

/// Measures `target` over every element of `spec` and every seed.
pub fn audit(target: AuditTarget, spec: GroupSpec, precision: Precision, seeds: &[u64]) -> Result<EquivarianceReport> {
    if !spec.acts_on_grid() {
        return Err(domain(format!("group {} does not act on square grids", spec.name())));
    }
    match precision {
        Precision::F64 => audit_typed::<f64>(target, spec, seeds),
        Precision::F32 => audit_typed::<f32>(target, spec, seeds),
    }
}

/// Largest gap between `eq_linear` and the explicit tiled product on one
/// random configuration.
pub fn tiling_gap(spec: GroupSpec, c_in: usize, c_out: usize, tokens: usize, seed: u64) -> Result<f64> {
    let mut init = Init::new(seed);
    let t = spec.order();
    let blocks: Vec<NdArray<f64>> = (0..t).map(|_| uniform(&mut init, &[c_in, c_out])).collect();
    let z: NdArray<f64> = uniform(&mut init, &[tokens, c_in * t]);
    let bt: Vec<Tensor<f64>> = blocks.iter().cloned().map(Tensor::constant).collect();
    let got = eq_linear(&Tensor::constant(z.clone()), &bt, None, &spec)?;
    let want = z.matmul(&tiled_matrix(&blocks, &spec)?)?;
    got.value().max_abs_diff(&want)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gives_exact_zero() {
        let spec = GroupSpec::d4();
        for target in AuditTarget::SHIPPED {
            let case = build::<f64>(target, spec, 0).unwrap();
            let (abs, _) =
                equivariance_error(case.f.as_ref(), &case.x, spec.identity(), &spec, case.tin, case.tout).unwrap();
            assert_eq!(abs, 0.0, "{target}");
        }
    }

    #[test]
    fn layers_pass_on_a_few_seeds() {
        for target in AuditTarget::LAYERS {
            let r = audit(target, GroupSpec::d4(), Precision::F64, &[0, 1]).unwrap();
            assert!(r.passes(target.threshold(Precision::F64)), "{target}: {}", r.max_abs());
            assert_eq!(r.cells.len(), 16);
        }
    }

    #[test]
    fn broken_layer_is_flagged() {
        let r = audit(AuditTarget::BrokenLinear, GroupSpec::c4(), Precision::F64, &[0]).unwrap();
        assert!(r.max_abs() >= 1e-2);
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let spec = GroupSpec::c4();
        let f = |x: &NdArray<f64>| Ok(x.clone());
        let x = NdArray::zeros(vec![3, 3]);
        assert!(equivariance_error(&f, &x, spec.rotation(), &spec, Transport::Lifted, Transport::Lifted).is_err());
    }

    #[test]
    fn target_names_parse() {
        for t in AuditTarget::SHIPPED {
            assert_eq!(t.name().parse::<AuditTarget>().unwrap(), t);
        }
        assert!("nope".parse::<AuditTarget>().is_err());
    }
}
