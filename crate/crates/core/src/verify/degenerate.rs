use crate::error::Result;
use crate::group::GroupSpec;
use crate::layers::{eq_layernorm, eq_linear, eq_patch_embed, LAYER_NORM_EPS};
use crate::models::{transfer_weights, ImageModel, LayerNorm, PlainSwin, PlainViT, SwinHead};
use crate::models::{EqSwin, EqViT};
use crate::nn::{Ctx, Init, Module};
use crate::tensor::{NdArray, Tensor};

use super::equivariance::{toy_swin, toy_vit};

/// Largest gap between a trivial-group component and its plain counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerationGap {
    pub name: &'static str,
    pub max_abs: f64,
}

/// Gives every parameter a random value, so zero-initialised tables and
/// unit norms cannot hide a mismatch.
fn randomize(model: &mut dyn Module<f64>, init: &mut Init) {
    model.visit_params_mut(&mut |p| p.value = init.uniform(p.value.shape(), -0.5, 0.5));
}

fn model_gap(
    eq: &mut dyn ImageModel<f64>,
    plain: &mut dyn ImageModel<f64>,
    side: usize,
    init: &mut Init,
) -> Result<f64> {
    randomize(eq, init);
    transfer_weights(eq, plain)?;
    let ctx = Ctx::inference();
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let x = Tensor::constant(init.uniform(&[side, side, 1], -1.0, 1.0));
        let a = eq.forward(&ctx, &x)?;
        let b = plain.forward(&ctx, &x)?;
        worst = worst.max(a.value().max_abs_diff(b.value())?);
    }
    Ok(worst)
}

/// Compares `|S| = 1` layers and models with the plain implementations.
pub fn degeneration_gaps(seed: u64) -> Result<Vec<DegenerationGap>> {
    let e = GroupSpec::trivial();
    let mut init = Init::new(seed);
    let mut u = |s: &[usize]| -> NdArray<f64> { init.uniform(s, -1.0, 1.0) };
    let mut out = Vec::new();

    let (z, w, b) = (u(&[7, 5]), u(&[5, 3]), u(&[3]));
    let got = eq_linear(
        &Tensor::constant(z.clone()),
        &[Tensor::constant(w.clone())],
        Some(&Tensor::constant(b.clone())),
        &e,
    )?;
    let want = NdArray::from_fn(vec![7, 3], |i| {
        let (r, c) = (i / 3, i % 3);
        b.data()[c] + (0..5).map(|k| z.get(&[r, k]) * w.get(&[k, c])).sum::<f64>()
    });
    out.push(DegenerationGap { name: "eq_linear", max_abs: got.value().max_abs_diff(&want)? });

    let (z, g, bb) = (u(&[6, 4]), u(&[4]), u(&[4]));
    let mut ln = LayerNorm::<f64>::new("ln", 4);
    ln.gamma.value = g.clone();
    ln.beta.value = bb.clone();
    let ctx = Ctx::inference();
    let got =
        eq_layernorm(&Tensor::constant(z.clone()), &Tensor::constant(g), &Tensor::constant(bb), &e, LAYER_NORM_EPS)?;
    let want = ln.forward(&ctx, &Tensor::constant(z))?;
    out.push(DegenerationGap { name: "eq_layernorm", max_abs: got.value().max_abs_diff(want.value())? });

    let (x, psi) = (u(&[6, 6, 2]), u(&[3, 3, 2, 4]));
    let got = eq_patch_embed(&Tensor::constant(x.clone()), &Tensor::constant(psi.clone()), 3, &e)?;
    let want = Tensor::constant(x).conv2d(&Tensor::constant(psi), 3)?.reshape(&[4, 4, 1])?;
    out.push(DegenerationGap { name: "eq_patch_embed", max_abs: got.value().max_abs_diff(want.value())? });

    let cfg = toy_vit(e);
    let gap = model_gap(&mut EqViT::new(&cfg, seed)?, &mut PlainViT::new(&cfg, seed + 1)?, cfg.image_side, &mut init)?;
    out.push(DegenerationGap { name: "eqvit", max_abs: gap });

    let cfg = toy_swin(e, SwinHead::Classify { num_classes: 4 });
    let gap =
        model_gap(&mut EqSwin::new(&cfg, seed)?, &mut PlainSwin::new(&cfg, seed + 1)?, cfg.image_side, &mut init)?;
    out.push(DegenerationGap { name: "eqswin", max_abs: gap });

    let cfg = toy_swin(e, SwinHead::SuperResolve { scale: 2, residual: true });
    let gap =
        model_gap(&mut EqSwin::new(&cfg, seed)?, &mut PlainSwin::new(&cfg, seed + 1)?, cfg.image_side, &mut init)?;
    out.push(DegenerationGap { name: "eqswin_sr", max_abs: gap });
    Ok(out)
}
