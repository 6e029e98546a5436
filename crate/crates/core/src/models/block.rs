use std::rc::Rc;

use crate::error::Result;
use crate::group::GroupSpec;
use crate::layers::{EqLayerNorm, EqLinear, EqRpe, EqRpeMaps, EqSelfAttention, WindowPlan};
use crate::nn::{Ctx, Init, Module, Param};
use crate::tensor::{NdArray, Scalar, Tensor};

/// Window settings for one block.
#[derive(Debug, Clone, Copy)]
pub struct WindowSpec {
    pub grid_side: usize,
    pub window: usize,
    pub shift: usize,
    pub use_rpe: bool,
}

/// Pre-norm transformer block on `[N, c·|S|]` tokens.
#[derive(Debug, Clone)]
pub struct EqBlock<T: Scalar> {
    pub ln1: EqLayerNorm<T>,
    pub attn: EqSelfAttention<T>,
    pub wo: EqLinear<T>,
    pub ln2: EqLayerNorm<T>,
    pub fc1: EqLinear<T>,
    pub fc2: EqLinear<T>,
    pub rpe: Option<EqRpe<T>>,
    plan: Option<WindowPlan>,
}

impl<T: Scalar> EqBlock<T> {
    pub fn new(
        name: &str,
        spec: GroupSpec,
        channels: usize,
        heads: usize,
        mlp_ratio: usize,
        window: Option<WindowSpec>,
        init: &mut Init,
    ) -> Result<Self> {
        let hidden = channels * mlp_ratio;
        let attn = EqSelfAttention::new(&format!("{name}.attn"), spec, channels, heads, init)?;
        let wo = EqLinear::new(&format!("{name}.attn.wo"), spec, channels, channels, true, init);
        let fc1 = EqLinear::new(&format!("{name}.mlp.fc1"), spec, channels, hidden, true, init);
        let fc2 = EqLinear::new(&format!("{name}.mlp.fc2"), spec, hidden, channels, true, init);
        let (rpe, plan) = match window {
            None => (None, None),
            Some(w) => {
                let rpe =
                    if w.use_rpe { Some(EqRpe::new(&format!("{name}.rpe"), spec, w.window, heads)?) } else { None };
                let maps = match &rpe {
                    Some(r) => EqRpeMaps::of(r),
                    None => EqRpeMaps::new(&spec, w.window)?,
                };
                let plan = WindowPlan::new(&spec, w.grid_side, w.window, w.shift, &maps)?;
                (rpe, Some(plan))
            }
        };
        Ok(EqBlock {
            ln1: EqLayerNorm::new(&format!("{name}.ln1"), spec, channels),
            attn,
            wo,
            ln2: EqLayerNorm::new(&format!("{name}.ln2"), spec, channels),
            fc1,
            fc2,
            rpe,
            plan,
        })
    }

    pub fn plan(&self) -> Option<&WindowPlan> {
        self.plan.as_ref()
    }

    pub fn forward_flat(&self, ctx: &Ctx<T>, z: &Tensor<T>) -> Result<Tensor<T>> {
        let heads = self.attn.heads;
        let bias = match (&self.plan, &self.rpe) {
            (Some(plan), Some(rpe)) => Some(plan.bias(Some(&ctx.bind(&rpe.table)), heads)?),
            (Some(plan), None) if plan.has_mask() => Some(plan.bias::<T>(None, heads)?),
            _ => None,
        };
        let h = self.ln1.forward_flat(ctx, z)?;
        let h = self.attn.forward_flat(ctx, &h, bias.as_deref())?;
        let z = z.add(&self.wo.forward_flat(ctx, &h)?)?;
        let h = self.ln2.forward_flat(ctx, &z)?;
        let h = self.fc2.forward_flat(ctx, &self.fc1.forward_flat(ctx, &h)?.gelu())?;
        z.add(&h)
    }
}

impl<T: Scalar> Module<T> for EqBlock<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.ln1.visit_params(f);
        self.attn.visit_params(f);
        self.wo.visit_params(f);
        self.ln2.visit_params(f);
        self.fc1.visit_params(f);
        self.fc2.visit_params(f);
        if let Some(r) = &self.rpe {
            r.visit_params(f);
        }
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.ln1.visit_params_mut(f);
        self.attn.visit_params_mut(f);
        self.wo.visit_params_mut(f);
        self.ln2.visit_params_mut(f);
        self.fc1.visit_params_mut(f);
        self.fc2.visit_params_mut(f);
        if let Some(r) = &mut self.rpe {
            r.visit_params_mut(f);
        }
    }
}

/// `[N, c·|S|] -> [N, c]` by averaging the group axis.
pub fn group_mean<T: Scalar>(z: &Tensor<T>, spec: &GroupSpec) -> Result<Tensor<T>> {
    let t = spec.order();
    let s = z.shape().to_vec();
    z.reshape(&[s[0] * s[1] / t, t])?.mean_axis(1)?.reshape(&[s[0], s[1] / t])
}

/// Final norm, group mean, token mean and a plain linear map to logits.
#[derive(Debug, Clone)]
pub struct InvariantHead<T: Scalar> {
    pub ln: EqLayerNorm<T>,
    pub w: Param<T>,
    pub b: Param<T>,
    spec: GroupSpec,
}

impl<T: Scalar> InvariantHead<T> {
    pub fn new(name: &str, spec: GroupSpec, channels: usize, classes: usize, init: &mut Init) -> Self {
        InvariantHead {
            ln: EqLayerNorm::new(&format!("{name}.ln"), spec, channels),
            w: Param::new(format!("{name}.w"), init.normal(&[channels, classes], (1.0 / channels as f64).sqrt())),
            b: Param::new(format!("{name}.b"), NdArray::zeros(vec![classes])),
            spec,
        }
    }

    /// `[N, c·|S|]` tokens to `[K]` logits.
    pub fn forward_flat(&self, ctx: &Ctx<T>, z: &Tensor<T>) -> Result<Tensor<T>> {
        let pooled = group_mean(&self.ln.forward_flat(ctx, z)?, &self.spec)?.mean_axis(0)?;
        let c = pooled.len();
        let k = self.b.len();
        pooled.reshape(&[1, c])?.matmul(&ctx.bind(&self.w))?.reshape(&[k])?.add(&ctx.bind(&self.b))
    }
}

impl<T: Scalar> Module<T> for InvariantHead<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.ln.visit_params(f);
        f(&self.w);
        f(&self.b);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.ln.visit_params_mut(f);
        f(&mut self.w);
        f(&mut self.b);
    }
}

/// Nearest-neighbour upsampling of `[h, w, c]` by `r`.
pub fn upsample_nearest<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let s = x.shape().to_vec();
    let (h, w, c) = (s[0], s[1], s[2]);
    let mut index = Vec::with_capacity(h * w * c * r * r);
    for i in 0..h * r {
        for j in 0..w * r {
            let base = ((i / r) * w + j / r) * c;
            index.extend(base..base + c);
        }
    }
    x.gather(Rc::from(index), &[h * r, w * r, c])
}

/// Anything that maps one image to one output.
pub trait ImageModel<T: Scalar>: Module<T> {
    /// `[H, W, c0]` image to logits `[K]` or an image.
    fn forward(&self, ctx: &Ctx<T>, image: &Tensor<T>) -> Result<Tensor<T>>;

    /// Stacks per-image outputs along a new leading axis.
    fn forward_batch(&self, ctx: &Ctx<T>, images: &[NdArray<T>]) -> Result<Tensor<T>> {
        let outs = images
            .iter()
            .map(|x| {
                let y = self.forward(ctx, &Tensor::constant(x.clone()))?;
                let mut shape = vec![1];
                shape.extend_from_slice(y.shape());
                y.reshape(&shape)
            })
            .collect::<Result<Vec<_>>>()?;
        Tensor::concat(&outs, 0)
    }
}
