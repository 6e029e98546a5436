use std::rc::Rc;

use crate::error::{shape_err, Result};
use crate::group::GroupSpec;
use crate::nn::{Ctx, Module, Param};
use crate::tensor::{NdArray, Scalar, Tensor};

use super::LiftedFeature;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Layer norm over the whole `c·|S|` axis with affine parameters `γ, β` of
/// length `c`, expanded so every slot of a channel shares one value.
pub fn eq_layernorm<T: Scalar>(
    z: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    spec: &GroupSpec,
    eps: f64,
) -> Result<Tensor<T>> {
    let t = spec.order();
    let zs = z.shape().to_vec();
    let c = gamma.len();
    if zs.len() != 2 || zs[1] != c * t || gamma.shape() != [c] || beta.shape() != [c] {
        return Err(shape_err("eq_layernorm", &zs, gamma.shape()));
    }
    let width = c * t;
    let (mean, var) = z.mean_var_last()?;
    let centered = z.sub(&mean.broadcast_last(width)?)?;
    let inv_std = var.add_scalar(T::lit(eps)).powf(T::lit(-0.5)).broadcast_last(width)?;
    let normed = centered.mul(&inv_std)?;
    let index: Rc<[usize]> = (0..zs[0] * width).map(|i| (i % width) / t).collect();
    let g = gamma.gather(Rc::clone(&index), &zs)?;
    let b = beta.gather(index, &zs)?;
    normed.mul(&g)?.add(&b)
}

#[derive(Debug, Clone)]
pub struct EqLayerNorm<T: Scalar> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub eps: f64,
    spec: GroupSpec,
}

impl<T: Scalar> EqLayerNorm<T> {
    pub fn new(name: &str, spec: GroupSpec, channels: usize) -> Self {
        EqLayerNorm {
            gamma: Param::new(format!("{name}.gamma"), NdArray::full(vec![channels], T::one())),
            beta: Param::new(format!("{name}.beta"), NdArray::zeros(vec![channels])),
            eps: LAYER_NORM_EPS,
            spec,
        }
    }

    pub fn forward_flat(&self, ctx: &Ctx<T>, z: &Tensor<T>) -> Result<Tensor<T>> {
        eq_layernorm(z, &ctx.bind(&self.gamma), &ctx.bind(&self.beta), &self.spec, self.eps)
    }

    pub fn forward(&self, ctx: &Ctx<T>, z: &LiftedFeature<T>) -> Result<LiftedFeature<T>> {
        let out = self.forward_flat(ctx, &z.flat()?)?;
        z.with_data(out.reshape(z.data().shape())?)
    }
}

impl<T: Scalar> Module<T> for EqLayerNorm<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.gamma);
        f(&self.beta);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}
