use crate::error::{domain, shape_err, Result};
use crate::group::GroupSpec;
use crate::nn::{Ctx, Init, Module, Param};
use crate::tensor::{Scalar, Tensor};

use super::LiftedFeature;

/// Learnable base kernel `ψ` of shape `[s, s, c0, c]` for the lifted patch
/// embedding.
#[derive(Debug, Clone)]
pub struct EqConvKernel<T: Scalar> {
    pub base: Param<T>,
    pub patch: usize,
    spec: GroupSpec,
}

impl<T: Scalar> EqConvKernel<T> {
    pub fn new(name: &str, spec: GroupSpec, patch: usize, c_in: usize, c_out: usize, init: &mut Init) -> Result<Self> {
        if !spec.acts_on_grid() {
            return Err(domain(format!("group {} does not act on square grids", spec.name())));
        }
        if patch == 0 || c_in == 0 || c_out == 0 {
            return Err(domain("patch embedding extents must be positive"));
        }
        let std = (1.0 / (patch * patch * c_in) as f64).sqrt();
        let base = Param::new(format!("{name}.psi"), init.normal(&[patch, patch, c_in, c_out], std));
        Ok(EqConvKernel { base, patch, spec })
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn c_out(&self) -> usize {
        self.base.value.shape()[3]
    }

    pub fn forward(&self, ctx: &Ctx<T>, x: &Tensor<T>) -> Result<LiftedFeature<T>> {
        eq_patch_embed(x, &ctx.bind(&self.base), self.patch, &self.spec)
    }
}

impl<T: Scalar> Module<T> for EqConvKernel<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.base)
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.base)
    }
}

/// Transformed copy `π_g(ψ)` for every group element, interleaved into a
/// `[s, s, c0, c·|S|]` bank with output column `ch·|S| + g`.
pub fn kernel_bank<T: Scalar>(psi: &Tensor<T>, spec: &GroupSpec) -> Result<Tensor<T>> {
    let s = psi.shape().to_vec();
    if s.len() != 4 || s[0] != s[1] {
        return Err(shape_err("kernel_bank", &s, &[0, 0, 0, 0]));
    }
    if !spec.acts_on_grid() {
        return Err(domain(format!("group {} does not act on square grids", spec.name())));
    }
    let turns_per_step = 4 / spec.t();
    let mut copies = Vec::with_capacity(spec.order());
    for g in spec.elements() {
        let mut k = psi.rot90_spatial(g.k * turns_per_step)?;
        if g.is_reflection() {
            k = k.flip_spatial(1)?;
        }
        copies.push(k.reshape(&[s[0], s[1], s[2], s[3], 1])?);
    }
    Tensor::concat(&copies, 4)?.reshape(&[s[0], s[1], s[2], s[3] * spec.order()])
}

/// Lifts an `[H, W, c0]` image to `[H/s · W/s, c, |S|]` tokens by
/// correlating every patch with every transformed copy of `ψ`.
pub fn eq_patch_embed<T: Scalar>(
    x: &Tensor<T>,
    psi: &Tensor<T>,
    patch: usize,
    spec: &GroupSpec,
) -> Result<LiftedFeature<T>> {
    let (xs, ks) = (x.shape(), psi.shape());
    if xs.len() != 3 || ks.len() != 4 || ks[0] != patch || ks[1] != patch || xs[2] != ks[2] {
        return Err(shape_err("eq_patch_embed", xs, ks));
    }
    if xs[0] % patch != 0 || xs[1] % patch != 0 {
        return Err(domain(format!("image {}x{} is not divisible by patch size {patch}", xs[0], xs[1])));
    }
    let c = ks[3];
    let bank = kernel_bank(psi, spec)?;
    let out = x.conv2d(&bank, patch)?;
    let n = out.shape()[0] * out.shape()[1];
    LiftedFeature::tokens(out.reshape(&[n, c, spec.order()])?, *spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{lifted_transform, spatial_transform};
    use crate::tensor::NdArray;

    #[test]
    fn bank_interleaves_transformed_copies() {
        let spec = GroupSpec::c4();
        let psi: NdArray<f64> = Init::new(0).uniform(&[2, 2, 1, 2], -1.0, 1.0);
        let bank = kernel_bank(&Tensor::constant(psi.clone()), &spec).unwrap();
        assert_eq!(bank.shape(), &[2, 2, 1, 8]);
        for g in spec.elements() {
            let want = spatial_transform(&spec, g, &Tensor::constant(psi.clone())).unwrap();
            let gi = spec.index_of(g);
            for a in 0..2 {
                for b in 0..2 {
                    for ch in 0..2 {
                        assert_eq!(bank.value().get(&[a, b, 0, ch * 4 + gi]), want.value().get(&[a, b, 0, ch]));
                    }
                }
            }
        }
    }

    #[test]
    fn trivial_group_is_plain_patchify() {
        let spec = GroupSpec::trivial();
        let mut init = Init::new(1);
        let x: NdArray<f64> = init.uniform(&[4, 4, 2], -1.0, 1.0);
        let psi: NdArray<f64> = init.uniform(&[2, 2, 2, 3], -1.0, 1.0);
        let z = eq_patch_embed(&Tensor::constant(x.clone()), &Tensor::constant(psi.clone()), 2, &spec).unwrap();
        for pi in 0..2 {
            for pj in 0..2 {
                for ch in 0..3 {
                    let mut acc = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            for ci in 0..2 {
                                acc += x.get(&[pi * 2 + a, pj * 2 + b, ci]) * psi.get(&[a, b, ci, ch]);
                            }
                        }
                    }
                    let got = z.value().get(&[pi * 2 + pj, ch, 0]);
                    assert!((got - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn lifting_law_holds_for_d4() {
        let spec = GroupSpec::d4();
        let mut init = Init::new(2);
        let x: NdArray<f64> = init.uniform(&[8, 8, 3], -1.0, 1.0);
        let psi = Tensor::constant(init.uniform(&[2, 2, 3, 2], -1.0, 1.0));
        let x = Tensor::constant(x);
        let base = eq_patch_embed(&x, &psi, 2, &spec).unwrap();
        for g in spec.elements() {
            let moved = eq_patch_embed(&spatial_transform(&spec, g, &x).unwrap(), &psi, 2, &spec).unwrap();
            let want = lifted_transform(g, &base).unwrap();
            let err = moved.value().max_abs_diff(want.value()).unwrap();
            assert!(err < 1e-12, "{g}: {err}");
        }
    }

    #[test]
    fn rejects_indivisible_images() {
        let spec = GroupSpec::c4();
        let x = Tensor::constant(NdArray::<f64>::zeros(vec![5, 4, 1]));
        let psi = Tensor::constant(NdArray::<f64>::zeros(vec![2, 2, 1, 1]));
        assert!(eq_patch_embed(&x, &psi, 2, &spec).is_err());
    }
}
