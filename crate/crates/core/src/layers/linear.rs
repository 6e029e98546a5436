use std::rc::Rc;

use crate::error::{domain, shape_err, Result};
use crate::group::GroupSpec;
use crate::nn::{Ctx, Init, Module, Param};
use crate::tensor::{NdArray, Scalar, Tensor};

use super::LiftedFeature;

/// Flat index into the stacked `[|S|, c_in, c_out]` blocks for every entry of
/// the `[c_in·|S|, c_out·|S|]` tiled matrix. Entry `((ci, g), (co, B))` is
/// `W_{B⁻¹∘g}[ci][co]`.
pub fn tiled_index(spec: &GroupSpec, c_in: usize, c_out: usize) -> Vec<usize> {
    let t = spec.order();
    let block = c_in * c_out;
    let mut source = vec![0usize; t * t];
    for g in 0..t {
        for b in 0..t {
            let (ge, be) = (spec.element(g), spec.element(b));
            source[g * t + b] = spec.index_of(spec.compose(spec.inverse(be), ge));
        }
    }
    let mut index = Vec::with_capacity(block * t * t);
    for ci in 0..c_in {
        for g in 0..t {
            for co in 0..c_out {
                for b in 0..t {
                    index.push(source[g * t + b] * block + ci * c_out + co);
                }
            }
        }
    }
    index
}

/// `[N, c_in·|S|] -> [N, c_out·|S|]` through the block-circulant matrix
/// assembled from `blocks` (`|S|` tensors of shape `[c_in, c_out]`), plus an
/// optional per-channel bias shared by all group slots.
pub fn eq_linear<T: Scalar>(
    z: &Tensor<T>,
    blocks: &[Tensor<T>],
    bias: Option<&Tensor<T>>,
    spec: &GroupSpec,
) -> Result<Tensor<T>> {
    let t = spec.order();
    if blocks.len() != t {
        return Err(domain(format!("expected {t} weight blocks, got {}", blocks.len())));
    }
    let bs = blocks[0].shape().to_vec();
    if bs.len() != 2 || blocks.iter().any(|b| b.shape() != bs.as_slice()) {
        return Err(shape_err("eq_linear blocks", &bs, blocks.last().unwrap().shape()));
    }
    let (c_in, c_out) = (bs[0], bs[1]);
    let zs = z.shape();
    if zs.len() != 2 || zs[1] != c_in * t {
        return Err(shape_err("eq_linear", zs, &[0, c_in * t]));
    }
    let flat: Vec<Tensor<T>> = blocks.iter().map(|b| b.reshape(&[c_in * c_out])).collect::<Result<_>>()?;
    let stacked = Tensor::concat(&flat, 0)?;
    let index = tiled_index(spec, c_in, c_out);
    let tiled = stacked.gather(Rc::from(index), &[c_in * t, c_out * t])?;
    let mut out = z.matmul(&tiled)?;
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(shape_err("eq_linear bias", b.shape(), &[c_out]));
        }
        let rows = zs[0];
        let index: Vec<usize> = (0..rows * c_out * t).map(|i| (i % (c_out * t)) / t).collect();
        out = out.add(&b.gather(Rc::from(index), &[rows, c_out * t])?)?;
    }
    Ok(out)
}

/// Array-level tiled matrix, used by audits and tests.
pub fn tiled_matrix<T: Scalar>(blocks: &[NdArray<T>], spec: &GroupSpec) -> Result<NdArray<T>> {
    let t = spec.order();
    if blocks.len() != t {
        return Err(domain(format!("expected {t} weight blocks, got {}", blocks.len())));
    }
    let s = blocks[0].shape().to_vec();
    let stacked: Vec<T> = blocks.iter().flat_map(|b| b.data().iter().copied()).collect();
    let stacked = NdArray::new(vec![stacked.len()], stacked)?;
    Ok(stacked.gather_flat(&tiled_index(spec, s[0], s[1]), vec![s[0] * t, s[1] * t]))
}

/// Group-equivariant linear layer: one `[c_in, c_out]` block per element.
#[derive(Debug, Clone)]
pub struct EqLinear<T: Scalar> {
    pub blocks: Vec<Param<T>>,
    pub bias: Option<Param<T>>,
    spec: GroupSpec,
}

impl<T: Scalar> EqLinear<T> {
    pub fn new(name: &str, spec: GroupSpec, c_in: usize, c_out: usize, bias: bool, init: &mut Init) -> Self {
        let std = (1.0 / (c_in * spec.order()) as f64).sqrt();
        let blocks =
            (0..spec.order()).map(|g| Param::new(format!("{name}.g{g}"), init.normal(&[c_in, c_out], std))).collect();
        let bias = bias.then(|| Param::new(format!("{name}.bias"), NdArray::zeros(vec![c_out])));
        EqLinear { blocks, bias, spec }
    }

    pub fn c_in(&self) -> usize {
        self.blocks[0].value.shape()[0]
    }

    pub fn c_out(&self) -> usize {
        self.blocks[0].value.shape()[1]
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn forward_flat(&self, ctx: &Ctx<T>, z: &Tensor<T>) -> Result<Tensor<T>> {
        let blocks: Vec<Tensor<T>> = self.blocks.iter().map(|p| ctx.bind(p)).collect();
        let bias = self.bias.as_ref().map(|p| ctx.bind(p));
        eq_linear(z, &blocks, bias.as_ref(), &self.spec)
    }

    /// Applies the layer token-wise, keeping the layout of `z`.
    pub fn forward(&self, ctx: &Ctx<T>, z: &LiftedFeature<T>) -> Result<LiftedFeature<T>> {
        let out = self.forward_flat(ctx, &z.flat()?)?;
        let mut shape = z.data().shape().to_vec();
        let rank = shape.len();
        shape[rank - 2] = self.c_out();
        z.with_data(out.reshape(&shape)?)
    }
}

impl<T: Scalar> Module<T> for EqLinear<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.blocks.iter().for_each(&mut *f);
        if let Some(b) = &self.bias {
            f(b);
        }
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.blocks.iter_mut().for_each(&mut *f);
        if let Some(b) = &mut self.bias {
            f(b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::lifted_transform;

    // q^B = Σ_g z^g W_{B⁻¹ g}, in plain loops
    fn oracle(z: &NdArray<f64>, blocks: &[NdArray<f64>], spec: &GroupSpec) -> NdArray<f64> {
        let t = spec.order();
        let (c_in, c_out) = (blocks[0].shape()[0], blocks[0].shape()[1]);
        let n = z.shape()[0];
        let mut out = NdArray::zeros(vec![n, c_out * t]);
        for p in 0..n {
            for b in 0..t {
                let binv = spec.inverse(spec.element(b));
                for g in 0..t {
                    let w = &blocks[spec.index_of(spec.compose(binv, spec.element(g)))];
                    for ci in 0..c_in {
                        let zv = z.get(&[p, ci * t + g]);
                        for co in 0..c_out {
                            let cur = out.get(&[p, co * t + b]);
                            out.set(&[p, co * t + b], cur + zv * w.get(&[ci, co]));
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn c4_tiled_matrix_is_circulant() {
        let spec = GroupSpec::c4();
        let blocks: Vec<NdArray<f64>> = (0..4).map(|g| NdArray::from_f64(vec![1, 1], &[g as f64]).unwrap()).collect();
        let m = tiled_matrix(&blocks, &spec).unwrap();
        // row g, column B holds W_{g - B}
        for g in 0..4 {
            for b in 0..4 {
                assert_eq!(m.get(&[g, b]), ((g + 4 - b) % 4) as f64);
            }
        }
    }

    #[test]
    fn matches_sharing_oracle() {
        for spec in [GroupSpec::c4(), GroupSpec::d4(), GroupSpec::new(3, true).unwrap()] {
            let mut init = Init::new(3);
            let t = spec.order();
            let z: NdArray<f64> = init.uniform(&[5, 2 * t], -1.0, 1.0);
            let blocks: Vec<NdArray<f64>> = (0..t).map(|_| init.uniform(&[2, 3], -1.0, 1.0)).collect();
            let bt: Vec<Tensor<f64>> = blocks.iter().cloned().map(Tensor::constant).collect();
            let got = eq_linear(&Tensor::constant(z.clone()), &bt, None, &spec).unwrap();
            let want = oracle(&z, &blocks, &spec);
            assert!(got.value().max_abs_diff(&want).unwrap() < 1e-12, "{}", spec.name());
        }
    }

    #[test]
    fn bias_is_shared_across_slots() {
        let spec = GroupSpec::c4();
        let mut init = Init::new(4);
        let mut layer = EqLinear::<f64>::new("l", spec, 1, 2, true, &mut init);
        for p in &mut layer.blocks {
            p.value = NdArray::zeros(vec![1, 2]);
        }
        layer.bias.as_mut().unwrap().value = NdArray::from_f64(vec![2], &[1.5, -2.0]).unwrap();
        let z = Tensor::constant(NdArray::zeros(vec![3, 4]));
        let out = layer.forward_flat(&Ctx::inference(), &z).unwrap();
        assert_eq!(&out.value().data()[..8], &[1.5, 1.5, 1.5, 1.5, -2.0, -2.0, -2.0, -2.0]);
    }

    #[test]
    fn commutes_with_lifted_action() {
        let spec = GroupSpec::d4();
        let mut init = Init::new(5);
        let layer = EqLinear::<f64>::new("l", spec, 2, 3, true, &mut init);
        let z = LiftedFeature::tokens(Tensor::constant(init.uniform(&[16, 2, 8], -1.0, 1.0)), spec).unwrap();
        let ctx = Ctx::inference();
        let base = layer.forward(&ctx, &z).unwrap();
        for g in spec.elements() {
            let lhs = layer.forward(&ctx, &lifted_transform(g, &z).unwrap()).unwrap();
            let rhs = lifted_transform(g, &base).unwrap();
            assert!(lhs.value().max_abs_diff(rhs.value()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn trivial_group_is_plain_linear() {
        let spec = GroupSpec::trivial();
        let mut init = Init::new(7);
        let z: NdArray<f64> = init.uniform(&[3, 4], -1.0, 1.0);
        let w: NdArray<f64> = init.uniform(&[4, 2], -1.0, 1.0);
        let got = eq_linear(&Tensor::constant(z.clone()), &[Tensor::constant(w.clone())], None, &spec).unwrap();
        assert!(got.value().max_abs_diff(&z.matmul(&w).unwrap()).unwrap() < 1e-15);
    }
}
