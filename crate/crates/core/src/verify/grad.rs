use std::rc::Rc;

use rand::seq::index::sample;

use crate::error::{domain, Result};
use crate::group::{CanonicalMaps, GroupSpec};
use crate::layers::{
    apply_ape, eq_attention, eq_downsample, eq_layernorm, eq_linear, eq_patch_embed, eq_pixel_shuffle, EqRpeMaps,
    LiftedFeature, WindowPlan, LAYER_NORM_EPS,
};
use crate::nn::Init;
use crate::tensor::{NdArray, Tensor};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Tolerance for single primitives and layers.
pub const PRIMITIVE_TOL: f64 = 1e-5;
/// Tolerance for the composed attention check.
pub const COMPOSED_TOL: f64 = 1e-4;
/// Magnitudes below this are compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-3;

/// Entries checked per input; larger inputs are subsampled.
const MAX_PROBES: usize = 48;

type GradFn = Box<dyn Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>>;

/// Outcome of one gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradResult {
    pub name: String,
    pub composed: bool,
    pub max_rel_err: f64,
    pub probes: usize,
}

impl GradResult {
    pub fn tolerance(&self) -> f64 {
        if self.composed {
            COMPOSED_TOL
        } else {
            PRIMITIVE_TOL
        }
    }

    pub fn passes(&self) -> bool {
        self.max_rel_err <= self.tolerance()
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares reverse-mode gradients of `f` against central differences.
///
/// `f` may return any shape; it is contracted with a fixed random weight so
/// every output entry contributes to the scalar being differentiated.
pub fn grad_check(name: &str, composed: bool, f: &GradFn, inputs: &[NdArray<f64>], seed: u64) -> Result<GradResult> {
    let mut init = Init::new(seed ^ 0x9e37_79b9);
    let leaves: Vec<Tensor<f64>> = inputs.iter().map(|x| Tensor::param(x.clone())).collect();
    let out = f(&leaves)?;
    let weight: NdArray<f64> = init.uniform(out.shape(), -1.0, 1.0);
    let contract =
        |y: &Tensor<f64>| -> Result<Tensor<f64>> { y.mul(&Tensor::constant(weight.clone()))?.sum().reshape(&[1]) };
    contract(&out)?.backward()?;
    let scalar = |xs: &[NdArray<f64>]| -> Result<f64> {
        let ts: Vec<Tensor<f64>> = xs.iter().map(|x| Tensor::constant(x.clone())).collect();
        Ok(contract(&f(&ts)?)?.value().data()[0])
    };

    let mut worst = 0.0f64;
    let mut probes = 0;
    for (which, leaf) in leaves.iter().enumerate() {
        let grad = leaf.grad();
        let n = inputs[which].len();
        let picks: Vec<usize> =
            if n <= MAX_PROBES { (0..n).collect() } else { sample(init.rng(), n, MAX_PROBES).into_vec() };
        for i in picks {
            let mut plus = inputs.to_vec();
            plus[which].data_mut()[i] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[which].data_mut()[i] -= FD_STEP;
            let numeric = (scalar(&plus)? - scalar(&minus)?) / (2.0 * FD_STEP);
            let err = relative_error(grad.data()[i], numeric);
            if !err.is_finite() {
                return Err(domain(format!("{name}: non-finite gradient at input {which}, entry {i}")));
            }
            worst = worst.max(err);
            probes += 1;
        }
    }
    Ok(GradResult { name: name.to_string(), composed, max_rel_err: worst, probes })
}

struct Case {
    name: &'static str,
    composed: bool,
    f: GradFn,
    inputs: Vec<NdArray<f64>>,
}

fn case(
    name: &'static str,
    inputs: Vec<NdArray<f64>>,
    f: impl Fn(&[Tensor<f64>]) -> Result<Tensor<f64>> + 'static,
) -> Case {
    Case { name, composed: false, f: Box::new(f), inputs }
}

fn registry(init: &mut Init) -> Result<Vec<Case>> {
    let mut u = |shape: &[usize]| -> NdArray<f64> { init.uniform(shape, -1.0, 1.0) };
    let d4 = GroupSpec::d4();
    let c4 = GroupSpec::c4();
    let positive = u(&[3, 4]).map(|v| v.abs() + 0.5);
    let mut cases = vec![
        case("add", vec![u(&[3, 4]), u(&[3, 4])], |x| x[0].add(&x[1])),
        case("sub", vec![u(&[3, 4]), u(&[3, 4])], |x| x[0].sub(&x[1])),
        case("mul", vec![u(&[3, 4]), u(&[3, 4])], |x| x[0].mul(&x[1])),
        case("scale", vec![u(&[5])], |x| Ok(x[0].scale(-1.7).add_scalar(0.3))),
        case("powf", vec![positive], |x| Ok(x[0].powf(-0.5))),
        case("gelu", vec![u(&[3, 4]).map(|v| 3.0 * v)], |x| Ok(x[0].gelu())),
        case("sum", vec![u(&[2, 3])], |x| x[0].sum().reshape(&[1])),
        case("mean", vec![u(&[2, 3])], |x| x[0].mean().reshape(&[1])),
        case("sum_axis", vec![u(&[2, 3, 4])], |x| x[0].sum_axis(1)),
        case("mean_axis", vec![u(&[2, 3, 4])], |x| x[0].mean_axis(2)),
        case("matmul", vec![u(&[3, 4]), u(&[4, 2])], |x| x[0].matmul(&x[1])),
        case("transpose", vec![u(&[3, 4])], |x| x[0].transpose()),
        case("reshape", vec![u(&[3, 4])], |x| x[0].reshape(&[2, 6])),
        case("permute_axes", vec![u(&[2, 3, 4])], |x| x[0].permute_axes(&[2, 0, 1])),
        case("gather", vec![u(&[6])], |x| x[0].gather(Rc::from(vec![5, 0, 0, 3, 2, 5, 1]), &[7])),
        case("slice", vec![u(&[3, 5])], |x| x[0].slice(1, 1, 4)),
        case("concat", vec![u(&[2, 3]), u(&[2, 2])], |x| Tensor::concat(&[x[0].clone(), x[1].clone()], 1)),
        case("broadcast_last", vec![u(&[3, 1])], |x| x[0].broadcast_last(4)),
        case("softmax_last", vec![u(&[3, 5])], |x| x[0].softmax_last()),
        case("log_softmax_last", vec![u(&[3, 5])], |x| x[0].log_softmax_last()),
        case("mean_var_last", vec![u(&[3, 5])], |x| {
            let (m, v) = x[0].mean_var_last()?;
            Tensor::concat(&[m, v], 0)
        }),
        case("conv2d_patchify", vec![u(&[4, 4, 2]), u(&[2, 2, 2, 3])], |x| x[0].conv2d(&x[1], 2)),
        case("conv2d_stride1", vec![u(&[4, 5, 2]), u(&[3, 2, 2, 2])], |x| x[0].conv2d(&x[1], 1)),
        case("rot90_spatial", vec![u(&[3, 3, 2])], |x| x[0].rot90_spatial(3)),
        case("flip_spatial", vec![u(&[3, 3, 2])], |x| x[0].flip_spatial(1)),
        case("cross_entropy", vec![u(&[3, 4])], |x| x[0].cross_entropy(&[0, 3, 1])?.reshape(&[1])),
        case("mse", vec![u(&[3, 4])], {
            let target = u(&[3, 4]);
            move |x| x[0].mse(&target)?.reshape(&[1])
        }),
        case("eq_linear", vec![u(&[5, 8]), u(&[2, 3]), u(&[2, 3]), u(&[2, 3]), u(&[2, 3]), u(&[3])], move |x| {
            eq_linear(&x[0], &x[1..5], Some(&x[5]), &c4)
        }),
        case("eq_layernorm", vec![u(&[4, 24]), u(&[3]), u(&[3])], move |x| {
            eq_layernorm(&x[0], &x[1], &x[2], &d4, LAYER_NORM_EPS)
        }),
        case("eq_patch_embed", vec![u(&[4, 4, 1]), u(&[2, 2, 1, 2])], move |x| {
            Ok(eq_patch_embed(&x[0], &x[1], 2, &d4)?.data().clone())
        }),
        case("apply_ape", vec![u(&[16, 8]), u(&[4, 2])], move |x| {
            apply_ape(&x[0], &x[1], &CanonicalMaps::new(4, c4)?, &c4)
        }),
        case("eq_downsample", vec![u(&[4, 4, 2, 8])], move |x| {
            Ok(eq_downsample(&LiftedFeature::spatial(x[0].clone(), d4)?, 2)?.data().clone())
        }),
        case("eq_pixel_shuffle", vec![u(&[2, 2, 4, 4])], move |x| {
            Ok(eq_pixel_shuffle(&LiftedFeature::spatial(x[0].clone(), c4)?, 2)?.data().clone())
        }),
    ];

    // windowed, shifted attention with a relative table and per-slot masks
    let (side, window, shift, heads, c) = (6, 3, 1, 2, 2);
    let plan = WindowPlan::new(&c4, side, window, shift, &EqRpeMaps::new(&c4, window)?)?;
    let rows = (2 * window - 1) * (2 * window - 1);
    let n = side * side;
    cases.push(Case {
        name: "eq_attention_windowed",
        composed: true,
        f: Box::new(move |x| {
            let bias = plan.bias(Some(&x[3]), heads)?;
            eq_attention(&x[0], &x[1], &x[2], &c4, heads, Some(&bias))
        }),
        inputs: vec![u(&[n, c * 4]), u(&[n, c * 4]), u(&[n, c * 4]), u(&[rows, heads])],
    });
    cases.push(Case {
        name: "eq_attention_global",
        composed: true,
        f: Box::new(move |x| eq_attention(&x[0], &x[1], &x[2], &d4, 1, None)),
        inputs: vec![u(&[5, 16]), u(&[5, 16]), u(&[5, 16])],
    });
    Ok(cases)
}

/// Names of every registered check.
pub fn grad_check_names() -> Vec<&'static str> {
    registry(&mut Init::new(0)).map(|r| r.iter().map(|c| c.name).collect()).unwrap_or_default()
}

/// Runs every registered gradient check at f64.
pub fn grad_audit(seed: u64) -> Result<Vec<GradResult>> {
    let mut init = Init::new(seed);
    registry(&mut init)?.into_iter().map(|c| grad_check(c.name, c.composed, &c.f, &c.inputs, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(2.0, 1.0), 0.5);
        assert!((relative_error(1e-6, 0.0) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn linear_function_has_tiny_error() {
        let f: GradFn = Box::new(|x| Ok(x[0].scale(3.0)));
        let r = grad_check("scale", false, &f, &[NdArray::from_f64(vec![3], &[1.0, -2.0, 0.5]).unwrap()], 0).unwrap();
        assert!(r.max_rel_err < 1e-8);
        assert_eq!(r.probes, 3);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        // detach blocks the gradient, so the analytic value is zero
        let f: GradFn = Box::new(|x| x[0].detach().mul(&x[0]));
        let r = grad_check("bad", false, &f, &[NdArray::from_f64(vec![2], &[1.0, 2.0]).unwrap()], 0).unwrap();
        assert!(!r.passes());
    }
}
