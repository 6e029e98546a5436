//! Parameters, per-forward graph binding, initialisation and the optimizer.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{NdArray, Scalar, Tensor};

/// A named learnable array. Names are hierarchical (`block0.attn.wq.g3`).
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T: Scalar> {
    pub name: String,
    pub value: NdArray<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, value: NdArray<T>) -> Self {
        Param { name: name.into(), value }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Anything owning parameters.
pub trait Module<T: Scalar> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.len());
        n
    }

    fn named_params(&self) -> Vec<(String, NdArray<T>)> {
        let mut out = Vec::new();
        self.visit_params(&mut |p| out.push((p.name.clone(), p.value.clone())));
        out
    }

    /// Overwrites parameters from `(name, value)` records. Every parameter
    /// must be present with a matching shape.
    fn load_named(&mut self, records: &[(String, NdArray<T>)]) -> Result<()> {
        let map: HashMap<&str, &NdArray<T>> = records.iter().map(|(n, v)| (n.as_str(), v)).collect();
        let mut err = None;
        self.visit_params_mut(&mut |p| {
            if err.is_some() {
                return;
            }
            match map.get(p.name.as_str()) {
                Some(v) if v.shape() == p.value.shape() => p.value = (*v).clone(),
                Some(v) => {
                    err = Some(Error::Checkpoint(format!(
                        "{}: shape {:?} in file, {:?} in model",
                        p.name,
                        v.shape(),
                        p.value.shape()
                    )))
                }
                None => err = Some(Error::Checkpoint(format!("missing parameter {}", p.name))),
            }
        });
        err.map_or(Ok(()), Err)
    }
}

/// Binds parameters to graph leaves for one forward pass.
///
/// Each parameter becomes a single leaf no matter how often it is used, so
/// gradients from every use land in one place.
pub struct Ctx<T: Scalar> {
    track: bool,
    leaves: RefCell<HashMap<String, Tensor<T>>>,
}

impl<T: Scalar> Ctx<T> {
    /// `track` controls whether parameter leaves require gradients.
    pub fn new(track: bool) -> Self {
        Ctx { track, leaves: RefCell::new(HashMap::new()) }
    }

    pub fn inference() -> Self {
        Self::new(false)
    }

    pub fn training() -> Self {
        Self::new(true)
    }

    pub fn tracks(&self) -> bool {
        self.track
    }

    pub fn bind(&self, p: &Param<T>) -> Tensor<T> {
        self.leaves
            .borrow_mut()
            .entry(p.name.clone())
            .or_insert_with(|| Tensor::leaf(p.value.clone(), self.track))
            .clone()
    }

    /// Gradients of every bound parameter after `backward`.
    pub fn grads(&self) -> HashMap<String, NdArray<T>> {
        self.leaves.borrow().iter().map(|(n, t)| (n.clone(), t.grad())).collect()
    }
}

/// Deterministic parameter initialiser.
pub struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Init { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn normal<T: Scalar>(&mut self, shape: &[usize], std: f64) -> NdArray<T> {
        let dist = Normal::new(0.0, std).expect("finite std");
        NdArray::from_fn(shape.to_vec(), |_| T::lit(dist.sample(&mut self.rng)))
    }

    pub fn uniform<T: Scalar>(&mut self, shape: &[usize], lo: f64, hi: f64) -> NdArray<T> {
        NdArray::from_fn(shape.to_vec(), |_| T::lit(self.rng.random_range(lo..hi)))
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Stochastic gradient descent with heavy-ball momentum and a constant
/// learning rate.
#[derive(Debug, Clone)]
pub struct Sgd<T: Scalar> {
    pub lr: f64,
    pub momentum: f64,
    velocity: HashMap<String, NdArray<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Sgd { lr, momentum, velocity: HashMap::new() }
    }

    /// Applies one update. Parameters without a gradient entry are untouched.
    pub fn step(&mut self, model: &mut dyn Module<T>, grads: &HashMap<String, NdArray<T>>) {
        let (lr, mu) = (T::lit(self.lr), T::lit(self.momentum));
        let velocity = &mut self.velocity;
        model.visit_params_mut(&mut |p| {
            let Some(g) = grads.get(&p.name) else { return };
            let v = velocity.entry(p.name.clone()).or_insert_with(|| NdArray::zeros(p.value.shape().to_vec()));
            for ((vi, &gi), pi) in v.data_mut().iter_mut().zip(g.data()).zip(p.value.data_mut()) {
                *vi = mu * *vi + gi;
                *pi = *pi - lr * *vi;
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        w: Param<f64>,
    }

    impl Module<f64> for Quadratic {
        fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<f64>)) {
            f(&self.w)
        }
        fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<f64>)) {
            f(&mut self.w)
        }
    }

    #[test]
    fn sgd_descends_a_quadratic() {
        let mut m = Quadratic { w: Param::new("w", NdArray::from_f64(vec![2], &[3.0, -1.0]).unwrap()) };
        let mut opt = Sgd::new(0.1, 0.5);
        for _ in 0..200 {
            let ctx = Ctx::training();
            let w = ctx.bind(&m.w);
            w.mul(&w).unwrap().sum().backward().unwrap();
            opt.step(&mut m, &ctx.grads());
        }
        assert!(m.w.value.max_abs() < 1e-8);
    }

    #[test]
    fn bind_shares_one_leaf() {
        let p = Param::new("p", NdArray::<f64>::from_f64(vec![1], &[2.0]).unwrap());
        let ctx = Ctx::training();
        let a = ctx.bind(&p);
        let b = ctx.bind(&p);
        a.mul(&b).unwrap().sum().backward().unwrap();
        assert_eq!(ctx.grads()["p"].data(), &[4.0]);
    }

    #[test]
    fn load_checks_names_and_shapes() {
        let mut m = Quadratic { w: Param::new("w", NdArray::zeros(vec![2])) };
        assert!(m.load_named(&[("v".into(), NdArray::zeros(vec![2]))]).is_err());
        assert!(m.load_named(&[("w".into(), NdArray::zeros(vec![3]))]).is_err());
        m.load_named(&[("w".into(), NdArray::full(vec![2], 1.5))]).unwrap();
        assert_eq!(m.w.value.data(), &[1.5, 1.5]);
    }

    #[test]
    fn init_is_deterministic() {
        let a: NdArray<f64> = Init::new(7).normal(&[5], 1.0);
        let b: NdArray<f64> = Init::new(7).normal(&[5], 1.0);
        assert_eq!(a, b);
    }
}
