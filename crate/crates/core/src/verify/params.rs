use std::collections::BTreeMap;

use num_integer::Integer;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::nn::Module;
use crate::tensor::Scalar;

/// Storage of one equivariant linear layer recovered from its `.g{i}` blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinearShape {
    pub name: String,
    pub c_in: usize,
    pub c_out: usize,
    pub blocks: usize,
}

impl LinearShape {
    /// Weights actually stored.
    pub fn stored(&self) -> usize {
        self.blocks * self.c_in * self.c_out
    }

    /// Weights of the unconstrained `c_in·|S| × c_out·|S|` matrix acting on
    /// the same lifted features.
    pub fn dense(&self) -> usize {
        self.blocks * self.c_in * self.blocks * self.c_out
    }

    /// `dense / stored` as a reduced fraction.
    pub fn sharing_factor(&self) -> (usize, usize) {
        reduce(self.dense(), self.stored())
    }
}

pub fn reduce(num: usize, den: usize) -> (usize, usize) {
    let g = num.gcd(&den).max(1);
    (num / g, den / g)
}

fn split_block(name: &str) -> Option<(&str, usize)> {
    let (stem, tail) = name.rsplit_once(".g")?;
    tail.parse().ok().map(|i| (stem, i))
}

/// Every equivariant linear layer in `model`, in name order.
pub fn linear_shapes<T: Scalar>(model: &dyn Module<T>) -> Result<Vec<LinearShape>> {
    let mut layers: BTreeMap<String, Vec<(usize, Vec<usize>)>> = BTreeMap::new();
    for (name, value) in model.named_params() {
        if let Some((stem, idx)) = split_block(&name) {
            layers.entry(stem.to_string()).or_default().push((idx, value.shape().to_vec()));
        }
    }
    layers
        .into_iter()
        .map(|(name, mut blocks)| {
            blocks.sort();
            let shape = blocks[0].1.clone();
            let contiguous = blocks.iter().enumerate().all(|(i, (idx, _))| *idx == i);
            if shape.len() != 2 || !contiguous || blocks.iter().any(|(_, s)| *s != shape) {
                return Err(domain(format!("{name}: blocks are not a consistent family")));
            }
            Ok(LinearShape { name, c_in: shape[0], c_out: shape[1], blocks: blocks.len() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupSpec;
    use crate::layers::EqLinear;
    use crate::nn::Init;

    #[test]
    fn factor_equals_group_order() {
        for spec in [GroupSpec::trivial(), GroupSpec::c4(), GroupSpec::d4()] {
            let l = EqLinear::<f64>::new("x", spec, 3, 5, true, &mut Init::new(0));
            let shapes = linear_shapes(&l).unwrap();
            assert_eq!(shapes.len(), 1);
            assert_eq!(shapes[0].sharing_factor(), (spec.order(), 1));
            assert_eq!(shapes[0].stored(), spec.order() * 15);
        }
    }

    #[test]
    fn names_split() {
        assert_eq!(split_block("block0.attn.wq.g7"), Some(("block0.attn.wq", 7)));
        assert_eq!(split_block("head.w"), None);
        assert_eq!(reduce(12, 8), (3, 2));
    }
}
