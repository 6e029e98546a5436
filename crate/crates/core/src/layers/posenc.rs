//! Absolute and relative position encodings tied along group orbits.
//!
//! The absolute table has one row per orbit of grid positions, so positions
//! that the group maps onto each other share an embedding. The relative
//! table has one column per head, indexed by the canonical displacement of a
//! token pair under the dihedral group, so the bias between two tokens does
//! not change when both are rotated or mirrored together.

use std::rc::Rc;

use crate::error::{domain, shape_err, Result};
use crate::group::{CanonicalMaps, GroupSpec};
use crate::nn::{Ctx, Module, Param};
use crate::tensor::{NdArray, Scalar, Tensor};

/// `out.flat[(p·c + ch)·|S| + h] = table[orbit(p)][ch]`.
pub fn ape_index(maps: &CanonicalMaps, channels: usize, order: usize) -> Vec<usize> {
    let mut index = Vec::with_capacity(maps.orbit_ids().len() * channels * order);
    for &orbit in maps.orbit_ids() {
        for ch in 0..channels {
            index.extend(std::iter::repeat_n(orbit * channels + ch, order));
        }
    }
    index
}

/// Adds the orbit-tied table to `[N, c·|S|]` features.
pub fn apply_ape<T: Scalar>(
    z: &Tensor<T>,
    table: &Tensor<T>,
    maps: &CanonicalMaps,
    spec: &GroupSpec,
) -> Result<Tensor<T>> {
    let t = spec.order();
    let ts = table.shape();
    let n = maps.orbit_ids().len();
    if ts.len() != 2 || ts[0] != maps.orbit_count() || z.shape() != [n, ts[1] * t] {
        return Err(shape_err("apply_ape", z.shape(), ts));
    }
    let index = ape_index(maps, ts[1], t);
    z.add(&table.gather(Rc::from(index), &[n, ts[1] * t])?)
}

/// Learnable orbit-canonical absolute position table `[orbits, c]`.
#[derive(Debug, Clone)]
pub struct EqApe<T: Scalar> {
    pub table: Param<T>,
    maps: CanonicalMaps,
}

impl<T: Scalar> EqApe<T> {
    /// Zero-initialised table over the orbits of an `n×n` grid.
    pub fn new(name: &str, spec: GroupSpec, grid_side: usize, channels: usize) -> Result<Self> {
        let maps = CanonicalMaps::new(grid_side, spec)?;
        let table = Param::new(format!("{name}.table"), NdArray::zeros(vec![maps.orbit_count(), channels]));
        Ok(EqApe { table, maps })
    }

    pub fn maps(&self) -> &CanonicalMaps {
        &self.maps
    }

    pub fn forward_flat(&self, ctx: &Ctx<T>, z: &Tensor<T>) -> Result<Tensor<T>> {
        let spec = *self.maps.group();
        apply_ape(z, &ctx.bind(&self.table), &self.maps, &spec)
    }
}

impl<T: Scalar> Module<T> for EqApe<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.table)
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.table)
    }
}

/// Group used to canonicalise relative pairs: the full dihedral group once
/// the model has any symmetry, nothing for the plain model.
pub fn rpe_pair_group(spec: &GroupSpec) -> GroupSpec {
    if spec.order() > 1 {
        GroupSpec::d4()
    } else {
        GroupSpec::trivial()
    }
}

/// Row of displacement `(di, dj)` in a table for an `m×m` window.
pub fn displacement_index(d: (isize, isize), window: usize) -> usize {
    let m = window as isize;
    debug_assert!(d.0.abs() < m && d.1.abs() < m);
    ((d.0 + m - 1) * (2 * m - 1) + (d.1 + m - 1)) as usize
}

/// Learnable relative position table `[(2M-1)², heads]`.
#[derive(Debug, Clone)]
pub struct EqRpe<T: Scalar> {
    pub table: Param<T>,
    maps: CanonicalMaps,
}

impl<T: Scalar> EqRpe<T> {
    pub fn new(name: &str, spec: GroupSpec, window: usize, heads: usize) -> Result<Self> {
        if window == 0 || heads == 0 {
            return Err(domain("window and head count must be positive"));
        }
        let maps = CanonicalMaps::with_pairs(window, GroupSpec::trivial(), rpe_pair_group(&spec))?;
        let rows = (2 * window - 1) * (2 * window - 1);
        Ok(EqRpe { table: Param::new(format!("{name}.table"), NdArray::zeros(vec![rows, heads])), maps })
    }

    pub fn window(&self) -> usize {
        self.maps.grid_side()
    }

    pub fn heads(&self) -> usize {
        self.table.value.shape()[1]
    }

    /// Pair tables on the `M×M` window.
    pub fn maps(&self) -> &CanonicalMaps {
        &self.maps
    }

    /// `b[a][b]` for one head on a single window, row-major positions.
    pub fn window_bias(&self, head: usize) -> NdArray<T> {
        let m = self.window();
        let heads = self.heads();
        let cells = m * m;
        NdArray::from_fn(vec![cells, cells], |i| {
            let (a, b) = (i / cells, i % cells);
            let d = self.maps.canonical_displacement((a / m, a % m), (b / m, b % m));
            self.table.value.data()[displacement_index(d, m) * heads + head]
        })
    }
}

impl<T: Scalar> Module<T> for EqRpe<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.table)
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::canonical_pair;
    use crate::layers::{lifted_transform, LiftedFeature};
    use crate::nn::Init;

    #[test]
    fn ape_shares_rows_within_orbits() {
        let spec = GroupSpec::c4();
        let mut ape = EqApe::<f64>::new("ape", spec, 4, 2).unwrap();
        assert_eq!(ape.table.value.shape(), &[4, 2]);
        ape.table.value = Init::new(12).uniform(&[4, 2], -1.0, 1.0);
        let z = Tensor::constant(NdArray::zeros(vec![16, 8]));
        let out = ape.forward_flat(&Ctx::inference(), &z).unwrap();
        // (0,0) and (3,3) are in one orbit
        for col in 0..8 {
            assert_eq!(out.value().get(&[0, col]), out.value().get(&[15, col]));
            assert_eq!(out.value().get(&[0, col]), ape.table.value.get(&[0, col / 4]));
        }
    }

    #[test]
    fn ape_commutes_with_lifted_action() {
        let spec = GroupSpec::d4();
        let mut init = Init::new(13);
        let mut ape = EqApe::<f64>::new("ape", spec, 5, 2).unwrap();
        ape.table.value = init.uniform(ape.table.value.shape(), -1.0, 1.0);
        let z = LiftedFeature::tokens(Tensor::constant(init.uniform(&[25, 2, 8], -1.0, 1.0)), spec).unwrap();
        let ctx = Ctx::inference();
        let add = |f: &LiftedFeature<f64>| {
            LiftedFeature::from_flat(&ape.forward_flat(&ctx, &f.flat().unwrap()).unwrap(), spec).unwrap()
        };
        let base = add(&z);
        for g in spec.elements() {
            let lhs = add(&lifted_transform(g, &z).unwrap());
            let rhs = lifted_transform(g, &base).unwrap();
            assert_eq!(lhs.value(), rhs.value());
        }
    }

    #[test]
    fn displacement_index_covers_table() {
        let m = 3;
        let mut seen = vec![false; 25];
        for di in -2..=2 {
            for dj in -2..=2 {
                seen[displacement_index((di, dj), m)] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
        assert_eq!(displacement_index((0, 0), m), 12);
    }

    #[test]
    fn window_bias_is_pair_invariant() {
        let spec = GroupSpec::c4();
        let mut rpe = EqRpe::<f64>::new("rpe", spec, 3, 2).unwrap();
        rpe.table.value = Init::new(14).uniform(rpe.table.value.shape(), -1.0, 1.0);
        let d4 = GroupSpec::d4();
        for head in 0..2 {
            let b = rpe.window_bias(head);
            for a in 0..9 {
                for c in 0..9 {
                    let (pa, pc) = ((a / 3, a % 3), (c / 3, c % 3));
                    let (ca, cc) = canonical_pair(&d4, pa, pc, 3).unwrap();
                    assert_eq!(b.get(&[a, c]), b.get(&[ca.0 * 3 + ca.1, cc.0 * 3 + cc.1]));
                }
            }
        }
    }

    #[test]
    fn trivial_pair_group_is_plain_relative() {
        let rpe = EqRpe::<f64>::new("rpe", GroupSpec::trivial(), 2, 1).unwrap();
        assert_eq!(rpe.maps().canonical_displacement((1, 1), (0, 0)), (-1, -1));
    }
}
