use std::rc::Rc;

use crate::error::{domain, shape_err, Result};
use crate::group::GroupSpec;
use crate::nn::{Ctx, Init, Module, Param};
use crate::tensor::{NdArray, Scalar, Tensor};

use super::posenc::{displacement_index, EqRpe};
use super::EqLinear;

/// Additive attention bias for one head: either one `[N, N]` matrix used by
/// every group slot, or one matrix per slot.
pub type HeadBias<T> = Vec<Tensor<T>>;

/// Multi-head attention over `[N, c·|S|]` queries, keys and values.
///
/// Heads take whole channel blocks (all `|S|` slots of each channel), so the
/// logits of a head are invariant when the group slots are permuted. Each
/// entry of `bias` belongs to one head; a per-slot bias gives every slot its
/// own softmax.
pub fn eq_attention<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    spec: &GroupSpec,
    heads: usize,
    bias: Option<&[HeadBias<T>]>,
) -> Result<Tensor<T>> {
    let t = spec.order();
    let s = q.shape().to_vec();
    if s.len() != 2 || k.shape() != s.as_slice() || v.shape() != s.as_slice() || !s[1].is_multiple_of(t) {
        return Err(shape_err("eq_attention", &s, k.shape()));
    }
    let (n, c) = (s[0], s[1] / t);
    if heads == 0 || c % heads != 0 {
        return Err(domain(format!("{c} channels do not split into {heads} heads")));
    }
    if let Some(b) = bias {
        if b.len() != heads {
            return Err(domain(format!("bias for {} heads, model has {heads}", b.len())));
        }
    }
    let cw = c / heads;
    let width = cw * t;
    let scale = T::lit(1.0 / (width as f64).sqrt());
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (lo, hi) = (h * width, (h + 1) * width);
        let qh = q.slice(1, lo, hi)?;
        let kh = k.slice(1, lo, hi)?;
        let vh = v.slice(1, lo, hi)?;
        let logits = qh.matmul(&kh.transpose()?)?.scale(scale);
        let head_bias = bias.map(|b| &b[h]);
        let out = match head_bias {
            None => logits.softmax_last()?.matmul(&vh)?,
            Some(b) if b.len() == 1 => logits.add(&b[0])?.softmax_last()?.matmul(&vh)?,
            Some(b) if b.len() == t => {
                // [N, cw, t] -> [t·N, cw] so each slot is a contiguous row block
                let by_slot = vh.reshape(&[n, cw, t])?.permute_axes(&[2, 0, 1])?.reshape(&[t * n, cw])?;
                let mut slots = Vec::with_capacity(t);
                for (slot, bs) in b.iter().enumerate() {
                    let a = logits.add(bs)?.softmax_last()?;
                    slots.push(a.matmul(&by_slot.slice(0, slot * n, (slot + 1) * n)?)?);
                }
                Tensor::concat(&slots, 0)?.reshape(&[t, n, cw])?.permute_axes(&[1, 2, 0])?.reshape(&[n, width])?
            }
            Some(b) => return Err(domain(format!("head bias needs 1 or {t} matrices, got {}", b.len()))),
        };
        outs.push(out);
    }
    if outs.len() == 1 {
        Ok(outs.pop().unwrap())
    } else {
        Tensor::concat(&outs, 1)
    }
}

/// Window layout of a square token grid for (shifted) local attention.
///
/// Each group slot partitions the grid in its own frame: slot `h` places
/// token `p` at `h⁻¹·p` before cutting windows of side `M` offset by the
/// shift. Tokens in different windows cannot attend to each other. Inside a
/// window the relative bias is looked up from the canonical displacement of
/// the two window-local coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlan {
    grid_side: usize,
    window: usize,
    shift: usize,
    /// per slot, `N·N` entries into a table of `(2M-1)²` rows plus one
    /// masked sentinel row
    slots: Vec<Vec<usize>>,
}

impl WindowPlan {
    /// Builds the plan. A shift is ignored when a single window covers the
    /// grid.
    pub fn new(spec: &GroupSpec, grid_side: usize, window: usize, shift: usize, rpe: &EqRpeMaps) -> Result<Self> {
        if window == 0 || !grid_side.is_multiple_of(window) {
            return Err(domain(format!("grid side {grid_side} is not divisible by window {window}")));
        }
        if shift >= window {
            return Err(domain(format!("shift {shift} must be smaller than window {window}")));
        }
        if rpe.window != window {
            return Err(domain("relative table window does not match the plan"));
        }
        let shift = if grid_side <= window { 0 } else { shift };
        let n = grid_side;
        let m = window;
        let masked = (2 * m - 1) * (2 * m - 1);
        let band = |x: usize| (x + m - shift) / m;
        let local = |x: usize| (x + m - shift) % m;
        let mut slots: Vec<Vec<usize>> = Vec::with_capacity(spec.order());
        for h in spec.elements() {
            let hinv = spec.inverse(h);
            let frame: Vec<(usize, usize)> = (0..n * n).map(|p| spec.act_unchecked(hinv, (p / n, p % n), n)).collect();
            let mut index = Vec::with_capacity(n * n * n * n);
            for &(ai, aj) in &frame {
                for &(bi, bj) in &frame {
                    if band(ai) != band(bi) || band(aj) != band(bj) {
                        index.push(masked);
                    } else {
                        let d = rpe.maps.canonical_displacement((local(ai), local(aj)), (local(bi), local(bj)));
                        index.push(displacement_index(d, m));
                    }
                }
            }
            slots.push(index);
        }
        Ok(WindowPlan { grid_side, window, shift, slots })
    }

    pub fn grid_side(&self) -> usize {
        self.grid_side
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Shift actually applied.
    pub fn shift(&self) -> usize {
        self.shift
    }

    /// Whether every slot sees the same windows and offsets.
    pub fn is_shared(&self) -> bool {
        self.slots.iter().all(|s| s == &self.slots[0])
    }

    /// Whether any pair of tokens is kept apart.
    pub fn has_mask(&self) -> bool {
        let masked = self.masked_row();
        self.slots.iter().any(|s| s.contains(&masked))
    }

    fn masked_row(&self) -> usize {
        (2 * self.window - 1) * (2 * self.window - 1)
    }

    /// Whether tokens `a` and `b` share a window in slot `slot`.
    pub fn connected(&self, slot: usize, a: usize, b: usize) -> bool {
        let cells = self.grid_side * self.grid_side;
        self.slots[slot][a * cells + b] != self.masked_row()
    }

    fn slot_indices(&self) -> Vec<Rc<[usize]>> {
        if self.is_shared() {
            vec![Rc::from(self.slots[0].as_slice())]
        } else {
            self.slots.iter().map(|s| Rc::from(s.as_slice())).collect()
        }
    }

    /// Per-head bias matrices, with the relative table when given.
    pub fn bias<T: Scalar>(&self, table: Option<&Tensor<T>>, heads: usize) -> Result<Vec<HeadBias<T>>> {
        let cells = self.grid_side * self.grid_side;
        let rows = self.masked_row();
        let slots = self.slot_indices();
        match table {
            None => {
                let per_slot: HeadBias<T> = slots
                    .iter()
                    .map(|idx| {
                        Tensor::constant(NdArray::from_fn(vec![cells, cells], |i| {
                            if idx[i] == rows {
                                T::neg_infinity()
                            } else {
                                T::zero()
                            }
                        }))
                    })
                    .collect();
                Ok(vec![per_slot; heads])
            }
            Some(table) => {
                if table.shape() != [rows, heads] {
                    return Err(shape_err("window bias table", table.shape(), &[rows, heads]));
                }
                let sentinel = Tensor::constant(NdArray::full(vec![1], T::neg_infinity()));
                let mut out = Vec::with_capacity(heads);
                for h in 0..heads {
                    let column = table.slice(1, h, h + 1)?.reshape(&[rows])?;
                    let ext = Tensor::concat(&[column, sentinel.clone()], 0)?;
                    let per_slot = slots
                        .iter()
                        .map(|idx| ext.gather(Rc::clone(idx), &[cells, cells]))
                        .collect::<Result<Vec<_>>>()?;
                    out.push(per_slot);
                }
                Ok(out)
            }
        }
    }
}

/// The pair tables a [`WindowPlan`] needs, detached from any parameters.
#[derive(Debug, Clone)]
pub struct EqRpeMaps {
    window: usize,
    maps: crate::group::CanonicalMaps,
}

impl EqRpeMaps {
    pub fn of<T: Scalar>(rpe: &EqRpe<T>) -> Self {
        EqRpeMaps { window: rpe.window(), maps: rpe.maps().clone() }
    }

    pub fn new(spec: &GroupSpec, window: usize) -> Result<Self> {
        let maps =
            crate::group::CanonicalMaps::with_pairs(window, GroupSpec::trivial(), super::posenc::rpe_pair_group(spec))?;
        Ok(EqRpeMaps { window, maps })
    }
}

/// Query, key and value projections followed by [`eq_attention`].
#[derive(Debug, Clone)]
pub struct EqSelfAttention<T: Scalar> {
    pub wq: EqLinear<T>,
    pub wk: EqLinear<T>,
    pub wv: EqLinear<T>,
    pub heads: usize,
}

impl<T: Scalar> EqSelfAttention<T> {
    pub fn new(name: &str, spec: GroupSpec, channels: usize, heads: usize, init: &mut Init) -> Result<Self> {
        if heads == 0 || !channels.is_multiple_of(heads) {
            return Err(domain(format!("{channels} channels do not split into {heads} heads")));
        }
        Ok(EqSelfAttention {
            wq: EqLinear::new(&format!("{name}.wq"), spec, channels, channels, false, init),
            wk: EqLinear::new(&format!("{name}.wk"), spec, channels, channels, false, init),
            wv: EqLinear::new(&format!("{name}.wv"), spec, channels, channels, false, init),
            heads,
        })
    }

    pub fn forward_flat(&self, ctx: &Ctx<T>, z: &Tensor<T>, bias: Option<&[HeadBias<T>]>) -> Result<Tensor<T>> {
        let q = self.wq.forward_flat(ctx, z)?;
        let k = self.wk.forward_flat(ctx, z)?;
        let v = self.wv.forward_flat(ctx, z)?;
        eq_attention(&q, &k, &v, &self.wq.spec(), self.heads, bias)
    }
}

impl<T: Scalar> Module<T> for EqSelfAttention<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.wq.visit_params(f);
        self.wk.visit_params(f);
        self.wv.visit_params(f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.wq.visit_params_mut(f);
        self.wk.visit_params_mut(f);
        self.wv.visit_params_mut(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{lifted_transform, LiftedFeature};

    fn check_equivariant(spec: GroupSpec, side: usize, window: Option<(usize, usize)>, seed: u64) {
        let (c, heads) = (4, 2);
        let mut init = Init::new(seed);
        let attn = EqSelfAttention::<f64>::new("a", spec, c, heads, &mut init).unwrap();
        let z = LiftedFeature::tokens(Tensor::constant(init.uniform(&[side * side, c, spec.order()], -1.0, 1.0)), spec)
            .unwrap();
        let ctx = Ctx::inference();
        let bias = window.map(|(m, shift)| {
            let mut rpe = EqRpe::<f64>::new("r", spec, m, heads).unwrap();
            rpe.table.value = init.uniform(rpe.table.value.shape(), -1.0, 1.0);
            let plan = WindowPlan::new(&spec, side, m, shift, &EqRpeMaps::of(&rpe)).unwrap();
            plan.bias(Some(&ctx.bind(&rpe.table)), heads).unwrap()
        });
        let run = |f: &LiftedFeature<f64>| {
            let out = attn.forward_flat(&ctx, &f.flat().unwrap(), bias.as_deref()).unwrap();
            LiftedFeature::from_flat(&out, spec).unwrap()
        };
        let base = run(&z);
        for g in spec.elements() {
            let lhs = run(&lifted_transform(g, &z).unwrap());
            let rhs = lifted_transform(g, &base).unwrap();
            let err = lhs.value().max_abs_diff(rhs.value()).unwrap();
            assert!(err < 1e-12, "{} {g} {window:?}: {err}", spec.name());
        }
    }

    #[test]
    fn global_attention_is_equivariant() {
        check_equivariant(GroupSpec::c4(), 3, None, 20);
        check_equivariant(GroupSpec::d4(), 4, None, 21);
    }

    #[test]
    fn windowed_attention_is_equivariant() {
        check_equivariant(GroupSpec::c4(), 4, Some((2, 0)), 22);
        check_equivariant(GroupSpec::d4(), 4, Some((2, 0)), 23);
    }

    #[test]
    fn shifted_windows_are_equivariant() {
        check_equivariant(GroupSpec::c4(), 4, Some((2, 1)), 24);
        check_equivariant(GroupSpec::c4(), 6, Some((3, 2)), 27);
        check_equivariant(GroupSpec::d4(), 6, Some((3, 1)), 25);
    }

    #[test]
    fn unshifted_plan_is_shared_and_shifted_is_not() {
        let spec = GroupSpec::c4();
        let maps = EqRpeMaps::new(&spec, 2).unwrap();
        assert!(WindowPlan::new(&spec, 4, 2, 0, &maps).unwrap().is_shared());
        // bands {0}, {1, 2}, {3} are symmetric, so every slot agrees
        assert!(WindowPlan::new(&spec, 4, 2, 1, &maps).unwrap().is_shared());
        let maps3 = EqRpeMaps::new(&spec, 3).unwrap();
        assert!(!WindowPlan::new(&spec, 6, 3, 1, &maps3).unwrap().is_shared());
        let single = WindowPlan::new(&spec, 2, 2, 1, &maps).unwrap();
        assert_eq!(single.shift(), 0);
    }

    #[test]
    fn identity_slot_uses_rolled_windows() {
        // 4x4 grid, window 2, shift 1: rows {0}, {1,2}, {3} form bands
        let spec = GroupSpec::trivial();
        let plan = WindowPlan::new(&spec, 4, 2, 1, &EqRpeMaps::new(&spec, 2).unwrap()).unwrap();
        let at = |i: usize, j: usize| i * 4 + j;
        assert!(plan.connected(0, at(1, 1), at(2, 2)));
        assert!(!plan.connected(0, at(0, 0), at(1, 1)));
        assert!(!plan.connected(0, at(0, 0), at(3, 3)));
        assert!(plan.connected(0, at(3, 3), at(3, 3)));
    }

    #[test]
    fn single_head_matches_direct_formula() {
        let spec = GroupSpec::trivial();
        let mut init = Init::new(26);
        let q: NdArray<f64> = init.uniform(&[3, 2], -1.0, 1.0);
        let k: NdArray<f64> = init.uniform(&[3, 2], -1.0, 1.0);
        let v: NdArray<f64> = init.uniform(&[3, 2], -1.0, 1.0);
        let [qt, kt, vt] = [&q, &k, &v].map(|a| Tensor::constant(a.clone()));
        let out = eq_attention(&qt, &kt, &vt, &spec, 1, None).unwrap();
        for i in 0..3 {
            let logits: Vec<f64> = (0..3)
                .map(|j| (q.get(&[i, 0]) * k.get(&[j, 0]) + q.get(&[i, 1]) * k.get(&[j, 1])) / 2f64.sqrt())
                .collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            for col in 0..2 {
                let want: f64 = (0..3).map(|j| logits[j].exp() / z * v.get(&[j, col])).sum();
                assert!((out.value().get(&[i, col]) - want).abs() < 1e-12);
            }
        }
    }
}
