//! Unconstrained reference models written with ordinary dense layers.
//!
//! They share the architecture of the equivariant models at `|S| = 1` but
//! none of their code: attention windows are formed by an actual cyclic roll
//! and window partition, and the shifted-window mask uses the usual region
//! labels. They serve as the comparison baseline in experiments and as the
//! reference the trivial-group models must reproduce.

use std::rc::Rc;

use crate::error::{domain, shape_err, Result};
use crate::nn::{Ctx, Init, Module, Param};
use crate::tensor::{NdArray, Scalar, Tensor};

use super::block::{upsample_nearest, ImageModel};
use super::{EqSwinConfig, EqViTConfig, SwinHead};
use crate::layers::LAYER_NORM_EPS;

#[derive(Debug, Clone)]
pub struct Linear<T: Scalar> {
    pub w: Param<T>,
    pub b: Option<Param<T>>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(name: &str, d_in: usize, d_out: usize, bias: bool, init: &mut Init) -> Self {
        Linear {
            w: Param::new(format!("{name}.w"), init.normal(&[d_in, d_out], (1.0 / d_in as f64).sqrt())),
            b: bias.then(|| Param::new(format!("{name}.bias"), NdArray::zeros(vec![d_out]))),
        }
    }

    pub fn forward(&self, ctx: &Ctx<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = x.matmul(&ctx.bind(&self.w))?;
        match &self.b {
            None => Ok(y),
            Some(b) => {
                let (rows, d) = (y.shape()[0], y.shape()[1]);
                let idx: Rc<[usize]> = (0..rows * d).map(|i| i % d).collect();
                y.add(&ctx.bind(b).gather(idx, &[rows, d])?)
            }
        }
    }
}

impl<T: Scalar> Module<T> for Linear<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.w);
        if let Some(b) = &self.b {
            f(b);
        }
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.w);
        if let Some(b) = &mut self.b {
            f(b);
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm<T: Scalar> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
}

impl<T: Scalar> LayerNorm<T> {
    pub fn new(name: &str, d: usize) -> Self {
        LayerNorm {
            gamma: Param::new(format!("{name}.gamma"), NdArray::full(vec![d], T::one())),
            beta: Param::new(format!("{name}.beta"), NdArray::zeros(vec![d])),
        }
    }

    pub fn forward(&self, ctx: &Ctx<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (rows, d) = (x.shape()[0], x.shape()[1]);
        let (mean, var) = x.mean_var_last()?;
        let y = x
            .sub(&mean.broadcast_last(d)?)?
            .mul(&var.add_scalar(T::lit(LAYER_NORM_EPS)).powf(T::lit(-0.5)).broadcast_last(d)?)?;
        let idx: Rc<[usize]> = (0..rows * d).map(|i| i % d).collect();
        let g = ctx.bind(&self.gamma).gather(Rc::clone(&idx), &[rows, d])?;
        let b = ctx.bind(&self.beta).gather(idx, &[rows, d])?;
        y.mul(&g)?.add(&b)
    }
}

impl<T: Scalar> Module<T> for LayerNorm<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.gamma);
        f(&self.beta);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}

/// Softmax attention of `[n, d]` projections, heads over contiguous columns,
/// with an optional `[n, n]` additive bias per head.
fn mha<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    heads: usize,
    bias: Option<&[Tensor<T>]>,
) -> Result<Tensor<T>> {
    let d = q.shape()[1];
    let dh = d / heads;
    let scale = T::lit(1.0 / (dh as f64).sqrt());
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = q.slice(1, h * dh, (h + 1) * dh)?;
        let kh = k.slice(1, h * dh, (h + 1) * dh)?;
        let vh = v.slice(1, h * dh, (h + 1) * dh)?;
        let mut logits = qh.matmul(&kh.transpose()?)?.scale(scale);
        if let Some(b) = bias {
            logits = logits.add(&b[h])?;
        }
        outs.push(logits.softmax_last()?.matmul(&vh)?);
    }
    Tensor::concat(&outs, 1)
}

/// Cyclic shift plus window partition: row `w·M² + a·M + b` of the result
/// is token `((wi·M + a + δ) mod G, (wj·M + b + δ) mod G)`.
fn roll_partition_index(g: usize, m: usize, shift: usize) -> Vec<usize> {
    let nw = g / m;
    let mut idx = Vec::with_capacity(g * g);
    for wi in 0..nw {
        for wj in 0..nw {
            for a in 0..m {
                for b in 0..m {
                    let i = (wi * m + a + shift) % g;
                    let j = (wj * m + b + shift) % g;
                    idx.push(i * g + j);
                }
            }
        }
    }
    idx
}

fn region(x: usize, g: usize, m: usize, shift: usize) -> usize {
    if shift == 0 || x < g - m {
        0
    } else if x < g - shift {
        1
    } else {
        2
    }
}

#[derive(Debug, Clone)]
struct Windows {
    grid: usize,
    window: usize,
    shift: usize,
}

#[derive(Debug, Clone)]
pub struct PlainBlock<T: Scalar> {
    pub ln1: LayerNorm<T>,
    pub wq: Linear<T>,
    pub wk: Linear<T>,
    pub wv: Linear<T>,
    pub wo: Linear<T>,
    pub ln2: LayerNorm<T>,
    pub fc1: Linear<T>,
    pub fc2: Linear<T>,
    pub rpe: Option<Param<T>>,
    heads: usize,
    windows: Option<Windows>,
}

impl<T: Scalar> PlainBlock<T> {
    fn new(
        name: &str,
        d: usize,
        heads: usize,
        mlp_ratio: usize,
        windows: Option<(usize, usize, usize, bool)>,
        init: &mut Init,
    ) -> Self {
        let wq = Linear::new(&format!("{name}.attn.wq"), d, d, false, init);
        let wk = Linear::new(&format!("{name}.attn.wk"), d, d, false, init);
        let wv = Linear::new(&format!("{name}.attn.wv"), d, d, false, init);
        let wo = Linear::new(&format!("{name}.attn.wo"), d, d, true, init);
        let fc1 = Linear::new(&format!("{name}.mlp.fc1"), d, d * mlp_ratio, true, init);
        let fc2 = Linear::new(&format!("{name}.mlp.fc2"), d * mlp_ratio, d, true, init);
        let (rpe, windows) = match windows {
            None => (None, None),
            Some((grid, window, shift, use_rpe)) => {
                let rows = (2 * window - 1) * (2 * window - 1);
                let rpe = use_rpe.then(|| Param::new(format!("{name}.rpe.table"), NdArray::zeros(vec![rows, heads])));
                let shift = if grid <= window { 0 } else { shift };
                (rpe, Some(Windows { grid, window, shift }))
            }
        };
        PlainBlock {
            ln1: LayerNorm::new(&format!("{name}.ln1"), d),
            wq,
            wk,
            wv,
            wo,
            ln2: LayerNorm::new(&format!("{name}.ln2"), d),
            fc1,
            fc2,
            rpe,
            heads,
            windows,
        }
    }

    fn window_bias(&self, ctx: &Ctx<T>, w: &Windows, wi: usize, wj: usize) -> Result<Option<Vec<Tensor<T>>>> {
        let m = w.window;
        let cells = m * m;
        let masked = w.shift > 0 && (wi + 1 == w.grid / m || wj + 1 == w.grid / m);
        let mask = masked.then(|| {
            let label = |a: usize, b: usize| {
                let (ri, rj) = (wi * m + a, wj * m + b);
                region(ri, w.grid, m, w.shift) * 3 + region(rj, w.grid, m, w.shift)
            };
            NdArray::from_fn(vec![cells, cells], |i| {
                let (p, q) = (i / cells, i % cells);
                if label(p / m, p % m) == label(q / m, q % m) {
                    T::zero()
                } else {
                    T::neg_infinity()
                }
            })
        });
        let table = self.rpe.as_ref().map(|t| ctx.bind(t));
        if mask.is_none() && table.is_none() {
            return Ok(None);
        }
        let mask = mask.map(Tensor::constant);
        let mut out = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let mut b = match &table {
                Some(t) => {
                    let idx: Rc<[usize]> = (0..cells * cells)
                        .map(|i| {
                            let (p, q) = (i / cells, i % cells);
                            let di = (q / m) as isize - (p / m) as isize + m as isize - 1;
                            let dj = (q % m) as isize - (p % m) as isize + m as isize - 1;
                            (di as usize * (2 * m - 1) + dj as usize) * self.heads + h
                        })
                        .collect();
                    t.gather(idx, &[cells, cells])?
                }
                None => Tensor::constant(NdArray::zeros(vec![cells, cells])),
            };
            if let Some(mk) = &mask {
                b = b.add(mk)?;
            }
            out.push(b);
        }
        Ok(Some(out))
    }

    fn attention(&self, ctx: &Ctx<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let q = self.wq.forward(ctx, x)?;
        let k = self.wk.forward(ctx, x)?;
        let v = self.wv.forward(ctx, x)?;
        let Some(w) = &self.windows else {
            return mha(&q, &k, &v, self.heads, None);
        };
        let d = x.shape()[1];
        let (g, m) = (w.grid, w.window);
        let fwd: Rc<[usize]> = roll_partition_index(g, m, w.shift).into();
        let cols = |t: &Tensor<T>| -> Result<Tensor<T>> {
            let idx: Rc<[usize]> = fwd.iter().flat_map(|&r| r * d..(r + 1) * d).collect();
            t.gather(idx, &[g * g, d])
        };
        let (qw, kw, vw) = (cols(&q)?, cols(&k)?, cols(&v)?);
        let nw = g / m;
        let cells = m * m;
        let mut outs = Vec::with_capacity(nw * nw);
        for wi in 0..nw {
            for wj in 0..nw {
                let r = (wi * nw + wj) * cells;
                let bias = self.window_bias(ctx, w, wi, wj)?;
                outs.push(mha(
                    &qw.slice(0, r, r + cells)?,
                    &kw.slice(0, r, r + cells)?,
                    &vw.slice(0, r, r + cells)?,
                    self.heads,
                    bias.as_deref(),
                )?);
            }
        }
        let joined = Tensor::concat(&outs, 0)?;
        let mut inv = vec![0usize; g * g];
        for (row, &tok) in fwd.iter().enumerate() {
            inv[tok] = row;
        }
        let idx: Rc<[usize]> = inv.iter().flat_map(|&r| r * d..(r + 1) * d).collect();
        joined.gather(idx, &[g * g, d])
    }

    pub fn forward(&self, ctx: &Ctx<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = self.attention(ctx, &self.ln1.forward(ctx, x)?)?;
        let x = x.add(&self.wo.forward(ctx, &h)?)?;
        let h = self.fc1.forward(ctx, &self.ln2.forward(ctx, &x)?)?.gelu();
        x.add(&self.fc2.forward(ctx, &h)?)
    }
}

impl<T: Scalar> Module<T> for PlainBlock<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.ln1.visit_params(f);
        for l in [&self.wq, &self.wk, &self.wv, &self.wo] {
            l.visit_params(f);
        }
        self.ln2.visit_params(f);
        self.fc1.visit_params(f);
        self.fc2.visit_params(f);
        if let Some(r) = &self.rpe {
            f(r);
        }
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.ln1.visit_params_mut(f);
        for l in [&mut self.wq, &mut self.wk, &mut self.wv, &mut self.wo] {
            l.visit_params_mut(f);
        }
        self.ln2.visit_params_mut(f);
        self.fc1.visit_params_mut(f);
        self.fc2.visit_params_mut(f);
        if let Some(r) = &mut self.rpe {
            f(r);
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlainHead<T: Scalar> {
    pub ln: LayerNorm<T>,
    pub w: Param<T>,
    pub b: Param<T>,
}

impl<T: Scalar> PlainHead<T> {
    fn new(d: usize, classes: usize, init: &mut Init) -> Self {
        PlainHead {
            ln: LayerNorm::new("head.ln", d),
            w: Param::new("head.w", init.normal(&[d, classes], (1.0 / d as f64).sqrt())),
            b: Param::new("head.b", NdArray::zeros(vec![classes])),
        }
    }

    fn forward(&self, ctx: &Ctx<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let pooled = self.ln.forward(ctx, x)?.mean_axis(0)?;
        let d = pooled.len();
        let k = self.b.len();
        pooled.reshape(&[1, d])?.matmul(&ctx.bind(&self.w))?.reshape(&[k])?.add(&ctx.bind(&self.b))
    }
}

impl<T: Scalar> Module<T> for PlainHead<T> {
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

fn check_trivial(order: usize) -> Result<()> {
    if order != 1 {
        return Err(domain("baseline models take configurations with the trivial group"));
    }
    Ok(())
}

fn embed<T: Scalar>(
    ctx: &Ctx<T>,
    psi: &Param<T>,
    image: &Tensor<T>,
    side: usize,
    c0: usize,
    patch: usize,
) -> Result<Tensor<T>> {
    if image.shape() != [side, side, c0] {
        return Err(shape_err("baseline input", image.shape(), &[side, side, c0]));
    }
    let y = image.conv2d(&ctx.bind(psi), patch)?;
    let s = y.shape().to_vec();
    y.reshape(&[s[0] * s[1], s[2]])
}

/// Plain ViT classifier of width `cfg.channels`.
#[derive(Debug, Clone)]
pub struct PlainViT<T: Scalar> {
    pub cfg: EqViTConfig,
    pub psi: Param<T>,
    pub ape: Option<Param<T>>,
    pub blocks: Vec<PlainBlock<T>>,
    pub head: PlainHead<T>,
}

impl<T: Scalar> PlainViT<T> {
    pub fn new(cfg: &EqViTConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        check_trivial(cfg.group.order())?;
        let mut init = Init::new(seed);
        let d = cfg.channels;
        let (s, c0) = (cfg.patch, cfg.in_channels);
        let psi = Param::new("embed.psi", init.normal(&[s, s, c0, d], (1.0 / (s * s * c0) as f64).sqrt()));
        let n = cfg.grid_side() * cfg.grid_side();
        let ape = cfg.use_ape.then(|| Param::new("ape.table", NdArray::zeros(vec![n, d])));
        let blocks = (0..cfg.depth)
            .map(|i| PlainBlock::new(&format!("block{i}"), d, cfg.heads, cfg.mlp_ratio, None, &mut init))
            .collect();
        let head = PlainHead::new(d, cfg.num_classes, &mut init);
        Ok(PlainViT { cfg: cfg.clone(), psi, ape, blocks, head })
    }
}

impl<T: Scalar> ImageModel<T> for PlainViT<T> {
    fn forward(&self, ctx: &Ctx<T>, image: &Tensor<T>) -> Result<Tensor<T>> {
        let mut x = embed(ctx, &self.psi, image, self.cfg.image_side, self.cfg.in_channels, self.cfg.patch)?;
        if let Some(a) = &self.ape {
            x = x.add(&ctx.bind(a))?;
        }
        for b in &self.blocks {
            x = b.forward(ctx, &x)?;
        }
        self.head.forward(ctx, &x)
    }
}

impl<T: Scalar> Module<T> for PlainViT<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.psi);
        if let Some(a) = &self.ape {
            f(a);
        }
        for b in &self.blocks {
            b.visit_params(f);
        }
        self.head.visit_params(f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.psi);
        if let Some(a) = &mut self.ape {
            f(a);
        }
        for b in &mut self.blocks {
            b.visit_params_mut(f);
        }
        self.head.visit_params_mut(f);
    }
}

#[derive(Debug, Clone)]
pub enum PlainSwinHead<T: Scalar> {
    Classify(PlainHead<T>),
    SuperResolve { expand: Linear<T>, shuffle: usize, scale: usize, residual: bool },
}

/// Plain windowed model matching [`super::EqSwin`] at the trivial group.
#[derive(Debug, Clone)]
pub struct PlainSwin<T: Scalar> {
    pub cfg: EqSwinConfig,
    pub psi: Param<T>,
    pub ape: Option<Param<T>>,
    pub stages: Vec<Vec<PlainBlock<T>>>,
    pub merges: Vec<(LayerNorm<T>, Linear<T>)>,
    pub head: PlainSwinHead<T>,
}

impl<T: Scalar> PlainSwin<T> {
    pub fn new(cfg: &EqSwinConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        check_trivial(cfg.group.order())?;
        let mut init = Init::new(seed);
        let (s, c0, d0) = (cfg.patch, cfg.in_channels, cfg.channels);
        let psi = Param::new("embed.psi", init.normal(&[s, s, c0, d0], (1.0 / (s * s * c0) as f64).sqrt()));
        let sides = cfg.stage_sides();
        let ape = cfg.use_ape.then(|| Param::new("ape.table", NdArray::zeros(vec![sides[0] * sides[0], d0])));
        let mut stages = Vec::new();
        let mut merges = Vec::new();
        for (si, (&side, &depth)) in sides.iter().zip(&cfg.depths).enumerate() {
            let d = cfg.stage_channels(si);
            if si > 0 {
                let prev = cfg.stage_channels(si - 1);
                merges.push((
                    LayerNorm::new(&format!("merge{si}.ln"), prev),
                    Linear::new(&format!("merge{si}.expand"), prev, d, false, &mut init),
                ));
            }
            let m = cfg.stage_window(side);
            stages.push(
                (0..depth)
                    .map(|bi| {
                        let shift = if bi % 2 == 1 { cfg.shift } else { 0 };
                        let w = (side, m, shift, cfg.use_rpe);
                        PlainBlock::new(
                            &format!("stage{si}.block{bi}"),
                            d,
                            cfg.heads[si],
                            cfg.mlp_ratio,
                            Some(w),
                            &mut init,
                        )
                    })
                    .collect(),
            );
        }
        let last = cfg.stage_channels(sides.len() - 1);
        let head = match cfg.head {
            SwinHead::Classify { num_classes } => PlainSwinHead::Classify(PlainHead::new(last, num_classes, &mut init)),
            SwinHead::SuperResolve { scale, residual } => {
                let shuffle = cfg.patch * scale;
                PlainSwinHead::SuperResolve {
                    expand: Linear::new("head.expand", last, shuffle * shuffle * c0, false, &mut init),
                    shuffle,
                    scale,
                    residual,
                }
            }
        };
        Ok(PlainSwin { cfg: cfg.clone(), psi, ape, stages, merges, head })
    }
}

/// `[h·w, r²·c] -> [r·h, r·w, c]` with sub-pixel channel `ch·r² + u·r + v`.
fn depth_to_space<T: Scalar>(x: &Tensor<T>, side: usize, r: usize) -> Result<Tensor<T>> {
    let cin = x.shape()[1];
    let c = cin / (r * r);
    let big = side * r;
    let mut idx = Vec::with_capacity(big * big * c);
    for i in 0..big {
        for j in 0..big {
            for ch in 0..c {
                idx.push(((i / r) * side + j / r) * cin + ch * r * r + (i % r) * r + (j % r));
            }
        }
    }
    x.gather(idx.into(), &[big, big, c])
}

impl<T: Scalar> ImageModel<T> for PlainSwin<T> {
    fn forward(&self, ctx: &Ctx<T>, image: &Tensor<T>) -> Result<Tensor<T>> {
        let mut x = embed(ctx, &self.psi, image, self.cfg.image_side, self.cfg.in_channels, self.cfg.patch)?;
        if let Some(a) = &self.ape {
            x = x.add(&ctx.bind(a))?;
        }
        let sides = self.cfg.stage_sides();
        for (si, blocks) in self.stages.iter().enumerate() {
            if si > 0 {
                let prev = sides[si - 1];
                let d = x.shape()[1];
                let idx: Rc<[usize]> = (0..prev / 2)
                    .flat_map(|i| (0..prev / 2).map(move |j| 2 * i * prev + 2 * j))
                    .flat_map(|r| r * d..(r + 1) * d)
                    .collect();
                let n = sides[si] * sides[si];
                let (ln, lin) = &self.merges[si - 1];
                x = lin.forward(ctx, &ln.forward(ctx, &x.gather(idx, &[n, d])?)?)?;
            }
            for b in blocks {
                x = b.forward(ctx, &x)?;
            }
        }
        match &self.head {
            PlainSwinHead::Classify(h) => h.forward(ctx, &x),
            PlainSwinHead::SuperResolve { expand, shuffle, scale, residual } => {
                let img = depth_to_space(&expand.forward(ctx, &x)?, sides[0], *shuffle)?;
                if *residual {
                    img.add(&upsample_nearest(image, *scale)?)
                } else {
                    Ok(img)
                }
            }
        }
    }
}

impl<T: Scalar> Module<T> for PlainSwin<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.psi);
        if let Some(a) = &self.ape {
            f(a);
        }
        for (si, blocks) in self.stages.iter().enumerate() {
            if si > 0 {
                self.merges[si - 1].0.visit_params(f);
                self.merges[si - 1].1.visit_params(f);
            }
            for b in blocks {
                b.visit_params(f);
            }
        }
        match &self.head {
            PlainSwinHead::Classify(h) => h.visit_params(f),
            PlainSwinHead::SuperResolve { expand, .. } => expand.visit_params(f),
        }
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.psi);
        if let Some(a) = &mut self.ape {
            f(a);
        }
        for (si, blocks) in self.stages.iter_mut().enumerate() {
            if si > 0 {
                self.merges[si - 1].0.visit_params_mut(f);
                self.merges[si - 1].1.visit_params_mut(f);
            }
            for b in blocks {
                b.visit_params_mut(f);
            }
        }
        match &mut self.head {
            PlainSwinHead::Classify(h) => h.visit_params_mut(f),
            PlainSwinHead::SuperResolve { expand, .. } => expand.visit_params_mut(f),
        }
    }
}

/// Renames trivial-group parameters to their dense counterparts: the single
/// weight block `name.g0` becomes `name.w`; everything else keeps its name.
pub fn dense_name(eq_name: &str) -> String {
    match eq_name.strip_suffix(".g0") {
        Some(stem) => format!("{stem}.w"),
        None => eq_name.to_string(),
    }
}

/// Loads the weights of a trivial-group model into a baseline.
pub fn transfer_weights<T: Scalar>(from: &dyn Module<T>, to: &mut dyn Module<T>) -> Result<()> {
    let records: Vec<(String, NdArray<T>)> =
        from.named_params().into_iter().map(|(n, v)| (dense_name(&n), v)).collect();
    to.load_named(&records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roll_partition_is_a_permutation() {
        let idx = roll_partition_index(6, 3, 1);
        assert!(crate::tensor::is_permutation(&idx));
        // first row of the first window is token (1, 1)
        assert_eq!(idx[0], 7);
    }

    #[test]
    fn regions_follow_shifted_slices() {
        let labels: Vec<usize> = (0..6).map(|x| region(x, 6, 3, 1)).collect();
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 2]);
    }

    #[test]
    fn depth_to_space_example() {
        let x = Tensor::constant(NdArray::<f64>::from_f64(vec![1, 4], &[1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = depth_to_space(&x, 1, 2).unwrap();
        assert_eq!(y.value().data(), &[1.0, 2.0, 3.0, 4.0]);
    }
}
