use std::rc::Rc;

use super::array::{invert_permutation, matmul_raw, numel, permute_index};
use super::{NdArray, Scalar, Tensor};
use crate::error::{domain, shape_err, Result};

fn scatter_add<T: Scalar>(g: &NdArray<T>, index: &[usize], parent_shape: &[usize]) -> NdArray<T> {
    let mut out = NdArray::zeros(parent_shape.to_vec());
    let data = out.data_mut();
    for (&src, &v) in index.iter().zip(g.data()) {
        data[src] = data[src] + v;
    }
    out
}

/// Flat source indices of a 90° turn of the two leading axes, applied
/// `quarter_turns` times. Output position `(j, H-1-i)` takes input `(i, j)`.
pub fn rot90_index(shape: &[usize], quarter_turns: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if shape.len() < 2 {
        return Err(domain(format!("rot90 needs rank >= 2, got shape {shape:?}")));
    }
    let mut cur_shape = shape.to_vec();
    let mut index: Vec<usize> = (0..numel(shape)).collect();
    for _ in 0..quarter_turns % 4 {
        let (h, w) = (cur_shape[0], cur_shape[1]);
        let inner: usize = cur_shape[2..].iter().product();
        let mut next = Vec::with_capacity(index.len());
        // output has shape [w, h, ...]
        for oi in 0..w {
            for oj in 0..h {
                let (si, sj) = (h - 1 - oj, oi);
                let base = (si * w + sj) * inner;
                next.extend_from_slice(&index[base..base + inner]);
            }
        }
        index = next;
        cur_shape.swap(0, 1);
    }
    Ok((index, cur_shape))
}

/// Flat source indices of a mirror along spatial axis 0 (rows) or 1 (columns).
pub fn flip_index(shape: &[usize], axis: usize) -> Result<Vec<usize>> {
    if shape.len() < 2 || axis > 1 {
        return Err(domain(format!("flip needs axis 0 or 1 on rank >= 2, got {axis} on {shape:?}")));
    }
    let (h, w) = (shape[0], shape[1]);
    let inner: usize = shape[2..].iter().product();
    let mut index = Vec::with_capacity(numel(shape));
    for i in 0..h {
        for j in 0..w {
            let (si, sj) = if axis == 0 { (h - 1 - i, j) } else { (i, w - 1 - j) };
            let base = (si * w + sj) * inner;
            index.extend(base..base + inner);
        }
    }
    Ok(index)
}

impl<T: Scalar> Tensor<T> {
    fn unary(&self, f: impl Fn(T) -> T, df: impl Fn(T, T) -> T + 'static) -> Self {
        let x = self.value().clone();
        let y = x.map(&f);
        let y_saved = y.clone();
        Tensor::from_op(
            y,
            vec![(
                self.clone(),
                Box::new(move |g: &NdArray<T>| {
                    NdArray::from_fn(g.shape().to_vec(), |i| g.data()[i] * df(x.data()[i], y_saved.data()[i]))
                }),
            )],
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let v = self.value().zip_map(other.value(), |a, b| a + b)?;
        Ok(Tensor::from_op(
            v,
            vec![
                (self.clone(), Box::new(|g: &NdArray<T>| g.clone())),
                (other.clone(), Box::new(|g: &NdArray<T>| g.clone())),
            ],
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let v = self.value().zip_map(other.value(), |a, b| a - b)?;
        Ok(Tensor::from_op(
            v,
            vec![
                (self.clone(), Box::new(|g: &NdArray<T>| g.clone())),
                (other.clone(), Box::new(|g: &NdArray<T>| g.map(|v| -v))),
            ],
        ))
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let (a, b) = (self.value().clone(), other.value().clone());
        let v = a.zip_map(&b, |x, y| x * y)?;
        Ok(Tensor::from_op(
            v,
            vec![
                (self.clone(), Box::new(move |g: &NdArray<T>| g.zip_map(&b, |u, w| u * w).unwrap())),
                (other.clone(), Box::new(move |g: &NdArray<T>| g.zip_map(&a, |u, w| u * w).unwrap())),
            ],
        ))
    }

    pub fn scale(&self, s: T) -> Self {
        Tensor::from_op(
            self.value().map(|v| v * s),
            vec![(self.clone(), Box::new(move |g: &NdArray<T>| g.map(|v| v * s)))],
        )
    }

    pub fn add_scalar(&self, s: T) -> Self {
        Tensor::from_op(self.value().map(|v| v + s), vec![(self.clone(), Box::new(|g: &NdArray<T>| g.clone()))])
    }

    pub fn powf(&self, p: T) -> Self {
        self.unary(move |x| x.powf(p), move |x, _| p * x.powf(p - T::one()))
    }

    pub fn gelu(&self) -> Self {
        let half = T::lit(0.5);
        let inv_sqrt2 = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        let inv_sqrt_2pi = T::lit(1.0 / (2.0 * std::f64::consts::PI).sqrt());
        self.unary(
            move |x| half * x * (T::one() + (x * inv_sqrt2).erf()),
            move |x, _| {
                let cdf = half * (T::one() + (x * inv_sqrt2).erf());
                cdf + x * inv_sqrt_2pi * (-half * x * x).exp()
            },
        )
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&self) -> Self {
        let shape = self.shape().to_vec();
        Tensor::from_op(
            NdArray::scalar(self.value().sum()),
            vec![(self.clone(), Box::new(move |g: &NdArray<T>| NdArray::full(shape.clone(), g.data()[0])))],
        )
    }

    pub fn mean(&self) -> Self {
        let n = T::lit(self.len().max(1) as f64);
        self.sum().scale(T::one() / n)
    }

    /// Sum over one axis, dropping it.
    pub fn sum_axis(&self, axis: usize) -> Result<Self> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() {
            return Err(domain(format!("axis {axis} out of range for {shape:?}")));
        }
        let outer: usize = shape[..axis].iter().product();
        let n = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        let x = self.value().data();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for a in 0..n {
                let src = &x[(o * n + a) * inner..(o * n + a + 1) * inner];
                for (d, &s) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *d = *d + s;
                }
            }
        }
        let value = NdArray::new(out_shape, out)?;
        Ok(Tensor::from_op(
            value,
            vec![(
                self.clone(),
                Box::new(move |g: &NdArray<T>| {
                    NdArray::from_fn(shape.clone(), |i| {
                        let o = i / (n * inner);
                        let r = i % inner;
                        g.data()[o * inner + r]
                    })
                }),
            )],
        ))
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Self> {
        let n = *self
            .shape()
            .get(axis)
            .ok_or_else(|| domain(format!("axis {axis} out of range for {:?}", self.shape())))?;
        Ok(self.sum_axis(axis)?.scale(T::one() / T::lit(n.max(1) as f64)))
    }

    /// 2-D matrix product.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (sa, sb) = (self.shape().to_vec(), other.shape().to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", &sa, &sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (a, b) = (self.value().clone(), other.value().clone());
        let out = NdArray::new(vec![m, n], matmul_raw(a.data(), b.data(), m, k, n))?;
        let bt = b.permute(&[1, 0])?;
        let at = a.permute(&[1, 0])?;
        Ok(Tensor::from_op(
            out,
            vec![
                (
                    self.clone(),
                    Box::new(move |g: &NdArray<T>| {
                        NdArray::new(vec![m, k], matmul_raw(g.data(), bt.data(), m, n, k)).unwrap()
                    }),
                ),
                (
                    other.clone(),
                    Box::new(move |g: &NdArray<T>| {
                        NdArray::new(vec![k, n], matmul_raw(at.data(), g.data(), k, m, n)).unwrap()
                    }),
                ),
            ],
        ))
    }

    pub fn transpose(&self) -> Result<Self> {
        if self.shape().len() != 2 {
            return Err(domain(format!("transpose needs rank 2, got {:?}", self.shape())));
        }
        self.permute_axes(&[1, 0])
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let value = self.value().reshape(shape.to_vec())?;
        let orig = self.shape().to_vec();
        Ok(Tensor::from_op(
            value,
            vec![(self.clone(), Box::new(move |g: &NdArray<T>| g.reshape(orig.clone()).unwrap()))],
        ))
    }

    /// `out.shape[i] = self.shape[axes[i]]`.
    pub fn permute_axes(&self, axes: &[usize]) -> Result<Self> {
        let index = permute_index(self.shape(), axes)?;
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape()[a]).collect();
        let value = self.value().gather_flat(&index, out_shape.clone());
        let inv = invert_permutation(axes);
        Ok(Tensor::from_op(value, vec![(self.clone(), Box::new(move |g: &NdArray<T>| g.permute(&inv).unwrap()))]))
    }

    /// `out.flat[i] = self.flat[index[i]]`, reshaped to `shape`.
    ///
    /// Indices may repeat; the backward pass scatter-adds.
    pub fn gather(&self, index: Rc<[usize]>, shape: &[usize]) -> Result<Self> {
        if numel(shape) != index.len() {
            return Err(shape_err("gather", shape, &[index.len()]));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= self.len()) {
            return Err(domain(format!("gather index {bad} out of range for {} elements", self.len())));
        }
        let value = self.value().gather_flat(&index, shape.to_vec());
        let parent_shape = self.shape().to_vec();
        Ok(Tensor::from_op(
            value,
            vec![(self.clone(), Box::new(move |g: &NdArray<T>| scatter_add(g, &index, &parent_shape)))],
        ))
    }

    /// Half-open range `start..end` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, end: usize) -> Result<Self> {
        let shape = self.shape();
        if axis >= shape.len() || start > end || end > shape[axis] {
            return Err(domain(format!("slice {start}..{end} on axis {axis} of {shape:?}")));
        }
        let outer: usize = shape[..axis].iter().product();
        let n = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mut index = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            index.extend((o * n + start) * inner..(o * n + end) * inner);
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = end - start;
        self.gather(index.into(), &out_shape)
    }

    /// Joins tensors along `axis`; all other extents must agree.
    pub fn concat(parts: &[Tensor<T>], axis: usize) -> Result<Self> {
        let first = parts.first().ok_or_else(|| domain("concat of zero tensors"))?;
        let base = first.shape().to_vec();
        if axis >= base.len() {
            return Err(domain(format!("axis {axis} out of range for {base:?}")));
        }
        for p in parts {
            let s = p.shape();
            if s.len() != base.len() || s.iter().zip(&base).enumerate().any(|(ax, (a, b))| ax != axis && a != b) {
                return Err(shape_err("concat", &base, s));
            }
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let extents: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total: usize = extents.iter().sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (p, &e) in parts.iter().zip(&extents) {
                data.extend_from_slice(&p.value().data()[o * e * inner..(o + 1) * e * inner]);
            }
        }
        let mut out_shape = base.clone();
        out_shape[axis] = total;
        let value = NdArray::new(out_shape, data)?;
        let mut edges: Vec<(Tensor<T>, super::autodiff::BackwardFn<T>)> = Vec::new();
        let mut offset = 0;
        for (p, &e) in parts.iter().zip(&extents) {
            let pshape = p.shape().to_vec();
            let off = offset;
            edges.push((
                p.clone(),
                Box::new(move |g: &NdArray<T>| {
                    let mut out = Vec::with_capacity(outer * e * inner);
                    for o in 0..outer {
                        let start = (o * total + off) * inner;
                        out.extend_from_slice(&g.data()[start..start + e * inner]);
                    }
                    NdArray::new(pshape.clone(), out).unwrap()
                }),
            ));
            offset += e;
        }
        Ok(Tensor::from_op(value, edges))
    }

    /// Repeats a trailing extent of 1 to `n`: `[.., 1] -> [.., n]`.
    pub fn broadcast_last(&self, n: usize) -> Result<Self> {
        let shape = self.shape();
        if shape.last() != Some(&1) {
            return Err(domain(format!("broadcast_last needs trailing extent 1, got {shape:?}")));
        }
        let rows = self.len();
        let index: Vec<usize> = (0..rows).flat_map(|r| std::iter::repeat_n(r, n)).collect();
        let mut out_shape = shape.to_vec();
        *out_shape.last_mut().unwrap() = n;
        self.gather(index.into(), &out_shape)
    }

    fn last_dim(&self) -> Result<(usize, usize)> {
        let n = *self.shape().last().ok_or_else(|| domain("operation needs rank >= 1"))?;
        if n == 0 {
            return Err(domain("empty last dimension"));
        }
        Ok((self.len() / n, n))
    }

    pub fn softmax_last(&self) -> Result<Self> {
        let (rows, n) = self.last_dim()?;
        let x = self.value();
        let mut y = vec![T::zero(); x.len()];
        for r in 0..rows {
            let row = &x.data()[r * n..(r + 1) * n];
            let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let mut z = T::zero();
            for (o, &v) in y[r * n..(r + 1) * n].iter_mut().zip(row) {
                *o = (v - max).exp();
                z = z + *o;
            }
            for o in &mut y[r * n..(r + 1) * n] {
                *o = *o / z;
            }
        }
        let y = NdArray::new(x.shape().to_vec(), y)?;
        let ys = y.clone();
        Ok(Tensor::from_op(
            y,
            vec![(
                self.clone(),
                Box::new(move |g: &NdArray<T>| {
                    let mut out = vec![T::zero(); g.len()];
                    for r in 0..rows {
                        let yr = &ys.data()[r * n..(r + 1) * n];
                        let gr = &g.data()[r * n..(r + 1) * n];
                        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        for ((o, &a), &b) in out[r * n..(r + 1) * n].iter_mut().zip(yr).zip(gr) {
                            *o = a * (b - dot);
                        }
                    }
                    NdArray::new(g.shape().to_vec(), out).unwrap()
                }),
            )],
        ))
    }

    pub fn log_softmax_last(&self) -> Result<Self> {
        let (rows, n) = self.last_dim()?;
        let x = self.value();
        let mut y = vec![T::zero(); x.len()];
        for r in 0..rows {
            let row = &x.data()[r * n..(r + 1) * n];
            let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
            for (o, &v) in y[r * n..(r + 1) * n].iter_mut().zip(row) {
                *o = v - lse;
            }
        }
        let y = NdArray::new(x.shape().to_vec(), y)?;
        let ys = y.clone();
        Ok(Tensor::from_op(
            y,
            vec![(
                self.clone(),
                Box::new(move |g: &NdArray<T>| {
                    let mut out = vec![T::zero(); g.len()];
                    for r in 0..rows {
                        let gr = &g.data()[r * n..(r + 1) * n];
                        let gsum: T = gr.iter().copied().sum();
                        for ((o, &lp), &b) in
                            out[r * n..(r + 1) * n].iter_mut().zip(&ys.data()[r * n..(r + 1) * n]).zip(gr)
                        {
                            *o = b - lp.exp() * gsum;
                        }
                    }
                    NdArray::new(g.shape().to_vec(), out).unwrap()
                }),
            )],
        ))
    }

    /// Mean and biased variance over the last axis, each of shape `[.., 1]`.
    pub fn mean_var_last(&self) -> Result<(Self, Self)> {
        let (rows, n) = self.last_dim()?;
        let x = self.value().clone();
        let nt = T::lit(n as f64);
        let mut means = vec![T::zero(); rows];
        let mut vars = vec![T::zero(); rows];
        for r in 0..rows {
            let row = &x.data()[r * n..(r + 1) * n];
            let m = row.iter().copied().sum::<T>() / nt;
            means[r] = m;
            vars[r] = row.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / nt;
        }
        let mut stat_shape = x.shape().to_vec();
        *stat_shape.last_mut().unwrap() = 1;
        let full_shape = x.shape().to_vec();
        let mean_t = Tensor::from_op(
            NdArray::new(stat_shape.clone(), means.clone())?,
            vec![(
                self.clone(),
                Box::new({
                    let full_shape = full_shape.clone();
                    move |g: &NdArray<T>| NdArray::from_fn(full_shape.clone(), |i| g.data()[i / n] / nt)
                }),
            )],
        );
        let var_t = Tensor::from_op(
            NdArray::new(stat_shape, vars)?,
            vec![(
                self.clone(),
                Box::new(move |g: &NdArray<T>| {
                    NdArray::from_fn(full_shape.clone(), |i| {
                        let r = i / n;
                        g.data()[r] * T::lit(2.0) * (x.data()[i] - means[r]) / nt
                    })
                }),
            )],
        );
        Ok((mean_t, var_t))
    }

    /// Valid 2-D cross-correlation of `[H, W, C_in]` with `[kh, kw, C_in, C_out]`.
    ///
    /// Supports the non-overlapping patchify mode (`stride == kh == kw`) and
    /// plain stride-1 convolution.
    pub fn conv2d(&self, kernel: &Self, stride: usize) -> Result<Self> {
        let (xs, ks) = (self.shape().to_vec(), kernel.shape().to_vec());
        if xs.len() != 3 || ks.len() != 4 || xs[2] != ks[2] {
            return Err(shape_err("conv2d", &xs, &ks));
        }
        let (h, w, cin) = (xs[0], xs[1], xs[2]);
        let (kh, kw, cout) = (ks[0], ks[1], ks[3]);
        let patchify = stride == kh && stride == kw;
        if stride == 0 || !(patchify || stride == 1) {
            return Err(domain(format!(
                "conv2d supports stride 1 or stride == kernel size, got stride {stride} with kernel {kh}x{kw}"
            )));
        }
        if kh > h || kw > w || (patchify && (h % stride != 0 || w % stride != 0)) {
            return Err(shape_err("conv2d", &xs, &ks));
        }
        let ho = (h - kh) / stride + 1;
        let wo = (w - kw) / stride + 1;
        let cols = kh * kw * cin;
        let mut index = Vec::with_capacity(ho * wo * cols);
        for oi in 0..ho {
            for oj in 0..wo {
                for a in 0..kh {
                    for b in 0..kw {
                        let base = ((oi * stride + a) * w + (oj * stride + b)) * cin;
                        index.extend(base..base + cin);
                    }
                }
            }
        }
        let patches = self.gather(index.into(), &[ho * wo, cols])?;
        let flat_k = kernel.reshape(&[cols, cout])?;
        patches.matmul(&flat_k)?.reshape(&[ho, wo, cout])
    }

    /// Turns the two leading (spatial) axes by 90°, `quarter_turns` times.
    /// One turn moves input `(i, j)` to output `(j, H-1-i)`.
    pub fn rot90_spatial(&self, quarter_turns: usize) -> Result<Self> {
        let (index, shape) = rot90_index(self.shape(), quarter_turns)?;
        self.gather(index.into(), &shape)
    }

    /// Mirrors spatial axis 0 (`i -> H-1-i`) or 1 (`j -> W-1-j`).
    pub fn flip_spatial(&self, axis: usize) -> Result<Self> {
        let index = flip_index(self.shape(), axis)?;
        let shape = self.shape().to_vec();
        self.gather(index.into(), &shape)
    }

    /// Mean negative log-likelihood of `labels` under row-wise softmax of
    /// `[B, K]` logits.
    pub fn cross_entropy(&self, labels: &[usize]) -> Result<Self> {
        let s = self.shape();
        if s.len() != 2 || s[0] != labels.len() {
            return Err(shape_err("cross_entropy", s, &[labels.len()]));
        }
        let k = s[1];
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(domain(format!("label {bad} out of range for {k} classes")));
        }
        let logp = self.log_softmax_last()?;
        let idx: Vec<usize> = labels.iter().enumerate().map(|(b, &l)| b * k + l).collect();
        Ok(logp.gather(idx.into(), &[labels.len()])?.mean().scale(-T::one()))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&self, target: &NdArray<T>) -> Result<Self> {
        let diff = self.sub(&Tensor::constant(target.clone()))?;
        Ok(diff.mul(&diff)?.mean())
    }
}

/// Whether `index` is a bijection on `0..index.len()`.
pub fn is_permutation(index: &[usize]) -> bool {
    let mut seen = vec![false; index.len()];
    index.iter().all(|&i| i < seen.len() && !std::mem::replace(&mut seen[i], true))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::param(NdArray::from_f64(shape.to_vec(), v).unwrap())
    }

    #[test]
    fn softmax_single_element_is_one() {
        let x = t(&[3, 1], &[-4.0, 0.0, 10.0]);
        assert_eq!(x.softmax_last().unwrap().value().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn conv_all_ones_patchify() {
        let x = Tensor::constant(NdArray::full(vec![4, 4, 1], 1.0));
        let k = Tensor::constant(NdArray::full(vec![2, 2, 1, 1], 1.0));
        let y = x.conv2d(&k, 2).unwrap();
        assert_eq!(y.shape(), &[2, 2, 1]);
        assert_eq!(y.value().data(), &[4.0; 4]);
        assert!(x.conv2d(&k, 3).is_err());
    }

    #[test]
    fn shape_errors_carry_both_shapes() {
        let a = t(&[2, 3], &[0.0; 6]);
        let b = t(&[2, 3], &[0.0; 6]);
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn rot90_moves_corner() {
        let x: NdArray<f64> = NdArray::from_fn(vec![3, 3], |i| i as f64);
        let y = Tensor::constant(x).rot90_spatial(1).unwrap();
        // input (0,0) lands on (0, 2)
        assert_eq!(y.value().get(&[0, 2]), 0.0);
        assert_eq!(y.value().get(&[2, 2]), 2.0);
    }

    #[test]
    fn rectangular_rot90_swaps_extents() {
        let x: NdArray<f64> = NdArray::from_fn(vec![2, 3, 2], |i| i as f64);
        let y = Tensor::constant(x.clone()).rot90_spatial(1).unwrap();
        assert_eq!(y.shape(), &[3, 2, 2]);
        let back = y.rot90_spatial(3).unwrap();
        assert_eq!(back.value(), &x);
    }

    #[test]
    fn mean_var_matches_hand_values() {
        let x = t(&[1, 4], &[1.0, 2.0, 3.0, 6.0]);
        let (m, v) = x.mean_var_last().unwrap();
        assert_eq!(m.value().data(), &[3.0]);
        assert_eq!(v.value().data(), &[3.5]);
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let x = t(&[2, 4], &[0.0; 8]);
        let l = x.cross_entropy(&[0, 3]).unwrap();
        assert!((l.value().data()[0] - 4f64.ln()).abs() < 1e-15);
        assert!(x.cross_entropy(&[0, 4]).is_err());
    }
}
