use super::Scalar;
use crate::error::{domain, shape_err, Result};

/// Contiguous row-major n-dimensional array.
#[derive(Debug, Clone, PartialEq)]
pub struct NdArray<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// Row-major strides for `shape`.
pub fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for ax in (0..shape.len().saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * shape[ax + 1];
    }
    strides
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Scalar> NdArray<T> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        if numel(&shape) != data.len() {
            return Err(shape_err("NdArray::new", &shape, &[data.len()]));
        }
        Ok(NdArray { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: impl Into<Vec<usize>>, v: T) -> Self {
        let shape = shape.into();
        let data = vec![v; numel(&shape)];
        NdArray { shape, data }
    }

    pub fn scalar(v: T) -> Self {
        NdArray { shape: vec![], data: vec![v] }
    }

    /// Builds an array by evaluating `f` at every flat index.
    pub fn from_fn(shape: impl Into<Vec<usize>>, f: impl FnMut(usize) -> T) -> Self {
        let shape = shape.into();
        let data = (0..numel(&shape)).map(f).collect();
        NdArray { shape, data }
    }

    pub fn from_f64(shape: impl Into<Vec<usize>>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (ax, (&i, &n)) in index.iter().zip(&self.shape).enumerate() {
            debug_assert!(i < n, "index {i} out of range on axis {ax}");
            off = off * n + i;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], v: T) {
        let off = self.offset(index);
        self.data[off] = v;
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if numel(&shape) != self.len() {
            return Err(shape_err("reshape", &self.shape, &shape));
        }
        Ok(NdArray { shape, data: self.data.clone() })
    }

    /// `out.shape[i] = self.shape[axes[i]]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let idx = permute_index(&self.shape, axes)?;
        let shape = axes.iter().map(|&a| self.shape[a]).collect::<Vec<_>>();
        Ok(self.gather_flat(&idx, shape))
    }

    /// `out.flat[i] = self.flat[index[i]]`.
    pub fn gather_flat(&self, index: &[usize], shape: Vec<usize>) -> Self {
        debug_assert_eq!(numel(&shape), index.len());
        NdArray { shape, data: index.iter().map(|&i| self.data[i]).collect() }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        NdArray { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(shape_err("zip_map", &self.shape, &other.shape));
        }
        Ok(NdArray {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// `max |self - other|`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if self.shape != other.shape {
            return Err(shape_err("max_abs_diff", &self.shape, &other.shape));
        }
        Ok(self.data.iter().zip(&other.data).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    pub fn cast<U: Scalar>(&self) -> NdArray<U> {
        NdArray { shape: self.shape.clone(), data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect() }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v.as_f64()).collect()
    }

    /// Plain 2-D product, used by oracles and inference-only paths.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (a, b) = (&self.shape, &other.shape);
        if a.len() != 2 || b.len() != 2 || a[1] != b[0] {
            return Err(shape_err("matmul", a, b));
        }
        Ok(NdArray { shape: vec![a[0], b[1]], data: matmul_raw(&self.data, &other.data, a[0], a[1], b[1]) })
    }
}

pub(crate) fn matmul_raw<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

/// Flat source index for every output element of an axis permutation.
pub fn permute_index(shape: &[usize], axes: &[usize]) -> Result<Vec<usize>> {
    let rank = shape.len();
    let mut seen = vec![false; rank];
    if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
        return Err(domain(format!("invalid permutation {axes:?} for rank {rank}")));
    }
    let in_strides = strides_of(shape);
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let total = numel(shape);
    let mut idx = Vec::with_capacity(total);
    let mut counter = vec![0usize; rank];
    for _ in 0..total {
        idx.push(counter.iter().zip(axes).map(|(&c, &a)| c * in_strides[a]).sum());
        for ax in (0..rank).rev() {
            counter[ax] += 1;
            if counter[ax] < out_shape[ax] {
                break;
            }
            counter[ax] = 0;
        }
    }
    Ok(idx)
}

pub fn invert_permutation(axes: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; axes.len()];
    for (i, &a) in axes.iter().enumerate() {
        inv[a] = i;
    }
    inv
}
