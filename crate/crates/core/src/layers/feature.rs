use std::rc::Rc;

use crate::error::{domain, shape_err, Result};
use crate::group::{GroupElement, GroupSpec};
use crate::tensor::{NdArray, Scalar, Tensor};

/// How the leading axes of a [`LiftedFeature`] are arranged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `[N, c, t]`, with the side of the square token grid when known.
    Tokens { grid_side: Option<usize> },
    /// `[H, W, c, t]`.
    Spatial,
}

/// A feature array with an explicit group axis as its last axis.
///
/// Flattened to width `c·t`, the group index runs fastest inside each
/// channel block: `[F_1^1 … F_t^1, …, F_1^c … F_t^c]`.
#[derive(Debug, Clone)]
pub struct LiftedFeature<T: Scalar> {
    data: Tensor<T>,
    layout: Layout,
    spec: GroupSpec,
}

fn isqrt_exact(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

impl<T: Scalar> LiftedFeature<T> {
    /// Wraps `[N, c, t]` token data.
    pub fn tokens(data: Tensor<T>, spec: GroupSpec) -> Result<Self> {
        let s = data.shape();
        if s.len() != 3 || s[2] != spec.order() {
            return Err(shape_err("LiftedFeature::tokens", s, &[0, 0, spec.order()]));
        }
        let grid_side = isqrt_exact(s[0]);
        Ok(LiftedFeature { data, layout: Layout::Tokens { grid_side }, spec })
    }

    /// Wraps `[H, W, c, t]` spatial data.
    pub fn spatial(data: Tensor<T>, spec: GroupSpec) -> Result<Self> {
        let s = data.shape();
        if s.len() != 4 || s[3] != spec.order() {
            return Err(shape_err("LiftedFeature::spatial", s, &[0, 0, 0, spec.order()]));
        }
        Ok(LiftedFeature { data, layout: Layout::Spatial, spec })
    }

    /// Builds token form from a flattened `[N, c·t]` tensor.
    pub fn from_flat(flat: &Tensor<T>, spec: GroupSpec) -> Result<Self> {
        let s = flat.shape();
        let t = spec.order();
        if s.len() != 2 || !s[1].is_multiple_of(t) {
            return Err(shape_err("LiftedFeature::from_flat", s, &[0, t]));
        }
        Self::tokens(flat.reshape(&[s[0], s[1] / t, t])?, spec)
    }

    pub fn data(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn channels(&self) -> usize {
        let s = self.data.shape();
        s[s.len() - 2]
    }

    pub fn num_tokens(&self) -> usize {
        match self.layout {
            Layout::Tokens { .. } => self.data.shape()[0],
            Layout::Spatial => self.data.shape()[0] * self.data.shape()[1],
        }
    }

    /// Side of the square spatial/token grid.
    pub fn grid_side(&self) -> Result<usize> {
        match self.layout {
            Layout::Tokens { grid_side: Some(n) } => Ok(n),
            Layout::Tokens { grid_side: None } => {
                Err(domain(format!("{} tokens do not form a square grid", self.data.shape()[0])))
            }
            Layout::Spatial => {
                let s = self.data.shape();
                if s[0] == s[1] {
                    Ok(s[0])
                } else {
                    Err(domain(format!("spatial grid {}x{} is not square", s[0], s[1])))
                }
            }
        }
    }

    /// `[N, c·t]` view.
    pub fn flat(&self) -> Result<Tensor<T>> {
        let n = self.num_tokens();
        self.data.reshape(&[n, self.channels() * self.spec.order()])
    }

    pub fn to_tokens(&self) -> Result<Self> {
        match self.layout {
            Layout::Tokens { .. } => Ok(self.clone()),
            Layout::Spatial => {
                let s = self.data.shape();
                Self::tokens(self.data.reshape(&[s[0] * s[1], s[2], s[3]])?, self.spec)
            }
        }
    }

    pub fn to_spatial(&self) -> Result<Self> {
        match self.layout {
            Layout::Spatial => Ok(self.clone()),
            Layout::Tokens { .. } => {
                let n = self.grid_side()?;
                let s = self.data.shape();
                Self::spatial(self.data.reshape(&[n, n, s[1], s[2]])?, self.spec)
            }
        }
    }

    /// Same layout and group, new data of the same leading shape.
    pub fn with_data(&self, data: Tensor<T>) -> Result<Self> {
        match self.layout {
            Layout::Tokens { .. } => Self::tokens(data, self.spec),
            Layout::Spatial => Self::spatial(data, self.spec),
        }
    }

    pub fn value(&self) -> &NdArray<T> {
        self.data.value()
    }
}

/// Source indices of the lifted action on `[n·n, c, |S|]` data: output
/// `(g·p, ch, g∘h)` takes input `(p, ch, h)`.
pub fn lifted_index(spec: &GroupSpec, g: GroupElement, side: usize, channels: usize) -> Result<Vec<usize>> {
    spec.check(g)?;
    if !spec.acts_on_grid() {
        return Err(domain(format!("group {} does not act on square grids", spec.name())));
    }
    let order = spec.order();
    let ginv = spec.inverse(g);
    let slot_src: Vec<usize> = (0..order).map(|h| spec.index_of(spec.compose(ginv, spec.element(h)))).collect();
    let mut index = Vec::with_capacity(side * side * channels * order);
    for i in 0..side {
        for j in 0..side {
            let (si, sj) = spec.act_unchecked(ginv, (i, j), side);
            let base = (si * side + sj) * channels * order;
            for ch in 0..channels {
                for &hs in &slot_src {
                    index.push(base + ch * order + hs);
                }
            }
        }
    }
    Ok(index)
}

/// Source indices of the plain spatial action on `[n, n, inner…]` data:
/// output `g·p` takes input `p`.
pub fn spatial_index(spec: &GroupSpec, g: GroupElement, side: usize, inner: usize) -> Result<Vec<usize>> {
    spec.check(g)?;
    if !spec.acts_on_grid() {
        return Err(domain(format!("group {} does not act on square grids", spec.name())));
    }
    let ginv = spec.inverse(g);
    let mut index = Vec::with_capacity(side * side * inner);
    for i in 0..side {
        for j in 0..side {
            let (si, sj) = spec.act_unchecked(ginv, (i, j), side);
            let base = (si * side + sj) * inner;
            index.extend(base..base + inner);
        }
    }
    Ok(index)
}

/// `π_g̃` on lifted features: moves every token by `g̃` and permutes the
/// group axis by `h -> g̃ ∘ h`.
pub fn lifted_transform<T: Scalar>(g: GroupElement, z: &LiftedFeature<T>) -> Result<LiftedFeature<T>> {
    let side = z.grid_side()?;
    let spec = z.spec();
    let index = lifted_index(&spec, g, side, z.channels())?;
    let shape = z.data().shape().to_vec();
    z.with_data(z.data().gather(Rc::from(index), &shape)?)
}

/// `π_g` on a plain `[n, n, …]` array (images, SR outputs).
pub fn spatial_transform<T: Scalar>(spec: &GroupSpec, g: GroupElement, x: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.len() < 2 || s[0] != s[1] {
        return Err(domain(format!("spatial transform needs a square leading grid, got {s:?}")));
    }
    let inner: usize = s[2..].iter().product();
    let index = spatial_index(spec, g, s[0], inner)?;
    x.gather(Rc::from(index), s)
}

/// Array-level versions for tests and audits.
pub fn lifted_transform_array<T: Scalar>(spec: &GroupSpec, g: GroupElement, z: &NdArray<T>) -> Result<NdArray<T>> {
    let s = z.shape();
    let (side, channels) = match s.len() {
        3 => (isqrt_exact(s[0]).ok_or_else(|| domain(format!("{} tokens are not a square grid", s[0])))?, s[1]),
        4 if s[0] == s[1] => (s[0], s[2]),
        _ => return Err(domain(format!("cannot lift-transform shape {s:?}"))),
    };
    if *s.last().unwrap() != spec.order() {
        return Err(shape_err("lifted_transform", s, &[spec.order()]));
    }
    let index = lifted_index(spec, g, side, channels)?;
    Ok(z.gather_flat(&index, s.to_vec()))
}

pub fn spatial_transform_array<T: Scalar>(spec: &GroupSpec, g: GroupElement, x: &NdArray<T>) -> Result<NdArray<T>> {
    let s = x.shape();
    if s.len() < 2 || s[0] != s[1] {
        return Err(domain(format!("spatial transform needs a square leading grid, got {s:?}")));
    }
    let inner: usize = s[2..].iter().product();
    let index = spatial_index(spec, g, s[0], inner)?;
    Ok(x.gather_flat(&index, s.to_vec()))
}
