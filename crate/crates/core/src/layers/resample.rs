use std::rc::Rc;

use crate::error::{domain, Result};
use crate::group::GroupSpec;
use crate::tensor::Scalar;

use super::{Layout, LiftedFeature};

fn spatial_extents<T: Scalar>(z: &LiftedFeature<T>, op: &str) -> Result<(usize, usize)> {
    if z.layout() != Layout::Spatial {
        return Err(domain(format!("{op} needs spatial layout")));
    }
    let n = z.grid_side()?;
    if !z.spec().acts_on_grid() {
        return Err(domain(format!("group {} does not act on square grids", z.spec().name())));
    }
    Ok((n, z.channels()))
}

/// Source indices for conjugated down-sampling by `s`: slot `h` of output
/// `p'` reads position `h·(s·(h⁻¹·p'))` of the input.
pub fn downsample_index(spec: &GroupSpec, side: usize, channels: usize, s: usize) -> Vec<usize> {
    let small = side / s;
    let t = spec.order();
    let mut index = Vec::with_capacity(small * small * channels * t);
    for i in 0..small {
        for j in 0..small {
            for ch in 0..channels {
                for h in 0..t {
                    let he = spec.element(h);
                    let (ci, cj) = spec.act_unchecked(spec.inverse(he), (i, j), small);
                    let (bi, bj) = spec.act_unchecked(he, (s * ci, s * cj), side);
                    index.push(((bi * side + bj) * channels + ch) * t + h);
                }
            }
        }
    }
    index
}

/// Keeps one position per `s×s` cell, chosen in each slot's own frame so the
/// result stays equivariant. Needs a square map with side divisible by `s`.
pub fn eq_downsample<T: Scalar>(z: &LiftedFeature<T>, s: usize) -> Result<LiftedFeature<T>> {
    let (n, c) = spatial_extents(z, "eq_downsample")?;
    if s == 0 || n % s != 0 {
        return Err(domain(format!("grid side {n} is not divisible by {s}")));
    }
    let t = z.spec().order();
    let index = downsample_index(&z.spec(), n, c, s);
    let small = n / s;
    z.with_data(z.data().gather(Rc::from(index), &[small, small, c, t])?)
}

/// Source indices for the conjugated pixel shuffle by `r`.
///
/// Sub-pixel offset `(u, v)` of input channel block `ch` sits at channel
/// `ch·r² + u·r + v`. Slot `h` of output `P` reads the offset and coarse
/// position of `h⁻¹·P`, mapping the coarse position back through `h`.
pub fn pixel_shuffle_index(spec: &GroupSpec, side: usize, out_channels: usize, r: usize) -> Vec<usize> {
    let big = side * r;
    let t = spec.order();
    let in_channels = out_channels * r * r;
    let mut index = Vec::with_capacity(big * big * out_channels * t);
    for pi in 0..big {
        for pj in 0..big {
            for ch in 0..out_channels {
                for h in 0..t {
                    let he = spec.element(h);
                    let (qi, qj) = spec.act_unchecked(spec.inverse(he), (pi, pj), big);
                    let (u, v) = (qi % r, qj % r);
                    let (si, sj) = spec.act_unchecked(he, (qi / r, qj / r), side);
                    let src_ch = ch * r * r + u * r + v;
                    index.push(((si * side + sj) * in_channels + src_ch) * t + h);
                }
            }
        }
    }
    index
}

/// `[H, W, r²·c, |S|] -> [rH, rW, c, |S|]`.
pub fn eq_pixel_shuffle<T: Scalar>(z: &LiftedFeature<T>, r: usize) -> Result<LiftedFeature<T>> {
    let (n, c) = spatial_extents(z, "eq_pixel_shuffle")?;
    if r == 0 || c % (r * r) != 0 {
        return Err(domain(format!("{c} channels are not divisible by r² = {}", r * r)));
    }
    let out_c = c / (r * r);
    let t = z.spec().order();
    let index = pixel_shuffle_index(&z.spec(), n, out_c, r);
    z.with_data(z.data().gather(Rc::from(index), &[n * r, n * r, out_c, t])?)
}
