//! Equivariant building blocks on lifted features.

mod attention;
mod feature;
mod linear;
mod norm;
mod patch_embed;
pub mod posenc;
mod resample;

pub use attention::{eq_attention, EqRpeMaps, EqSelfAttention, HeadBias, WindowPlan};
pub use feature::{
    lifted_index, lifted_transform, lifted_transform_array, spatial_index, spatial_transform, spatial_transform_array,
    Layout, LiftedFeature,
};
pub use linear::{eq_linear, tiled_index, tiled_matrix, EqLinear};
pub use norm::{eq_layernorm, EqLayerNorm, LAYER_NORM_EPS};
pub use patch_embed::{eq_patch_embed, kernel_bank, EqConvKernel};
pub use posenc::{apply_ape, EqApe, EqRpe};
pub use resample::{downsample_index, eq_downsample, eq_pixel_shuffle, pixel_shuffle_index};
