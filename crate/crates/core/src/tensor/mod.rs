//! Minimal dense arrays with reverse-mode differentiation.

mod array;
mod autodiff;
pub mod checkpoint;
mod ops;
mod scalar;

pub use array::{invert_permutation, numel, permute_index, strides_of, NdArray};
pub use autodiff::Tensor;
pub use ops::{flip_index, is_permutation, rot90_index};
pub use scalar::{Precision, Scalar};
