//! Exactly equivariant vision transformer components.

pub mod error;
pub mod group;
pub mod layers;
pub mod models;
pub mod nn;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/groups.md")]
    mod groups {}
    #[doc = include_str!("../../../book/src/layers.md")]
    mod layers {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
