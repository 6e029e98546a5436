//! Equivariant ViT and Swin-style models, and their dense baselines.

mod baseline;
mod block;
mod config;
mod ledger;
mod swin;
mod vit;

pub use baseline::{dense_name, transfer_weights, LayerNorm, Linear, PlainBlock, PlainSwin, PlainSwinHead, PlainViT};
pub use block::{group_mean, upsample_nearest, EqBlock, ImageModel, InvariantHead, WindowSpec};
pub use config::{EqSwinConfig, EqViTConfig, SwinHead};
pub use ledger::{
    equal_params_swin, equal_params_vit, equal_width_swin, equal_width_vit, LedgerEntry, ParamCategory, ParamLedger,
};
pub use swin::{EqMerge, EqSwin, EqSwinHead};
pub use vit::EqViT;
