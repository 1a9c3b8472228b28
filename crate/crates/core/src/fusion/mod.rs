//! Instance-focused aggregation: foreground split, structural enhancement,
//! verification, aggregation, agent fusion and the foreground focal loss.

pub mod aggregate;
pub mod focal;
pub mod ifam;
pub mod kernels;
pub mod verify;

pub use aggregate::{
    aggregate_instance, blend, fuse_agents, split_foreground, AggregationSpec, CombineMode, FusionSpec,
};
pub use focal::{focal_loss_on_targets, focal_term, foreground_loss, rasterize_boxes, FocalLoss};
pub use ifam::{Ifam, IfamConfig, Refinement};
pub use kernels::{struct_conv, struct_conv_separate, StructKernels};
pub use verify::{channel_shuffle, channel_unshuffle, verification_weights, VerificationSpec, VerifyOutput};
