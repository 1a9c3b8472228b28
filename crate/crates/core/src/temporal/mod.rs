//! Delay compensation: motion fields, bilinear warping, the temporal
//! scaling factor, two-stage alignment and multi-window cosine losses.

pub mod loss;
pub mod motion;
pub mod ptam;
pub mod warp;
pub mod windows;
pub mod xi;

pub use loss::{
    alignment_loss, temporal_loss, temporal_loss_tallied, window_cosine_loss, CosineGranularity, NoTally,
    OpCounts, OpTally, TemporalLoss,
};
pub use motion::{estimate_motion, MotionEstimator, MotionField};
pub use ptam::{ptam_align, ptam_stage1, ptam_stage2, MotionSource, PtamOutput, PtamWeights, Stage1Output, Stage2Output, Stage2Warp, SCALE_NAMES};
pub use warp::warp_features;
pub use windows::{window_partition, Window};
pub use xi::{motion_difference, predict_xi, sinusoidal_embedding, DelayContext, XiMode, XiPredictor};
