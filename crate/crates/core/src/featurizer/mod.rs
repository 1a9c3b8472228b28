//! Point clouds to multi-scale feature grids and back to one BEV grid.

pub mod backbone;
pub mod bev;
pub mod pillar;
pub mod project;

pub use backbone::{backbone_forward, Backbone, MultiScaleFeatures};
pub use bev::BevSpec;
pub use pillar::{pillar_encode, PILLAR_CHANNELS};
pub use project::{bev_project, BevProjection, BEV_CHANNELS};
