//! Alignment numerics for collaborative bird's-eye-view perception.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: `Tensor3` grids, convolutions, a small MLP, and the
//!   `CPAW` named-weight archive.
//! * [`pointcloud`]: point clouds, oriented boxes, farthest point sampling
//!   and proximal-region hierarchical downsampling.
//! * [`featurizer`]: pillar statistics, the three-scale backbone and the
//!   multi-scale to BEV projection.
//! * [`domain`]: observability maps, inter-agent transforms, void
//!   completion, observability weighting and the adversarial domain loss.
//! * [`temporal`]: motion fields, bilinear warping, temporal scaling,
//!   two-stage alignment and multi-window cosine losses.
//! * [`fusion`]: instance-focused aggregation and the foreground focal loss.
//! * [`sim`]: scenario generation, rendering, transmission, the end-to-end
//!   pipeline, the toy detector and operation counters.

pub mod domain;
pub mod error;
pub mod featurizer;
pub mod fusion;
pub mod numerics;
pub mod pointcloud;
pub mod rng;
pub mod sim;
pub mod temporal;

pub use error::{Error, Result};
pub use numerics::Tensor3;
