//! Point clouds, oriented boxes and proximal-region downsampling.

pub mod fps;
pub mod io;
pub mod phd;
pub mod types;

pub use fps::{fps, sample_count};
pub use phd::{partition_regions, phd_apply, phd_apply_detailed, select_proximal, PhdConfig, PhdOutcome};
pub use types::{normalize_angle, OrientedBox, Point, PointCloud};
