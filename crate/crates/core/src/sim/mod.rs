//! Simulation harness: synthetic multi-agent scenes, rendering, lossy
//! transmission, the end-to-end pipeline, a toy detector with AP metrics,
//! and operation counters.

pub mod checks;
pub mod codec;
pub mod complexity;
pub mod config;
pub mod detect;
pub mod flow;
pub mod pgm;
pub mod pipeline;
pub mod render;
pub mod scenario;
pub mod sweep;

pub use codec::{transmit, CodecConfig, CodecMode, CodecReport, Payload, Transmission};
pub use complexity::{count_similarity_ops, count_similarity_ops_with, SimilarityMode};
pub use config::{MotionMode, SimConfig};
pub use detect::{average_precision, detect, evaluate_detection, Detection, DetectionSummary, DetectorConfig};
pub use flow::ideal_fields;
pub use pipeline::{Models, Pipeline, RunArtifacts, RunOptions, RunReport};
pub use render::{render_pointcloud, RenderConfig};
pub use scenario::{generate_scenario, Scenario, ScenarioConfig, Template, EGO_ID};
pub use sweep::{run_sweep, SweepPoint, SweepReport, SweepRow};
