//! Grid numerics shared by every stage of the pipeline.

pub mod archive;
pub mod conv;
pub mod init;
pub mod mlp;
pub mod sample;
pub mod tensor;

pub use archive::{NamedTensors, WeightTensor};
pub use conv::{conv2d, sigmoid, softmax, transposed_conv2d, Activation, ConvSpec};
pub use mlp::{Dense, MlpSpec};
pub use sample::bilinear_zero;
pub use tensor::Tensor3;
