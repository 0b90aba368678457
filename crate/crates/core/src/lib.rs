//! Radar object detection and 3D estimation from FMCW range-doppler spectra.
//!
//! The pipeline runs scene synthesis ([`scene`]) through 2D FFT and per-cell
//! phase normalization ([`preprocess`]), a three-headed U-Net ([`neural`])
//! trained with a BCE + Dice + masked-MSE objective ([`training`]), and
//! thresholded component extraction plus scoring ([`detect`]). Binary file
//! formats live in [`formats`]; PGM/PPM rendering in [`render`].

pub mod dataset;
pub mod detect;
pub mod error;
pub mod formats;
pub mod neural;
pub mod pipeline;
pub mod preprocess;
pub mod render;
pub mod scene;
pub mod training;

pub use dataset::{build_dataset, preprocess_pair, Dataset, PreprocessOptions, Sample, SampleMeta};
pub use detect::{Detection, EvalReport};
pub use error::{Error, Result};
pub use neural::{NetworkParams, NetworkSpec, Tensor4};
pub use preprocess::{InputTensor, RangeDopplerCube, TargetMaps};
pub use scene::{AnnotatedRecording, CameraModel, ObjectState, RadarConfig, RadarFrame, Scenario};
pub use training::{LossBreakdown, TrainConfig};
