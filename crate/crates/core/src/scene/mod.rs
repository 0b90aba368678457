//! Synthetic FMCW scenes: radar numerology, far-field steering, dechirped
//! baseband synthesis, and camera-model annotation.

mod camera;
mod config;
mod recording;
mod synth;

pub use camera::CameraModel;
pub use config::{grid_positions, ObjectState, RadarConfig, SPEED_OF_LIGHT};
pub use recording::{
    generate_recording, ground_truth_cell, AmplitudeLaw, AnnotatedRecording, FrameTruth,
    Scenario, Trajectory,
};
pub use synth::{
    derive_seed, steering_phases, synthesize_frame, ClutterModel, ClutterSpec, RadarFrame,
    Scatterer,
};
