//! Glue shared by the command-line tool and end-to-end tests.

use rayon::prelude::*;

use crate::dataset::{build_dataset, Dataset, PreprocessOptions};
use crate::detect::{detect_outputs, evaluate, Detection, EvalReport, FrameGroundTruth};
use crate::error::Result;
use crate::neural::{unet_forward, NetworkParams};
use crate::scene::{
    derive_seed, generate_recording, AnnotatedRecording, CameraModel, FrameTruth, RadarConfig,
    RadarFrame, Scenario, Trajectory,
};
use crate::training::pair_samples;

/// Default trajectory phase offset (rad) of the validation segment.
pub const DEFAULT_VAL_PHASE: f64 = 1.0;

/// One background recording and two disjoint foreground segments of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Segments {
    pub background: AnnotatedRecording,
    pub train: AnnotatedRecording,
    pub val: AnnotatedRecording,
    /// Noise seeds of the three recordings, in the order above.
    pub seeds: [u64; 3],
}

/// Simulates the background segment plus training and validation foreground
/// segments. All three share the scenario's static scene; the validation
/// trajectory is shifted by `val_phase`.
pub fn simulate_segments(
    config: &RadarConfig,
    camera: &CameraModel,
    scenario: &Scenario,
    seed: u64,
    val_phase: f64,
) -> Result<Segments> {
    let seeds = [0, 1, 2].map(|stream| derive_seed(seed, stream, 0));
    let run = |i: usize| {
        generate_recording(config, camera, &segment_scenario(scenario, i, val_phase), seeds[i])
    };
    Ok(Segments {
        background: run(0)?,
        train: run(1)?,
        val: run(2)?,
        seeds,
    })
}

/// Scenario actually used for segment `index` (0 background, 1 train, 2 val).
pub fn segment_scenario(scenario: &Scenario, index: usize, val_phase: f64) -> Scenario {
    let mut sc = scenario.clone();
    match index {
        0 => sc.foreground_frames = 0,
        _ => {
            sc.background_frames = 0;
            if index == 2 {
                if let Trajectory::HorizontalPass { phase, .. } = &mut sc.trajectory {
                    *phase += val_phase;
                }
            }
        }
    }
    sc
}

/// Pairs one foreground segment with the background recording and preprocesses
/// the result.
pub fn make_split(
    foreground: &[RadarFrame],
    truth: &[FrameTruth],
    background: &[RadarFrame],
    background_ratio: f64,
    seed: u64,
    options: &PreprocessOptions,
) -> Result<Dataset> {
    let pairs = pair_samples(foreground.len(), background.len(), background_ratio, seed)?;
    build_dataset(foreground, truth, background, &pairs, options)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub tau: f64,
    pub min_cells: usize,
    pub iou_threshold: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            tau: crate::detect::DEFAULT_TAU,
            min_cells: 1,
            iou_threshold: crate::detect::DEFAULT_IOU_THRESHOLD,
        }
    }
}

/// Per-sample detections for a whole dataset.
pub fn detect_dataset(
    params: &NetworkParams<f32>,
    data: &Dataset,
    config: &RadarConfig,
    options: &DetectOptions,
) -> Result<Vec<Vec<Detection>>> {
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let out = unet_forward(params, &data.input(i))?;
            detect_outputs(&out, 0, options.tau, options.min_cells, config)
        })
        .collect()
}

pub fn evaluate_dataset(
    params: &NetworkParams<f32>,
    data: &Dataset,
    config: &RadarConfig,
    camera: &CameraModel,
    options: &DetectOptions,
) -> Result<EvalReport> {
    let detections = detect_dataset(params, data, config, options)?;
    let truth: Vec<FrameGroundTruth> = data.samples.iter().map(FrameGroundTruth::from_sample).collect();
    evaluate(&detections, &truth, camera, options.iou_threshold)
}
