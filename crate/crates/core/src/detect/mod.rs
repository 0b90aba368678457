//! Presence-map thresholding, single-object extraction and scoring.

/// Default presence threshold.
pub const DEFAULT_TAU: f64 = 0.5;

mod eval;
mod extract;

pub use eval::{
    evaluate, region_iou, EvalReport, FrameGroundTruth, FrameOutcome, FrameResult,
    DEFAULT_IOU_THRESHOLD,
};
pub use extract::{cell_to_range_velocity, detect_outputs, extract_detections, Detection};
