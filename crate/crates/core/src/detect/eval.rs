use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::extract::Detection;
use crate::dataset::Sample;
use crate::error::{shape_err, Result};
use crate::scene::CameraModel;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.1;

/// What the scorer needs to know about one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGroundTruth {
    pub present: bool,
    /// Ground-truth region (the target disk).
    pub cells: Vec<(usize, usize)>,
    pub range: f64,
    pub velocity: f64,
    pub x_im: f64,
    pub y_im: f64,
}

impl FrameGroundTruth {
    pub fn absent() -> Self {
        Self {
            present: false,
            cells: Vec::new(),
            range: 0.0,
            velocity: 0.0,
            x_im: 0.0,
            y_im: 0.0,
        }
    }

    pub fn from_sample(sample: &Sample) -> Self {
        let t = &sample.targets;
        let cells = t
            .mask()
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| (i / t.doppler_bins, i % t.doppler_bins))
            .collect();
        let meta = &sample.meta;
        Self {
            present: meta.present,
            cells,
            range: f64::from(meta.range),
            velocity: f64::from(meta.velocity),
            x_im: f64::from(meta.x_im),
            y_im: f64::from(meta.y_im),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameOutcome {
    TruePositive,
    FalsePositive,
    FalseNegative,
    TrueNegative,
    /// Object present and detected, but IoU below threshold: one false
    /// positive plus one false negative.
    Mislocalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame: usize,
    pub outcome: FrameOutcome,
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub mislocalized: usize,
    pub precision: f64,
    pub recall: f64,
    pub iou_threshold: f64,
    /// Means over true positives; zero when there are none.
    pub mean_iou: f64,
    pub mse_x: f64,
    pub mse_y: f64,
    pub range_mae: f64,
    pub velocity_mae: f64,
    pub azimuth_mae: f64,
    pub elevation_mae: f64,
    pub per_frame: Vec<FrameResult>,
}

pub fn region_iou(a: &[(usize, usize)], b: &[(usize, usize)]) -> f64 {
    let a: HashSet<_> = a.iter().copied().collect();
    let b: HashSet<_> = b.iter().copied().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Score at most one detection per frame against ground truth.
pub fn evaluate(
    detections: &[Vec<Detection>],
    truth: &[FrameGroundTruth],
    camera: &CameraModel,
    iou_threshold: f64,
) -> Result<EvalReport> {
    if detections.len() != truth.len() {
        return Err(shape_err(format!(
            "{} detection lists for {} frames",
            detections.len(),
            truth.len()
        )));
    }
    let mut r = EvalReport {
        frames: truth.len(),
        true_positives: 0,
        false_positives: 0,
        false_negatives: 0,
        true_negatives: 0,
        mislocalized: 0,
        precision: 1.0,
        recall: 1.0,
        iou_threshold,
        mean_iou: 0.0,
        mse_x: 0.0,
        mse_y: 0.0,
        range_mae: 0.0,
        velocity_mae: 0.0,
        azimuth_mae: 0.0,
        elevation_mae: 0.0,
        per_frame: Vec::with_capacity(truth.len()),
    };
    for (frame, (dets, gt)) in detections.iter().zip(truth).enumerate() {
        let det = dets.first();
        let (outcome, iou) = match (det, gt.present) {
            (None, false) => (FrameOutcome::TrueNegative, None),
            (None, true) => (FrameOutcome::FalseNegative, None),
            (Some(_), false) => (FrameOutcome::FalsePositive, None),
            (Some(d), true) => {
                let iou = region_iou(&d.cells, &gt.cells);
                if iou >= iou_threshold {
                    (FrameOutcome::TruePositive, Some(iou))
                } else {
                    (FrameOutcome::Mislocalized, Some(iou))
                }
            }
        };
        match outcome {
            FrameOutcome::TruePositive => {
                let d = det.expect("true positive has a detection");
                r.true_positives += 1;
                r.mean_iou += iou.unwrap_or(0.0);
                r.mse_x += (d.x_est - gt.x_im).powi(2);
                r.mse_y += (d.y_est - gt.y_im).powi(2);
                r.range_mae += (d.range_est - gt.range).abs();
                r.velocity_mae += (d.velocity_est - gt.velocity).abs();
                let (az, el) = camera.backproject(d.x_est, d.y_est);
                let (az_t, el_t) = camera.backproject(gt.x_im, gt.y_im);
                r.azimuth_mae += (az - az_t).abs();
                r.elevation_mae += (el - el_t).abs();
            }
            FrameOutcome::FalsePositive => r.false_positives += 1,
            FrameOutcome::FalseNegative => r.false_negatives += 1,
            FrameOutcome::TrueNegative => r.true_negatives += 1,
            FrameOutcome::Mislocalized => r.mislocalized += 1,
        }
        r.per_frame.push(FrameResult { frame, outcome, iou });
    }
    if r.true_positives > 0 {
        let n = r.true_positives as f64;
        for v in [
            &mut r.mean_iou,
            &mut r.mse_x,
            &mut r.mse_y,
            &mut r.range_mae,
            &mut r.velocity_mae,
            &mut r.azimuth_mae,
            &mut r.elevation_mae,
        ] {
            *v /= n;
        }
    }
    let tp = r.true_positives as f64;
    let claimed = tp + (r.false_positives + r.mislocalized) as f64;
    let actual = tp + (r.false_negatives + r.mislocalized) as f64;
    if claimed > 0.0 {
        r.precision = tp / claimed;
    }
    if actual > 0.0 {
        r.recall = tp / actual;
    }
    Ok(r)
}
