use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::CameraModel;
use super::config::{ObjectState, RadarConfig, SPEED_OF_LIGHT};
use super::synth::{derive_seed, synthesize_frame, ClutterModel, ClutterSpec, RadarFrame};
use crate::error::{Error, Result};

const STREAM_BACKGROUND: u64 = 1;
const STREAM_FOREGROUND: u64 = 2;

/// Object motion over a foreground segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    /// The object drives back and forth across the ground plane: range
    /// oscillates over the scenario span while azimuth sweeps sideways, and
    /// elevation follows from a fixed height offset below the radar.
    HorizontalPass {
        /// Seconds for one near-far-near range cycle.
        pass_period: f64,
        /// Peak azimuth (rad).
        azimuth_max: f64,
        /// Seconds for one left-right azimuth cycle.
        azimuth_period: f64,
        /// Object height minus radar height (m).
        height_offset: f64,
        /// Phase offset (rad) applied to both cycles; distinguishes segments.
        phase: f64,
    },
    /// A stationary-kinematics object, mostly for tests.
    Fixed {
        range: f64,
        radial_velocity: f64,
        azimuth: f64,
        elevation: f64,
    },
}

impl Default for Trajectory {
    fn default() -> Self {
        Trajectory::HorizontalPass {
            pass_period: 16.0,
            azimuth_max: 0.6,
            azimuth_period: 11.0,
            height_offset: -0.6,
            phase: 0.0,
        }
    }
}

/// Reflectivity as a function of range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmplitudeLaw {
    /// `reference_amplitude * (reference_range / R)^2`
    InverseSquare {
        reference_amplitude: f64,
        reference_range: f64,
    },
    Constant { amplitude: f64 },
}

impl Default for AmplitudeLaw {
    fn default() -> Self {
        AmplitudeLaw::InverseSquare {
            reference_amplitude: 1.0,
            reference_range: 4.0,
        }
    }
}

impl AmplitudeLaw {
    pub fn amplitude(&self, range: f64) -> f64 {
        match *self {
            AmplitudeLaw::InverseSquare {
                reference_amplitude,
                reference_range,
            } => reference_amplitude * (reference_range / range).powi(2),
            AmplitudeLaw::Constant { amplitude } => amplitude,
        }
    }
}

/// Everything needed to generate one recording besides the radar and camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub background_frames: usize,
    pub foreground_frames: usize,
    pub range_min: f64,
    pub range_max: f64,
    /// Seconds between consecutive frames.
    pub frame_interval: f64,
    pub trajectory: Trajectory,
    pub amplitude: AmplitudeLaw,
    pub clutter: ClutterSpec,
    /// Seed for the static environment; segments of one scene share it.
    pub scene_seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            background_frames: 256,
            foreground_frames: 512,
            range_min: 4.0,
            range_max: 28.0,
            frame_interval: 0.05,
            trajectory: Trajectory::default(),
            amplitude: AmplitudeLaw::default(),
            clutter: ClutterSpec::default(),
            scene_seed: 0,
        }
    }
}

impl Scenario {
    /// Object state at time `t` (s).
    pub fn object_at(&self, t: f64) -> ObjectState {
        let (range, radial_velocity, azimuth, elevation) = match self.trajectory {
            Trajectory::HorizontalPass {
                pass_period,
                azimuth_max,
                azimuth_period,
                height_offset,
                phase,
            } => {
                let mid = 0.5 * (self.range_min + self.range_max);
                let half = 0.5 * (self.range_max - self.range_min);
                let w = TAU / pass_period;
                let arg = w * t + phase;
                let range = mid - half * arg.cos();
                let radial_velocity = half * w * arg.sin();
                let azimuth = azimuth_max * (TAU * t / azimuth_period + 1.7 * phase).sin();
                let elevation = (height_offset / range).clamp(-1.0, 1.0).asin();
                (range, radial_velocity, azimuth, elevation)
            }
            Trajectory::Fixed {
                range,
                radial_velocity,
                azimuth,
                elevation,
            } => (range, radial_velocity, azimuth, elevation),
        };
        ObjectState {
            range,
            radial_velocity,
            azimuth,
            elevation,
            amplitude: self.amplitude.amplitude(range),
        }
    }
}

/// Per-frame annotation. Background frames carry `present == false` and
/// zeroed kinematics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub frame_id: u64,
    pub timestamp: f64,
    pub present: bool,
    /// Range bin of the object.
    pub k: usize,
    /// Doppler bin of the object, after centring zero velocity at M/2.
    pub m: usize,
    pub range: f64,
    pub velocity: f64,
    pub phi: f64,
    pub theta: f64,
    pub x_im: f64,
    pub y_im: f64,
}

/// Background and foreground frames of one segment plus per-foreground-frame truth.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedRecording {
    pub background: Vec<RadarFrame>,
    pub foreground: Vec<RadarFrame>,
    pub truth: Vec<FrameTruth>,
    /// Foreground frames dropped because the camera could not see the object.
    pub excluded: usize,
}

/// Spectrum cell where an object at (range, velocity) peaks.
pub fn ground_truth_cell(config: &RadarConfig, range: f64, velocity: f64) -> (usize, usize) {
    let (k_len, m_len, _) = config.dims();
    let k = ((range / config.range_resolution()).round() as usize).min(k_len - 1);
    let doppler = 2.0 * velocity * config.carrier_freq / SPEED_OF_LIGHT;
    let shift = (doppler * config.chirp_duration * m_len as f64).round() as i64;
    let m = (shift + (m_len / 2) as i64).rem_euclid(m_len as i64) as usize;
    (k, m)
}

/// Generates a deterministic annotated recording.
pub fn generate_recording(
    config: &RadarConfig,
    camera: &CameraModel,
    scenario: &Scenario,
    seed: u64,
) -> Result<AnnotatedRecording> {
    config.validate()?;
    camera.validate()?;
    if !(scenario.range_min > 0.0 && scenario.range_max > scenario.range_min) {
        return Err(Error::Config("scenario range span must be positive".into()));
    }
    if scenario.foreground_frames > 0 && scenario.range_max >= config.max_range() {
        return Err(Error::Config(format!(
            "scenario range {} exceeds unambiguous range {}",
            scenario.range_max,
            config.max_range()
        )));
    }
    let clutter = ClutterModel::generate(config, &scenario.clutter, scenario.scene_seed)?;

    let background = (0..scenario.background_frames)
        .into_par_iter()
        .map(|i| {
            let mut frame = synthesize_frame(
                config,
                None,
                &clutter,
                derive_seed(seed, STREAM_BACKGROUND, i as u64),
            )?;
            frame.frame_id = i as u64;
            frame.timestamp = i as f64 * scenario.frame_interval;
            Ok(frame)
        })
        .collect::<Result<Vec<_>>>()?;

    let annotated = (0..scenario.foreground_frames)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * scenario.frame_interval;
            let obj = scenario.object_at(t);
            let (x_im, y_im) = match camera.project(obj.azimuth, obj.elevation) {
                Ok(xy) => xy,
                Err(Error::OutOfFrame { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut frame = synthesize_frame(
                config,
                Some(&obj),
                &clutter,
                derive_seed(seed, STREAM_FOREGROUND, i as u64),
            )?;
            frame.frame_id = i as u64;
            frame.timestamp = t;
            let (k, m) = ground_truth_cell(config, obj.range, obj.radial_velocity);
            let truth = FrameTruth {
                frame_id: i as u64,
                timestamp: t,
                present: true,
                k,
                m,
                range: obj.range,
                velocity: obj.radial_velocity,
                phi: obj.azimuth,
                theta: obj.elevation,
                x_im,
                y_im,
            };
            Ok(Some((frame, truth)))
        })
        .collect::<Result<Vec<_>>>()?;

    let excluded = annotated.iter().filter(|a| a.is_none()).count();
    let (foreground, truth) = annotated.into_iter().flatten().unzip();
    Ok(AnnotatedRecording {
        background,
        foreground,
        truth,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (RadarConfig, Scenario) {
        let cfg = RadarConfig::with_dims(32, 16);
        let scenario = Scenario {
            background_frames: 3,
            foreground_frames: 5,
            clutter: ClutterSpec {
                num_scatterers: 4,
                ..ClutterSpec::default()
            },
            ..Scenario::default()
        };
        (cfg, scenario)
    }

    #[test]
    fn no_foreground_frames() {
        let (cfg, mut scenario) = small();
        scenario.foreground_frames = 0;
        let rec = generate_recording(&cfg, &CameraModel::default(), &scenario, 1).unwrap();
        assert_eq!(rec.background.len(), 3);
        assert!(rec.foreground.is_empty() && rec.truth.is_empty());
    }

    #[test]
    fn same_seed_same_recording() {
        let (cfg, scenario) = small();
        let a = generate_recording(&cfg, &CameraModel::default(), &scenario, 9).unwrap();
        let b = generate_recording(&cfg, &CameraModel::default(), &scenario, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_recording(&cfg, &CameraModel::default(), &scenario, 10).unwrap();
        assert_ne!(a.foreground, c.foreground);
    }

    #[test]
    fn annotations_are_normalized() {
        let (cfg, scenario) = small();
        let rec = generate_recording(&cfg, &CameraModel::default(), &scenario, 2).unwrap();
        assert_eq!(rec.truth.len() + rec.excluded, 5);
        for t in &rec.truth {
            assert!(t.present);
            assert!((0.0..=1.0).contains(&t.x_im) && (0.0..=1.0).contains(&t.y_im));
            assert_eq!((t.k, t.m), ground_truth_cell(&cfg, t.range, t.velocity));
        }
    }

    #[test]
    fn invisible_object_is_excluded() {
        let (cfg, mut scenario) = small();
        scenario.trajectory = Trajectory::Fixed {
            range: 10.0,
            radial_velocity: 1.0,
            azimuth: 1.2,
            elevation: 0.0,
        };
        let rec = generate_recording(&cfg, &CameraModel::default(), &scenario, 2).unwrap();
        assert_eq!(rec.excluded, 5);
        assert!(rec.foreground.is_empty());
    }

    #[test]
    fn horizontal_pass_spans_the_range() {
        let scenario = Scenario::default();
        let cfg = RadarConfig::default();
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        for i in 0..scenario.foreground_frames {
            let obj = scenario.object_at(i as f64 * scenario.frame_interval);
            obj.validate(&cfg).unwrap();
            lo = lo.min(obj.range);
            hi = hi.max(obj.range);
        }
        assert!(lo < 4.5 && hi > 27.5, "span {lo}..{hi}");
    }

    #[test]
    fn cell_of_stationary_object_is_centred() {
        let cfg = RadarConfig::default();
        assert_eq!(ground_truth_cell(&cfg, 0.0, 0.0), (0, 32));
        let (_, m) = ground_truth_cell(&cfg, 5.0, cfg.velocity_resolution() * 3.0);
        assert_eq!(m, 35);
        let (_, m) = ground_truth_cell(&cfg, 5.0, -cfg.velocity_resolution() * 3.0);
        assert_eq!(m, 29);
    }
}
