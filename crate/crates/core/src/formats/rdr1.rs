use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bytes::{Reader, Writer};
use crate::error::Result;
use crate::scene::{AnnotatedRecording, CameraModel, FrameTruth, RadarConfig, RadarFrame, Scenario};

const MAGIC: &[u8; 4] = b"RDR1";
const VERSION: u32 = 1;
const FORMAT: &str = "RDR1";

/// JSON written next to every RDR1 file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingSidecar {
    pub config: RadarConfig,
    pub camera: CameraModel,
    pub scenario: Option<Scenario>,
    pub seed: u64,
    /// Frame ids and timestamps of the background frames.
    pub background: Vec<FrameTruth>,
    pub truth: Vec<FrameTruth>,
    pub excluded: usize,
}

/// `<path>.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode_recording(config: &RadarConfig, rec: &AnnotatedRecording) -> Result<Vec<u8>> {
    let (k, m, n) = config.dims();
    let mut w = Writer::new(MAGIC, VERSION);
    for v in [k, m, n, rec.background.len(), rec.foreground.len()] {
        w.len(v)?;
    }
    for frame in rec.background.iter().chain(&rec.foreground) {
        if frame.dims() != (k, m, n) {
            return Err(crate::error::shape_err(format!(
                "frame {:?} does not match config {:?}",
                frame.dims(),
                (k, m, n)
            )));
        }
        for z in &frame.samples {
            w.f32(z.re as f32);
            w.f32(z.im as f32);
        }
    }
    Ok(w.buf)
}

/// Frames decoded from an RDR1 payload; ids and timestamps come from the sidecar.
pub fn decode_recording(data: &[u8]) -> Result<(Vec<RadarFrame>, Vec<RadarFrame>)> {
    let mut r = Reader::open(FORMAT, data, MAGIC, VERSION)?;
    let (k, m, n) = (r.len()?, r.len()?, r.len()?);
    let (bg, fg) = (r.len()?, r.len()?);
    let per_frame = k * m * n;
    let mut read = |count: usize| -> Result<Vec<RadarFrame>> {
        (0..count)
            .map(|_| {
                let raw = r.f32s(2 * per_frame)?;
                let mut frame = RadarFrame::zeros(k, m, n);
                for (z, c) in frame.samples.iter_mut().zip(raw.chunks_exact(2)) {
                    *z = Complex64::new(f64::from(c[0]), f64::from(c[1]));
                }
                Ok(frame)
            })
            .collect()
    };
    let background = read(bg)?;
    let foreground = read(fg)?;
    r.finish()?;
    Ok((background, foreground))
}

pub fn write_recording(
    path: &Path,
    rec: &AnnotatedRecording,
    sidecar: &RecordingSidecar,
) -> Result<()> {
    fs::write(path, encode_recording(&sidecar.config, rec)?)?;
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(sidecar)?)?;
    Ok(())
}

pub fn read_recording(path: &Path) -> Result<(AnnotatedRecording, RecordingSidecar)> {
    let sidecar: RecordingSidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    let (mut background, mut foreground) = decode_recording(&fs::read(path)?)?;
    let bad = |what: &str| crate::error::Error::Format {
        format: FORMAT,
        reason: format!("sidecar {what} count disagrees with payload"),
    };
    if background.len() != sidecar.background.len() {
        return Err(bad("background"));
    }
    if foreground.len() != sidecar.truth.len() {
        return Err(bad("truth"));
    }
    if background.first().or(foreground.first()).map(|f| f.dims())
        .is_some_and(|d| d != sidecar.config.dims())
    {
        return Err(bad("dimension"));
    }
    for (f, t) in background.iter_mut().zip(&sidecar.background) {
        f.frame_id = t.frame_id;
        f.timestamp = t.timestamp;
    }
    for (f, t) in foreground.iter_mut().zip(&sidecar.truth) {
        f.frame_id = t.frame_id;
        f.timestamp = t.timestamp;
    }
    let rec = AnnotatedRecording {
        background,
        foreground,
        truth: sidecar.truth.clone(),
        excluded: sidecar.excluded,
    };
    Ok((rec, sidecar))
}
