//! Paired, preprocessed training samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::neural::Tensor4;
use crate::preprocess::{
    assemble_input, make_targets, phase_normalize, range_doppler, CellAnnotation, InputTensor,
    TargetMaps, Window,
};
use crate::scene::{FrameTruth, RadarFrame};
use crate::training::{SamplePair, SampleSource};

/// Ground truth carried alongside each sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub present: bool,
    pub range: f32,
    pub velocity: f32,
    pub x_im: f32,
    pub y_im: f32,
    pub k: f32,
    pub m: f32,
}

impl SampleMeta {
    pub fn from_truth(truth: &FrameTruth) -> Self {
        Self {
            present: truth.present,
            range: truth.range as f32,
            velocity: truth.velocity as f32,
            x_im: truth.x_im as f32,
            y_im: truth.y_im as f32,
            k: truth.k as f32,
            m: truth.m as f32,
        }
    }

    pub fn cell(&self) -> Option<(usize, usize)> {
        self.present.then(|| (self.k as usize, self.m as usize))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// C x K x M input values.
    pub input: Vec<f32>,
    pub targets: TargetMaps,
    pub meta: SampleMeta,
}

/// A list of samples sharing one (C, K, M) shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub channels: usize,
    pub range_bins: usize,
    pub doppler_bins: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(channels: usize, range_bins: usize, doppler_bins: usize) -> Self {
        Self {
            channels,
            range_bins,
            doppler_bins,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        let plane = self.range_bins * self.doppler_bins;
        if sample.input.len() != self.channels * plane
            || (sample.targets.range_bins, sample.targets.doppler_bins)
                != (self.range_bins, self.doppler_bins)
        {
            return Err(shape_err(format!(
                "sample does not match dataset shape {}x{}x{}",
                self.channels, self.range_bins, self.doppler_bins
            )));
        }
        self.samples.push(sample);
        Ok(())
    }

    /// Batch-of-one input tensor for sample `i`.
    pub fn input(&self, i: usize) -> Tensor4<f32> {
        Tensor4::from_vec(
            [1, self.channels, self.range_bins, self.doppler_bins],
            self.samples[i].input.clone(),
        )
        .expect("sample shape checked on push")
    }

    /// Samples `from..to` stacked into one batch.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor4<f32>> {
        let mut data = Vec::with_capacity(indices.len() * self.samples.first().map_or(0, |s| s.input.len()));
        for &i in indices {
            data.extend_from_slice(&self.samples[i].input);
        }
        Tensor4::from_vec(
            [indices.len(), self.channels, self.range_bins, self.doppler_bins],
            data,
        )
    }

    pub fn positives(&self) -> usize {
        self.samples.iter().filter(|s| s.meta.present).count()
    }
}

/// Preprocessing switches shared by every sample of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    pub window: Window,
    /// Disabling this gives the un-normalized ablation input.
    pub phase_normalize: bool,
    /// Chebyshev radius of the ground-truth support.
    pub disk_radius: usize,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            window: Window::None,
            phase_normalize: true,
            disk_radius: 1,
        }
    }
}

/// 2D FFT, optional phase normalization and tensor assembly for one frame pair.
pub fn preprocess_pair(
    foreground: &RadarFrame,
    background: &RadarFrame,
    options: &PreprocessOptions,
) -> Result<InputTensor> {
    let mut fg = range_doppler(foreground, options.window)?;
    let mut bg = range_doppler(background, options.window)?;
    if options.phase_normalize {
        fg = phase_normalize(&fg)?;
        bg = phase_normalize(&bg)?;
    }
    assemble_input(&fg, &bg)
}

/// Builds samples for `pairs` drawn from one foreground segment and the
/// background segment.
pub fn build_dataset(
    foreground: &[RadarFrame],
    truth: &[FrameTruth],
    background: &[RadarFrame],
    pairs: &[SamplePair],
    options: &PreprocessOptions,
) -> Result<Dataset> {
    if foreground.len() != truth.len() {
        return Err(shape_err(format!(
            "{} foreground frames but {} annotations",
            foreground.len(),
            truth.len()
        )));
    }
    let reference = foreground
        .first()
        .or(background.first())
        .ok_or_else(|| Error::Config("no frames to preprocess".into()))?;
    let (k_len, m_len, n_len) = reference.dims();
    let fetch = |frames: &[RadarFrame], i: usize, what: &str| -> Result<RadarFrame> {
        frames
            .get(i)
            .cloned()
            .ok_or_else(|| Error::Config(format!("{what} index {i} out of range")))
    };
    let samples = pairs
        .par_iter()
        .map(|pair| {
            let bg = fetch(background, pair.background, "background")?;
            let (fg, meta) = match pair.foreground {
                SampleSource::Foreground(i) => {
                    let t = truth[i];
                    (fetch(foreground, i, "foreground")?, SampleMeta::from_truth(&t))
                }
                SampleSource::Background(i) => (fetch(background, i, "background")?, SampleMeta::default()),
            };
            if fg.dims() != (k_len, m_len, n_len) || bg.dims() != (k_len, m_len, n_len) {
                return Err(shape_err("frames of one dataset must share dimensions"));
            }
            let input = preprocess_pair(&fg, &bg, options)?;
            let annotation = meta.present.then(|| CellAnnotation {
                k: meta.k as usize,
                m: meta.m as usize,
                x_im: meta.x_im as f64,
                y_im: meta.y_im as f64,
            });
            let targets = make_targets(annotation.as_ref(), (k_len, m_len), options.disk_radius);
            Ok(Sample {
                input: input.values,
                targets,
                meta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dataset = Dataset::new(4 * n_len, k_len, m_len);
    for s in samples {
        dataset.push(s)?;
    }
    Ok(dataset)
}
