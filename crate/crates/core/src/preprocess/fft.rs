use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::RadarFrame;

/// Taper applied along both axes before the 2D FFT.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    Hann,
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Window::None),
            "hann" => Ok(Window::Hann),
            other => Err(Error::Config(format!("unknown window '{other}'"))),
        }
    }
}

impl Window {
    fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::None => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|i| {
                    let s = (PI * (i as f64 + 0.5) / len as f64).sin();
                    s * s
                })
                .collect(),
        }
    }
}

/// N complex K x M range-doppler spectra, one per receiver.
///
/// Layout is `spectra[(n * K + k) * M + m]`; row `k` is range, column `m`
/// is doppler with zero velocity at `M / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerCube {
    pub range_bins: usize,
    pub doppler_bins: usize,
    pub num_receivers: usize,
    pub spectra: Vec<Complex64>,
    pub normalized: bool,
}

impl RangeDopplerCube {
    pub fn zeros(k: usize, m: usize, n: usize) -> Self {
        Self {
            range_bins: k,
            doppler_bins: m,
            num_receivers: n,
            spectra: vec![Complex64::new(0.0, 0.0); k * m * n],
            normalized: false,
        }
    }

    /// (K, M, N)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.range_bins, self.doppler_bins, self.num_receivers)
    }

    #[inline]
    pub fn index(&self, k: usize, m: usize, n: usize) -> usize {
        (n * self.range_bins + k) * self.doppler_bins + m
    }

    pub fn get(&self, k: usize, m: usize, n: usize) -> Complex64 {
        self.spectra[self.index(k, m, n)]
    }

    /// Values of all receivers at one cell.
    pub fn cell(&self, k: usize, m: usize) -> Vec<Complex64> {
        (0..self.num_receivers).map(|n| self.get(k, m, n)).collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.spectra.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Receiver-0 magnitude argmax as (k, m); first maximum in row-major order.
    pub fn peak_cell(&self, receiver: usize) -> (usize, usize) {
        let plane = self.range_bins * self.doppler_bins;
        let base = receiver * plane;
        let mut best = (0, f64::NEG_INFINITY);
        for (i, z) in self.spectra[base..base + plane].iter().enumerate() {
            let mag = z.norm();
            if mag > best.1 {
                best = (i, mag);
            }
        }
        (best.0 / self.doppler_bins, best.0 % self.doppler_bins)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            spectra: self.spectra.iter().map(|z| z * factor).collect(),
            ..self.clone()
        }
    }
}

/// Per-receiver 2D FFT over (fast time, slow time) with the doppler axis
/// shifted so zero velocity sits at column `M / 2`.
pub fn range_doppler(frame: &RadarFrame, window: Window) -> Result<RangeDopplerCube> {
    if !frame.is_finite() {
        return Err(Error::NonFinite(format!("frame {}", frame.frame_id)));
    }
    let (k_len, m_len, n_len) = frame.dims();
    if frame.samples.len() != k_len * m_len * n_len {
        return Err(Error::Shape(format!(
            "frame has {} samples, expected {}",
            frame.samples.len(),
            k_len * m_len * n_len
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fast_fft = planner.plan_fft_forward(k_len);
    let slow_fft = planner.plan_fft_forward(m_len);
    let fast_win = window.coefficients(k_len);
    let slow_win = window.coefficients(m_len);

    let mut cube = RangeDopplerCube::zeros(k_len, m_len, n_len);
    let mut chirp = vec![Complex64::new(0.0, 0.0); k_len];
    let mut column = vec![Complex64::new(0.0, 0.0); m_len];
    // range spectra for one receiver, [m][k]
    let mut ranged = vec![Complex64::new(0.0, 0.0); k_len * m_len];
    let half = m_len / 2;

    for n in 0..n_len {
        for m in 0..m_len {
            let base = frame.index(0, m, n);
            for (k, out) in chirp.iter_mut().enumerate() {
                *out = frame.samples[base + k] * (fast_win[k] * slow_win[m]);
            }
            fast_fft.process(&mut chirp);
            ranged[m * k_len..(m + 1) * k_len].copy_from_slice(&chirp);
        }
        for k in 0..k_len {
            for (m, out) in column.iter_mut().enumerate() {
                *out = ranged[m * k_len + k];
            }
            slow_fft.process(&mut column);
            let row = cube.index(k, 0, n);
            for (m, z) in column.iter().enumerate() {
                cube.spectra[row + (m + half) % m_len] = *z;
            }
        }
    }
    Ok(cube)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_input_concentrates_in_one_cell() {
        let mut frame = RadarFrame::zeros(16, 16, 1);
        frame.samples.fill(Complex64::new(1.0, 0.0));
        let cube = range_doppler(&frame, Window::None).unwrap();
        for k in 0..16 {
            for m in 0..16 {
                let z = cube.get(k, m, 0);
                if (k, m) == (0, 8) {
                    assert!((z - Complex64::new(256.0, 0.0)).norm() < 1e-9);
                } else {
                    assert!(z.norm() < 1e-9, "cell ({k},{m}) = {z}");
                }
            }
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut frame = RadarFrame::zeros(16, 16, 1);
        frame.samples[3].re = f64::NAN;
        assert!(matches!(
            range_doppler(&frame, Window::None),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn hann_window_keeps_dc_peak_location() {
        let mut frame = RadarFrame::zeros(16, 32, 2);
        frame.samples.fill(Complex64::new(0.5, -0.5));
        let cube = range_doppler(&frame, Window::Hann).unwrap();
        assert_eq!(cube.peak_cell(1), (0, 16));
        assert_eq!("hann".parse::<Window>().unwrap(), Window::Hann);
        assert!("blackman".parse::<Window>().is_err());
    }
}
