//! Binary PGM/PPM images of spectra and detection overlays. Rows are range
//! bins, columns doppler bins.

use crate::detect::Detection;
use crate::error::{shape_err, Result};
use crate::preprocess::RangeDopplerCube;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Scale non-negative values to 0..=255 by the image maximum.
fn quantize(values: &[f64]) -> Vec<u8> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 || !max.is_finite() {
        return vec![0; values.len()];
    }
    values
        .iter()
        .map(|&v| (255.0 * (v / max).clamp(0.0, 1.0)).round() as u8)
        .collect()
}

/// ln(1 + |z|) summed non-coherently over receivers.
pub fn spectrum_image(cube: &RangeDopplerCube) -> GrayImage {
    let (k_len, m_len, n_len) = cube.dims();
    let mut mag = vec![0.0; k_len * m_len];
    for (i, v) in mag.iter_mut().enumerate() {
        let (k, m) = (i / m_len, i % m_len);
        let sum: f64 = (0..n_len).map(|n| cube.get(k, m, n).norm()).sum();
        *v = sum.ln_1p();
    }
    GrayImage {
        width: m_len,
        height: k_len,
        pixels: quantize(&mag),
    }
}

/// A K x M map such as the presence output, linearly scaled.
pub fn map_image(values: &[f32], dims: (usize, usize)) -> Result<GrayImage> {
    if values.len() != dims.0 * dims.1 {
        return Err(shape_err(format!("map of {} values is not {:?}", values.len(), dims)));
    }
    let v: Vec<f64> = values.iter().map(|&x| f64::from(x).max(0.0)).collect();
    Ok(GrayImage {
        width: dims.1,
        height: dims.0,
        pixels: quantize(&v),
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// RGB copy of `img` with each detection's bounding box drawn in pure red.
pub fn overlay_rgb(img: &GrayImage, detections: &[Detection]) -> Result<Vec<[u8; 3]>> {
    let mut rgb: Vec<[u8; 3]> = img.pixels.iter().map(|&g| [g, g, g]).collect();
    for d in detections {
        if d.k_max >= img.height || d.m_max >= img.width {
            return Err(shape_err(format!(
                "box ({}..={}, {}..={}) outside a {}x{} image",
                d.k_min, d.k_max, d.m_min, d.m_max, img.height, img.width
            )));
        }
        for k in d.k_min..=d.k_max {
            for m in d.m_min..=d.m_max {
                if k == d.k_min || k == d.k_max || m == d.m_min || m == d.m_max {
                    rgb[k * img.width + m] = [255, 0, 0];
                }
            }
        }
    }
    Ok(rgb)
}

pub fn encode_ppm(width: usize, height: usize, rgb: &[[u8; 3]]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend(rgb.iter().flatten());
    out
}
