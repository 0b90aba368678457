use super::fft::RangeDopplerCube;
use crate::error::{Error, Result};

/// Smallest admissible scale factor.
pub const SCALE_FLOOR: f64 = 1e-12;

/// Real-valued network input of shape C x K x M with C = 4N.
///
/// Channel `2n` / `2n + 1` hold the real / imaginary part of foreground
/// receiver `n`; channels `2N + 2n` / `2N + 2n + 1` hold the same for the
/// background. Everything is divided by `scale_factor`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor {
    pub channels: usize,
    pub range_bins: usize,
    pub doppler_bins: usize,
    pub values: Vec<f32>,
    pub scale_factor: f64,
}

impl InputTensor {
    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.range_bins * self.doppler_bins;
        &self.values[c * plane..(c + 1) * plane]
    }
}

/// Stacks foreground and background spectra into one scaled input tensor.
///
/// The scale is the largest magnitude over both cubes (floored at
/// [`SCALE_FLOOR`]) so every value of the tensor lies in [-1, 1].
pub fn assemble_input(fg: &RangeDopplerCube, bg: &RangeDopplerCube) -> Result<InputTensor> {
    if fg.dims() != bg.dims() {
        return Err(Error::Shape(format!(
            "foreground {:?} vs background {:?}",
            fg.dims(),
            bg.dims()
        )));
    }
    if fg.normalized != bg.normalized {
        return Err(Error::Config(
            "foreground and background must share the same normalization state".into(),
        ));
    }
    let (k_len, m_len, n_len) = fg.dims();
    let plane = k_len * m_len;
    let scale_factor = fg
        .max_magnitude()
        .max(bg.max_magnitude())
        .max(SCALE_FLOOR);
    let mut values = vec![0f32; 4 * n_len * plane];
    for (offset, cube) in [(0, fg), (2 * n_len, bg)] {
        for n in 0..n_len {
            let re = (offset + 2 * n) * plane;
            let im = re + plane;
            for (i, z) in cube.spectra[n * plane..(n + 1) * plane].iter().enumerate() {
                values[re + i] = (z.re / scale_factor) as f32;
                values[im + i] = (z.im / scale_factor) as f32;
            }
        }
    }
    Ok(InputTensor {
        channels: 4 * n_len,
        range_bins: k_len,
        doppler_bins: m_len,
        values,
        scale_factor,
    })
}
