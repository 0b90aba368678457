use num_complex::Complex64;

use super::fft::RangeDopplerCube;
use crate::error::{Error, Result};

/// Rotates one cell's receiver vector so that receiver 0 has zero phase.
///
/// Cells whose reference magnitude is below `eps` carry no phase
/// information and are left untouched.
pub fn normalize_cell(values: &mut [Complex64], eps: f64) {
    let Some(reference) = values.first().copied() else {
        return;
    };
    let magnitude = reference.norm();
    if magnitude < eps || magnitude == 0.0 {
        return;
    }
    let rotation = reference.conj() / magnitude;
    for z in values.iter_mut() {
        *z *= rotation;
    }
    // exact zero imaginary part on the reference
    values[0] = Complex64::new(magnitude, 0.0);
}

/// Applies [`normalize_cell`] to every cell, ignoring the normalized flag.
pub fn normalize_cells(cube: &mut RangeDopplerCube) {
    let eps = 1e-12 * cube.max_magnitude();
    let (k_len, m_len, n_len) = cube.dims();
    let plane = k_len * m_len;
    let mut cell = vec![Complex64::new(0.0, 0.0); n_len];
    for idx in 0..plane {
        for (n, z) in cell.iter_mut().enumerate() {
            *z = cube.spectra[n * plane + idx];
        }
        normalize_cell(&mut cell, eps);
        for (n, z) in cell.iter().enumerate() {
            cube.spectra[n * plane + idx] = *z;
        }
    }
}

/// Per-cell phase normalization referenced to receiver 0.
pub fn phase_normalize(cube: &RangeDopplerCube) -> Result<RangeDopplerCube> {
    if cube.normalized {
        return Err(Error::AlreadyNormalized);
    }
    let mut out = cube.clone();
    normalize_cells(&mut out);
    out.normalized = true;
    Ok(out)
}
