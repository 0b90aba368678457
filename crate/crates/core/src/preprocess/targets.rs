/// Object annotation needed to build the target maps of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellAnnotation {
    pub k: usize,
    pub m: usize,
    pub x_im: f64,
    pub y_im: f64,
}

/// Ground-truth presence and coordinate maps for one sample (K x M, row-major).
///
/// The mask is the support of `presence`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMaps {
    pub range_bins: usize,
    pub doppler_bins: usize,
    pub presence: Vec<f32>,
    pub coord_x: Vec<f32>,
    pub coord_y: Vec<f32>,
}

impl TargetMaps {
    pub fn empty(k: usize, m: usize) -> Self {
        Self {
            range_bins: k,
            doppler_bins: m,
            presence: vec![0.0; k * m],
            coord_x: vec![0.0; k * m],
            coord_y: vec![0.0; k * m],
        }
    }

    pub fn mask(&self) -> Vec<bool> {
        self.presence.iter().map(|p| *p > 0.5).collect()
    }

    pub fn mask_cells(&self) -> usize {
        self.presence.iter().filter(|p| **p > 0.5).count()
    }

    pub fn is_empty(&self) -> bool {
        self.mask_cells() == 0
    }
}

/// Cells within Chebyshev distance `radius` of `(k, m)`, clipped to the grid.
pub fn disk_cells(k: usize, m: usize, dims: (usize, usize), radius: usize) -> Vec<(usize, usize)> {
    let (k_len, m_len) = dims;
    let k_lo = k.saturating_sub(radius);
    let k_hi = (k + radius).min(k_len.saturating_sub(1));
    let m_lo = m.saturating_sub(radius);
    let m_hi = (m + radius).min(m_len.saturating_sub(1));
    let mut out = Vec::new();
    for kk in k_lo..=k_hi {
        for mm in m_lo..=m_hi {
            out.push((kk, mm));
        }
    }
    out
}

/// Builds the target maps for one sample; `None` yields empty maps.
pub fn make_targets(
    annotation: Option<&CellAnnotation>,
    dims: (usize, usize),
    radius: usize,
) -> TargetMaps {
    let (k_len, m_len) = dims;
    let mut maps = TargetMaps::empty(k_len, m_len);
    if let Some(a) = annotation {
        if a.k >= k_len || a.m >= m_len {
            return maps;
        }
        for (k, m) in disk_cells(a.k, a.m, dims, radius) {
            let i = k * m_len + m;
            maps.presence[i] = 1.0;
            maps.coord_x[i] = a.x_im as f32;
            maps.coord_y[i] = a.y_im as f32;
        }
    }
    maps
}
