use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::neural::UNetOutputs;
use crate::scene::{RadarConfig, SPEED_OF_LIGHT};

/// A thresholded, connected region of the presence map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Member cells as (k, m), row-major order.
    pub cells: Vec<(usize, usize)>,
    pub k_min: usize,
    pub k_max: usize,
    pub m_min: usize,
    pub m_max: usize,
    /// Mean presence over the region.
    pub confidence: f64,
    /// Presence-weighted centroid in (fractional) bins.
    pub k_centroid: f64,
    pub m_centroid: f64,
    pub range_est: f64,
    pub velocity_est: f64,
    pub x_est: f64,
    pub y_est: f64,
}

/// Range (m) and radial velocity (m/s) at a fractional cell position.
pub fn cell_to_range_velocity(config: &RadarConfig, k: f64, m: f64) -> (f64, f64) {
    let range = k * SPEED_OF_LIGHT / (2.0 * config.bandwidth);
    let half = (config.chirps_per_frame / 2) as f64;
    (range, (m - half) * config.velocity_resolution())
}

/// Label 4-connected components of `mask` (row-major K x M). Components are
/// returned in order of first cell encountered in a row-major scan.
fn components(mask: &[bool], k_bins: usize, m_bins: usize) -> Vec<Vec<(usize, usize)>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut cells = Vec::new();
        while let Some(i) = stack.pop() {
            let (k, m) = (i / m_bins, i % m_bins);
            cells.push((k, m));
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if k > 0 {
                visit(i - m_bins);
            }
            if k + 1 < k_bins {
                visit(i + m_bins);
            }
            if m > 0 {
                visit(i - 1);
            }
            if m + 1 < m_bins {
                visit(i + 1);
            }
        }
        cells.sort_unstable();
        out.push(cells);
    }
    out
}

/// Threshold the presence map at `tau` and turn the largest 4-connected
/// component into at most one detection.
pub fn extract_detections(
    presence: &[f32],
    coord_x: &[f32],
    coord_y: &[f32],
    dims: (usize, usize),
    tau: f64,
    min_cells: usize,
    config: &RadarConfig,
) -> Result<Vec<Detection>> {
    let (k_bins, m_bins) = dims;
    let n = k_bins * m_bins;
    if presence.len() != n || coord_x.len() != n || coord_y.len() != n {
        return Err(shape_err(format!(
            "maps must hold {n} cells, got {} / {} / {}",
            presence.len(),
            coord_x.len(),
            coord_y.len()
        )));
    }
    let mask: Vec<bool> = presence.iter().map(|&p| f64::from(p) > tau).collect();
    // Largest first; ties to smallest k_min, then m_min.
    let best = components(&mask, k_bins, m_bins).into_iter().min_by_key(|c| {
        let k_min = c.iter().map(|p| p.0).min().unwrap_or(0);
        let m_min = c.iter().map(|p| p.1).min().unwrap_or(0);
        (std::cmp::Reverse(c.len()), k_min, m_min)
    });
    let Some(cells) = best else {
        return Ok(Vec::new());
    };
    if cells.len() < min_cells.max(1) {
        return Ok(Vec::new());
    }

    let (mut w, mut kc, mut mc, mut xs, mut ys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(k, m) in &cells {
        let i = k * m_bins + m;
        let p = f64::from(presence[i]);
        w += p;
        kc += p * k as f64;
        mc += p * m as f64;
        xs += p * f64::from(coord_x[i]);
        ys += p * f64::from(coord_y[i]);
    }
    let (k_centroid, m_centroid) = (kc / w, mc / w);
    let (range_est, velocity_est) = cell_to_range_velocity(config, k_centroid, m_centroid);
    Ok(vec![Detection {
        k_min: cells.iter().map(|c| c.0).min().unwrap_or(0),
        k_max: cells.iter().map(|c| c.0).max().unwrap_or(0),
        m_min: cells.iter().map(|c| c.1).min().unwrap_or(0),
        m_max: cells.iter().map(|c| c.1).max().unwrap_or(0),
        confidence: w / cells.len() as f64,
        k_centroid,
        m_centroid,
        range_est,
        velocity_est,
        x_est: xs / w,
        y_est: ys / w,
        cells,
    }])
}

/// [`extract_detections`] on sample `b` of a network output batch.
pub fn detect_outputs(
    outputs: &UNetOutputs<f32>,
    b: usize,
    tau: f64,
    min_cells: usize,
    config: &RadarConfig,
) -> Result<Vec<Detection>> {
    let [batch, _, k, m] = outputs.presence.shape();
    if b >= batch {
        return Err(shape_err(format!("sample {b} of a batch of {batch}")));
    }
    extract_detections(
        outputs.presence.sample(b),
        outputs.coord_x.sample(b),
        outputs.coord_y.sample(b),
        (k, m),
        tau,
        min_cells,
        config,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maps(k: usize, m: usize) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
        (vec![0.0; k * m], vec![0.0; k * m], vec![0.0; k * m])
    }

    #[test]
    fn below_threshold_gives_nothing() {
        let cfg = RadarConfig::with_dims(8, 8);
        let (p, x, y) = maps(8, 8);
        let p: Vec<f32> = p.iter().map(|_| 0.49).collect();
        assert!(extract_detections(&p, &x, &y, (8, 8), 0.5, 1, &cfg).unwrap().is_empty());
    }

    #[test]
    fn block_detection() {
        let cfg = RadarConfig::with_dims(8, 8);
        let (mut p, mut x, y) = maps(8, 8);
        for k in 2..5 {
            for m in 3..6 {
                p[k * 8 + m] = 1.0;
                x[k * 8 + m] = 0.25;
            }
        }
        let d = extract_detections(&p, &x, &y, (8, 8), 0.5, 1, &cfg).unwrap();
        assert_eq!(d.len(), 1);
        let d = &d[0];
        assert_eq!((d.k_min, d.k_max, d.m_min, d.m_max), (2, 4, 3, 5));
        assert_eq!(d.cells.len(), 9);
        assert!((d.x_est - 0.25).abs() < 1e-12);
        assert!((d.k_centroid - 3.0).abs() < 1e-12 && (d.m_centroid - 4.0).abs() < 1e-12);
        assert!((d.confidence - 1.0).abs() < 1e-12);
    }

    #[test]
    fn largest_component_wins() {
        let cfg = RadarConfig::with_dims(8, 8);
        let (mut p, x, y) = maps(8, 8);
        for &(k, m) in &[(0, 0), (0, 1)] {
            p[k * 8 + m] = 0.9;
        }
        for &(k, m) in &[(5, 5), (5, 6), (6, 5), (6, 6), (7, 6)] {
            p[k * 8 + m] = 0.9;
        }
        let d = extract_detections(&p, &x, &y, (8, 8), 0.5, 1, &cfg).unwrap();
        assert_eq!(d[0].cells.len(), 5);
        assert!(extract_detections(&p, &x, &y, (8, 8), 0.5, 6, &cfg).unwrap().is_empty());
    }

    #[test]
    fn equal_sizes_prefer_smallest_k_then_m() {
        let cfg = RadarConfig::with_dims(8, 8);
        let (mut p, x, y) = maps(8, 8);
        for &(k, m) in &[(4, 0), (4, 1), (2, 5), (2, 6), (2, 2), (3, 2)] {
            p[k * 8 + m] = 0.9;
        }
        let d = extract_detections(&p, &x, &y, (8, 8), 0.5, 1, &cfg).unwrap();
        assert_eq!(d[0].cells, vec![(2, 2), (3, 2)]);
    }

    #[test]
    fn diagonal_cells_are_not_connected() {
        let cfg = RadarConfig::with_dims(4, 4);
        let (mut p, x, y) = maps(4, 4);
        p[0] = 0.8;
        p[5] = 0.9;
        let d = extract_detections(&p, &x, &y, (4, 4), 0.5, 1, &cfg).unwrap();
        assert_eq!(d[0].cells, vec![(0, 0)]);
    }

    #[test]
    fn bin_mapping() {
        let cfg = RadarConfig::default();
        let (r, v) = cell_to_range_velocity(&cfg, 0.0, (cfg.chirps_per_frame / 2) as f64);
        assert_eq!((r, v), (0.0, 0.0));
        let (r, _) = cell_to_range_velocity(&cfg, 16.0, 0.0);
        let expected = 16.0 * 299_792_458.0 / 300e6;
        assert!((r - expected).abs() < 1e-9 && (r - 15.99).abs() < 0.01);
    }
}
