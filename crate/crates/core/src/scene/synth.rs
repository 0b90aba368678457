use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{check_front_field, ObjectState, RadarConfig};
use crate::error::{Error, Result};

/// Per-receiver far-field phase offsets for a return from (azimuth, elevation).
///
/// Receiver 0 sits at the origin so its phase is always zero.
pub fn steering_phases(config: &RadarConfig, azimuth: f64, elevation: f64) -> Result<Vec<f64>> {
    check_front_field(azimuth, elevation)?;
    let wavenumber = TAU / config.wavelength();
    let horizontal = elevation.cos() * azimuth.sin();
    let vertical = elevation.sin();
    Ok(config
        .receiver_positions
        .iter()
        .map(|p| wavenumber * (p[0] * horizontal + p[1] * vertical))
        .collect())
}

/// Distribution parameters for static environment scatterers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterSpec {
    pub num_scatterers: usize,
    /// Ranges are drawn uniformly from this interval (m).
    pub range: (f64, f64),
    /// Amplitudes are drawn log-uniformly from this interval.
    pub amplitude: (f64, f64),
    /// Azimuths are drawn uniformly from +/- this bound (rad).
    pub azimuth_max: f64,
    /// Elevations are drawn uniformly from this interval (rad).
    pub elevation: (f64, f64),
}

impl Default for ClutterSpec {
    fn default() -> Self {
        Self {
            num_scatterers: 24,
            range: (2.0, 30.0),
            amplitude: (0.004, 0.04),
            azimuth_max: 1.0,
            elevation: (-0.35, 0.1),
        }
    }
}

impl ClutterSpec {
    pub fn none() -> Self {
        Self {
            num_scatterers: 0,
            ..Self::default()
        }
    }
}

/// One static point reflector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub amplitude: f64,
}

/// A realized static environment. The same model is reused for every frame
/// of a scene so background and foreground share identical clutter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClutterModel {
    pub scatterers: Vec<Scatterer>,
}

impl ClutterModel {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Draws scatterers from `spec`; ranges are capped below the unambiguous range.
    pub fn generate(config: &RadarConfig, spec: &ClutterSpec, seed: u64) -> Result<Self> {
        let (r0, r1) = spec.range;
        let (a0, a1) = spec.amplitude;
        let (e0, e1) = spec.elevation;
        if spec.num_scatterers > 0
            && !(r0 > 0.0 && r1 >= r0 && a0 > 0.0 && a1 >= a0 && e1 >= e0 && spec.azimuth_max >= 0.0)
        {
            return Err(Error::Config(format!("invalid clutter spec {spec:?}")));
        }
        let r1 = r1.min(config.max_range() * 0.98);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scatterers = (0..spec.num_scatterers)
            .map(|_| {
                let range = r0 + (r1 - r0) * rng.random::<f64>();
                let azimuth = spec.azimuth_max * (2.0 * rng.random::<f64>() - 1.0);
                let elevation = e0 + (e1 - e0) * rng.random::<f64>();
                let amplitude = (a0.ln() + (a1.ln() - a0.ln()) * rng.random::<f64>()).exp();
                Scatterer {
                    range,
                    azimuth,
                    elevation,
                    amplitude,
                }
            })
            .collect::<Vec<_>>();
        for s in &scatterers {
            check_front_field(s.azimuth, s.elevation)?;
        }
        Ok(Self { scatterers })
    }
}

/// Raw complex baseband samples for one frame.
///
/// Layout is receiver-major, then chirp, then fast-time sample:
/// `samples[(n * M + m) * K + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarFrame {
    pub samples_per_chirp: usize,
    pub chirps_per_frame: usize,
    pub num_receivers: usize,
    pub samples: Vec<Complex64>,
    pub frame_id: u64,
    pub timestamp: f64,
}

impl RadarFrame {
    pub fn zeros(k: usize, m: usize, n: usize) -> Self {
        Self {
            samples_per_chirp: k,
            chirps_per_frame: m,
            num_receivers: n,
            samples: vec![Complex64::new(0.0, 0.0); k * m * n],
            frame_id: 0,
            timestamp: 0.0,
        }
    }

    /// (K, M, N)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.samples_per_chirp, self.chirps_per_frame, self.num_receivers)
    }

    #[inline]
    pub fn index(&self, k: usize, m: usize, n: usize) -> usize {
        (n * self.chirps_per_frame + m) * self.samples_per_chirp + k
    }

    pub fn get(&self, k: usize, m: usize, n: usize) -> Complex64 {
        self.samples[self.index(k, m, n)]
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// A point return as seen by the synthesizer.
struct Return {
    range: f64,
    velocity: f64,
    azimuth: f64,
    elevation: f64,
    amplitude: f64,
}

fn add_return(frame: &mut RadarFrame, config: &RadarConfig, ret: &Return) -> Result<()> {
    let (k_len, m_len, _) = config.dims();
    let beat = 2.0 * ret.range * config.slope() / crate::scene::SPEED_OF_LIGHT;
    let doppler = 2.0 * ret.velocity * config.carrier_freq / crate::scene::SPEED_OF_LIGHT;
    let sample_period = config.chirp_duration / k_len as f64;
    // round-trip carrier phase; common to all receivers
    let carrier_phase = (4.0 * PI * ret.range / config.wavelength()).rem_euclid(TAU);

    let fast: Vec<Complex64> = (0..k_len)
        .map(|k| Complex64::from_polar(1.0, TAU * beat * k as f64 * sample_period))
        .collect();
    let slow: Vec<Complex64> = (0..m_len)
        .map(|m| Complex64::from_polar(1.0, TAU * doppler * m as f64 * config.chirp_duration))
        .collect();
    let steering = steering_phases(config, ret.azimuth, ret.elevation)?;

    for (n, psi) in steering.iter().enumerate() {
        let rx = Complex64::from_polar(ret.amplitude, carrier_phase + psi);
        for (m, s) in slow.iter().enumerate() {
            let chirp_gain = rx * s;
            let base = (n * m_len + m) * k_len;
            for (out, f) in frame.samples[base..base + k_len].iter_mut().zip(&fast) {
                *out += chirp_gain * f;
            }
        }
    }
    Ok(())
}

/// Synthesizes one dechirped multi-receiver frame.
///
/// Every scatterer contributes
/// `a * exp(j(2pi(f_b k T/K + f_d m T) + 4pi R / lambda + psi_n))`, followed by
/// circular complex Gaussian noise with `E|n|^2 = noise_sigma^2`.
pub fn synthesize_frame(
    config: &RadarConfig,
    object: Option<&ObjectState>,
    clutter: &ClutterModel,
    seed: u64,
) -> Result<RadarFrame> {
    config.validate()?;
    let (k_len, m_len, n_len) = config.dims();
    let mut frame = RadarFrame::zeros(k_len, m_len, n_len);

    if let Some(obj) = object {
        obj.validate(config)?;
        add_return(
            &mut frame,
            config,
            &Return {
                range: obj.range,
                velocity: obj.radial_velocity,
                azimuth: obj.azimuth,
                elevation: obj.elevation,
                amplitude: obj.amplitude,
            },
        )?;
    }
    for s in &clutter.scatterers {
        add_return(
            &mut frame,
            config,
            &Return {
                range: s.range,
                velocity: 0.0,
                azimuth: s.azimuth,
                elevation: s.elevation,
                amplitude: s.amplitude,
            },
        )?;
    }

    if config.noise_sigma > 0.0 {
        let component = Normal::new(0.0, config.noise_sigma / 2f64.sqrt())
            .map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for z in frame.samples.iter_mut() {
            z.re += component.sample(&mut rng);
            z.im += component.sample(&mut rng);
        }
    }
    Ok(frame)
}

/// Derives an independent sub-seed for stream `stream`, item `index`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(seed) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SPEED_OF_LIGHT;
    use std::f64::consts::FRAC_PI_6;

    #[test]
    fn boresight_has_zero_phase() {
        let cfg = RadarConfig::default();
        let psi = steering_phases(&cfg, 0.0, 0.0).unwrap();
        assert!(psi.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn half_wavelength_receiver_at_thirty_degrees() {
        let mut cfg = RadarConfig::default();
        let lambda = cfg.wavelength();
        cfg.receiver_positions = vec![[0.0, 0.0], [lambda / 2.0, 0.0]];
        let psi = steering_phases(&cfg, FRAC_PI_6, 0.0).unwrap();
        assert!((psi[1] - PI / 2.0).abs() < 1e-12);

        // brute-force path difference: far source direction dotted with position
        let dir = [FRAC_PI_6.sin(), 0.0];
        let path = lambda / 2.0 * dir[0] + 0.0 * dir[1];
        assert!((TAU * path / lambda - psi[1]).abs() < 1e-12);
    }

    #[test]
    fn steering_is_odd_in_azimuth() {
        let cfg = RadarConfig::default();
        let pos = steering_phases(&cfg, 0.4, 0.0).unwrap();
        let neg = steering_phases(&cfg, -0.4, 0.0).unwrap();
        for (p, q) in pos.iter().zip(&neg) {
            assert!((p + q).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_rejects_back_field() {
        let cfg = RadarConfig::default();
        assert!(matches!(steering_phases(&cfg, 2.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn empty_scene_is_silent() {
        let mut cfg = RadarConfig::with_dims(16, 16);
        cfg.noise_sigma = 0.0;
        let frame = synthesize_frame(&cfg, None, &ClutterModel::empty(), 1).unwrap();
        assert!(frame.samples.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn noise_is_seeded() {
        let cfg = RadarConfig::with_dims(16, 16);
        let a = synthesize_frame(&cfg, None, &ClutterModel::empty(), 5).unwrap();
        let b = synthesize_frame(&cfg, None, &ClutterModel::empty(), 5).unwrap();
        let c = synthesize_frame(&cfg, None, &ClutterModel::empty(), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let power: f64 =
            a.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / a.samples.len() as f64;
        let expected = cfg.noise_sigma * cfg.noise_sigma;
        assert!((power / expected - 1.0).abs() < 0.1, "power {power}");
    }

    fn dft_peak_bin(samples: &[Complex64]) -> usize {
        let k_len = samples.len();
        (0..k_len)
            .map(|bin| {
                let acc: Complex64 = samples
                    .iter()
                    .enumerate()
                    .map(|(k, z)| {
                        z * Complex64::from_polar(1.0, -TAU * (bin * k) as f64 / k_len as f64)
                    })
                    .sum();
                (bin, acc.norm())
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    }

    #[test]
    fn fast_time_peak_matches_range_bin() {
        let mut cfg = RadarConfig::default();
        cfg.noise_sigma = 0.0;
        for range in [4.3, 10.0, 16.0, 27.6] {
            let obj = ObjectState {
                range,
                radial_velocity: 1.5,
                azimuth: 0.2,
                elevation: -0.05,
                amplitude: 1.0,
            };
            let frame = synthesize_frame(&cfg, Some(&obj), &ClutterModel::empty(), 0).unwrap();
            let chirp = &frame.samples[..cfg.samples_per_chirp];
            let expected = (range / (SPEED_OF_LIGHT / (2.0 * cfg.bandwidth))).round() as usize;
            assert_eq!(dft_peak_bin(chirp), expected, "range {range}");
        }
    }

    #[test]
    fn sixteen_metres_lands_in_bin_sixteen() {
        let mut cfg = RadarConfig::default();
        cfg.noise_sigma = 0.0;
        let obj = ObjectState {
            range: 16.0,
            radial_velocity: 0.0,
            azimuth: 0.0,
            elevation: 0.0,
            amplitude: 1.0,
        };
        let frame = synthesize_frame(&cfg, Some(&obj), &ClutterModel::empty(), 0).unwrap();
        assert_eq!(dft_peak_bin(&frame.samples[..64]), 16);
    }

    #[test]
    fn clutter_generation_is_deterministic() {
        let cfg = RadarConfig::default();
        let spec = ClutterSpec::default();
        let a = ClutterModel::generate(&cfg, &spec, 3).unwrap();
        let b = ClutterModel::generate(&cfg, &spec, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scatterers.len(), spec.num_scatterers);
        assert!(a.scatterers.iter().all(|s| s.range < cfg.max_range()));
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, 0, 0);
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(2, 0, 0));
        assert_eq!(a, derive_seed(1, 0, 0));
    }
}
