use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// FMCW radar numerology and receiver geometry.
///
/// Receiver positions are (horizontal, vertical) offsets in metres from
/// receiver 0, which is the phase reference and must sit at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    /// Carrier frequency (Hz).
    pub carrier_freq: f64,
    /// Chirp sweep bandwidth (Hz). Sets range resolution c / (2B).
    pub bandwidth: f64,
    /// Duration of one chirp (s).
    pub chirp_duration: f64,
    /// Fast-time samples per chirp (K).
    pub samples_per_chirp: usize,
    /// Chirps per frame (M).
    pub chirps_per_frame: usize,
    pub receiver_positions: Vec<[f64; 2]>,
    /// Standard deviation of the circular complex noise (E|n|^2 = sigma^2).
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        let carrier_freq = 77.0e9;
        let spacing = SPEED_OF_LIGHT / carrier_freq / 2.0;
        Self {
            carrier_freq,
            bandwidth: 150.0e6,
            chirp_duration: 100.0e-6,
            samples_per_chirp: 64,
            chirps_per_frame: 64,
            receiver_positions: grid_positions(4, 2, spacing),
            noise_sigma: 0.05,
            rng_seed: 0,
        }
    }
}

/// Receiver grid with `cols` horizontal and `rows` vertical elements,
/// filled row by row from the origin.
pub fn grid_positions(cols: usize, rows: usize, spacing: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            out.push([c as f64 * spacing, r as f64 * spacing]);
        }
    }
    out
}

impl RadarConfig {
    /// Same numerology as the default with a different spectrum size.
    pub fn with_dims(k: usize, m: usize) -> Self {
        Self {
            samples_per_chirp: k,
            chirps_per_frame: m,
            ..Self::default()
        }
    }

    pub fn num_receivers(&self) -> usize {
        self.receiver_positions.len()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Chirp slope (Hz/s).
    pub fn slope(&self) -> f64 {
        self.bandwidth / self.chirp_duration
    }

    /// Range covered by one fast-time bin (m).
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }

    /// Radial velocity covered by one doppler bin (m/s).
    pub fn velocity_resolution(&self) -> f64 {
        self.wavelength() / (2.0 * self.chirps_per_frame as f64 * self.chirp_duration)
    }

    pub fn max_range(&self) -> f64 {
        self.samples_per_chirp as f64 * self.range_resolution()
    }

    pub fn max_velocity(&self) -> f64 {
        self.wavelength() / (4.0 * self.chirp_duration)
    }

    /// (K, M, N)
    pub fn dims(&self) -> (usize, usize, usize) {
        (
            self.samples_per_chirp,
            self.chirps_per_frame,
            self.num_receivers(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("samples_per_chirp", self.samples_per_chirp),
            ("chirps_per_frame", self.chirps_per_frame),
        ] {
            if !v.is_power_of_two() || v < 16 {
                return Err(Error::Config(format!(
                    "{name} must be a power of two >= 16, got {v}"
                )));
            }
        }
        if self.num_receivers() < 2 {
            return Err(Error::Config("at least two receivers are required".into()));
        }
        if self.receiver_positions[0] != [0.0, 0.0] {
            return Err(Error::Config("receiver 0 must sit at the origin".into()));
        }
        if !(self.bandwidth > 0.0 && self.chirp_duration > 0.0) {
            return Err(Error::Config(
                "bandwidth and chirp duration must be positive".into(),
            ));
        }
        if !(self.carrier_freq > self.bandwidth) {
            return Err(Error::Config(
                "carrier frequency must exceed the bandwidth".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be finite and >= 0".into()));
        }
        if self
            .receiver_positions
            .iter()
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::Config("receiver positions must be finite".into()));
        }
        Ok(())
    }
}

/// Kinematic state of the single object of interest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    /// Range (m).
    pub range: f64,
    /// Radial velocity (m/s), positive when receding.
    pub radial_velocity: f64,
    /// Azimuth (rad), positive to the right.
    pub azimuth: f64,
    /// Elevation (rad), positive upwards.
    pub elevation: f64,
    pub amplitude: f64,
}

impl ObjectState {
    pub fn validate(&self, config: &RadarConfig) -> Result<()> {
        if !(self.range > 0.0 && self.range < config.max_range()) {
            return Err(Error::Config(format!(
                "range {} outside (0, {})",
                self.range,
                config.max_range()
            )));
        }
        if !(self.radial_velocity.abs() < config.max_velocity()) {
            return Err(Error::Config(format!(
                "radial velocity {} outside +/-{}",
                self.radial_velocity,
                config.max_velocity()
            )));
        }
        check_front_field(self.azimuth, self.elevation)?;
        if !self.amplitude.is_finite() {
            return Err(Error::Config("amplitude must be finite".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_front_field(azimuth: f64, elevation: f64) -> Result<()> {
    use std::f64::consts::FRAC_PI_2;
    if !(azimuth.abs() < FRAC_PI_2) || !(elevation.abs() < FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "azimuth {azimuth} / elevation {elevation} not inside (-pi/2, pi/2)"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = RadarConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.dims(), (64, 64, 8));
        assert!((cfg.range_resolution() - 0.999_308).abs() < 1e-5);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let cfg = RadarConfig::with_dims(48, 64);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = RadarConfig::with_dims(8, 64);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_offset_reference_receiver() {
        let mut cfg = RadarConfig::default();
        cfg.receiver_positions[0] = [0.001, 0.0];
        assert!(cfg.validate().is_err());
        cfg.receiver_positions.truncate(1);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn object_outside_unambiguous_region() {
        let cfg = RadarConfig::default();
        let mut obj = ObjectState {
            range: 10.0,
            radial_velocity: 1.0,
            azimuth: 0.1,
            elevation: 0.0,
            amplitude: 1.0,
        };
        obj.validate(&cfg).unwrap();
        obj.range = cfg.max_range() + 1.0;
        assert!(obj.validate(&cfg).is_err());
        obj.range = 10.0;
        obj.radial_velocity = cfg.max_velocity();
        assert!(obj.validate(&cfg).is_err());
        obj.radial_velocity = 0.0;
        obj.azimuth = 1.6;
        assert!(matches!(obj.validate(&cfg), Err(Error::Domain(_))));
    }
}
