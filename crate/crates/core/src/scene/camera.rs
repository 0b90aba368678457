use serde::{Deserialize, Serialize};

use super::config::check_front_field;
use crate::error::{Error, Result};

/// Pinhole camera rigidly coupled to the radar, in normalized image units.
///
/// `x_im` grows with azimuth, `y_im` grows downwards (decreasing elevation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal_x: f64,
    pub focal_y: f64,
    pub principal_x: f64,
    pub principal_y: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            focal_x: 0.6,
            focal_y: 0.6,
            principal_x: 0.5,
            principal_y: 0.5,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal_x > 0.0 && self.focal_y > 0.0) {
            return Err(Error::Config("camera focal lengths must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.principal_x) || !(0.0..=1.0).contains(&self.principal_y) {
            return Err(Error::Config("principal point must lie in [0,1]^2".into()));
        }
        Ok(())
    }

    /// Projects a direction to normalized image coordinates.
    ///
    /// Fails with [`Error::OutOfFrame`] when the object would not be visible
    /// to the annotation camera.
    pub fn project(&self, azimuth: f64, elevation: f64) -> Result<(f64, f64)> {
        check_front_field(azimuth, elevation)?;
        let x = self.principal_x + self.focal_x * azimuth.tan();
        let y = self.principal_y - self.focal_y * elevation.tan();
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfFrame { x, y });
        }
        Ok((x, y))
    }

    /// Inverse of [`CameraModel::project`].
    pub fn backproject(&self, x_im: f64, y_im: f64) -> (f64, f64) {
        let azimuth = ((x_im - self.principal_x) / self.focal_x).atan();
        let elevation = ((self.principal_y - y_im) / self.focal_y).atan();
        (azimuth, elevation)
    }
}
