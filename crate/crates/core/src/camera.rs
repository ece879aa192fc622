//! Pinhole camera and pose conventions shared by rendering, track simulation,
//! the depth oracle and the geometric frontend.
//!
//! World frame: x east, y north, z up (metres). Camera frame: x right,
//! y down, z along the optical axis. A [`Pose`] stores the camera centre and
//! the camera-to-world rotation. Pixel `(i, j)` has its centre at `u = i`,
//! `v = j`.

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    /// 752x480 global-shutter sensor with a ~64 degree horizontal field of view.
    pub fn nominal() -> Self {
        Self {
            fx: 600.0,
            fy: 600.0,
            cx: 375.5,
            cy: 239.5,
            width: 752,
            height: 480,
        }
    }

    /// Same optics scaled to a different sensor size.
    pub fn scaled(&self, factor: f64) -> Self {
        let width = ((self.width as f64) * factor).round().max(1.0) as u32;
        let height = ((self.height as f64) * factor).round().max(1.0) as u32;
        Self {
            fx: self.fx * factor,
            fy: self.fy * factor,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid camera model {self:?}")))
        }
    }

    /// Pixel -> unit-depth camera-frame direction (not normalised).
    #[inline]
    pub fn unproject(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    #[inline]
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= self.width as f64 - 1.0 && v <= self.height as f64 - 1.0
    }
}

/// Camera centre plus camera-to-world orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    /// Down-looking camera with image x pointing east and image y pointing south.
    pub fn nadir(position: Point3<f64>) -> Self {
        Self {
            position,
            orientation: nadir_orientation(),
        }
    }

    /// Builds a pose whose optical axis points at `target`. `up_hint` picks the
    /// image "up" direction; it must not be parallel to the viewing direction.
    pub fn look_at(position: Point3<f64>, target: Point3<f64>, up_hint: Vector3<f64>) -> Self {
        let z = (target - position).normalize();
        let x = (-up_hint).cross(&z).normalize();
        let y = z.cross(&x);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
        Self {
            position,
            orientation: UnitQuaternion::from_rotation_matrix(&rot),
        }
    }

    #[inline]
    pub fn world_to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.orientation.inverse_transform_vector(&(p - self.position))
    }

    /// Projects a world point; `None` when it is not in front of the camera.
    #[inline]
    pub fn project(&self, camera: &CameraModel, p: &Point3<f64>) -> Option<[f64; 2]> {
        let c = self.world_to_camera(p);
        if c.z <= 1e-9 {
            return None;
        }
        Some([
            camera.fx * c.x / c.z + camera.cx,
            camera.fy * c.y / c.z + camera.cy,
        ])
    }

    /// Unit world-frame direction of the viewing ray through pixel `(u, v)`.
    #[inline]
    pub fn ray_direction(&self, camera: &CameraModel, u: f64, v: f64) -> Vector3<f64> {
        self.orientation
            .transform_vector(&camera.unproject(u, v))
            .normalize()
    }

    /// World-frame optical axis.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.orientation.transform_vector(&Vector3::z())
    }
}

pub fn nadir_orientation() -> UnitQuaternion<f64> {
    let m = Matrix3::from_columns(&[
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, -1.0, 0.0),
        Vector3::new(0.0, 0.0, -1.0),
    ]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}
