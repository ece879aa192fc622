use nalgebra::Point3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{stream_rng, Terrain};
use crate::camera::{CameraModel, Pose};

const STREAM_ORACLE: u64 = 0x0DE9_7400;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Dense point cloud standing in for stereo reconstruction: for each keyframe,
/// `samples_per_frame` random pixels are cast onto the terrain; each hit keeps
/// its exact xy and gets its surface height plus Gaussian noise of
/// `elev_noise_sigma`. Rays that leave the terrain produce no point.
pub fn sample_depth_oracle(
    terrain: &Terrain,
    keyframes: &[Pose],
    camera: &CameraModel,
    elev_noise_sigma: f64,
    samples_per_frame: usize,
    seed: u64,
) -> PointCloud {
    let mut rng = stream_rng(seed, STREAM_ORACLE);
    let noise = Normal::new(0.0, elev_noise_sigma.max(0.0)).expect("finite sigma");
    let (w, h) = (camera.width as f64, camera.height as f64);
    let mut points = Vec::with_capacity(keyframes.len() * samples_per_frame);
    for pose in keyframes {
        for _ in 0..samples_per_frame {
            let u = rng.gen::<f64>() * w - 0.5;
            let v = rng.gen::<f64>() * h - 0.5;
            let dz = if elev_noise_sigma > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            if let Some(mut p) = terrain.intersect(&pose.position, &pose.ray_direction(camera, u, v)) {
                p.z += dz;
                points.push(p);
            }
        }
    }
    PointCloud { points }
}
