//! Multi-view geometry for the frontend: track triangulation, coarse depth
//! from nearby tracks, ground projection, planar polygon helpers and keyframe
//! selection.

mod depth;
mod keyframes;
pub mod polygon;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraModel, Pose};
use crate::error::{Error, Result};

pub use depth::{coarse_depth, DepthQueryConfig, TrackStore};
pub use keyframes::{connection_count, select_keyframes, KEYFRAME_CONNECTIVITY};
pub use polygon::{convex_hull, min_area_rect, signed_area, winding_inside, winding_number};

/// Baseline-to-depth ratio below which a triangulation is considered degenerate.
pub const MIN_BASELINE_RATIO: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackObservation {
    pub frame_id: usize,
    pub u: f64,
    pub v: f64,
}

/// Pixel observations of one landmark across frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTrack {
    pub track_id: u64,
    /// Strictly increasing frame ids.
    pub observations: Vec<TrackObservation>,
    /// Cached triangulation, if computed and non-degenerate.
    #[serde(skip)]
    pub triangulated: Option<Point3<f64>>,
}

impl FeatureTrack {
    pub fn new(track_id: u64) -> Self {
        Self {
            track_id,
            observations: Vec::new(),
            triangulated: None,
        }
    }

    pub fn observation_in(&self, frame_id: usize) -> Option<&TrackObservation> {
        self.observations
            .binary_search_by_key(&frame_id, |o| o.frame_id)
            .ok()
            .map(|i| &self.observations[i])
    }

    pub fn is_well_formed(&self) -> bool {
        !self.observations.is_empty()
            && self
                .observations
                .windows(2)
                .all(|w| w[0].frame_id < w[1].frame_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    pub point: Point3<f64>,
    /// Root-mean-square distance of the point to the observation rays, metres.
    pub residual: f64,
}

/// Midpoint triangulation over observation rays: the point minimising the sum
/// of squared perpendicular distances to all rays.
pub fn triangulate_rays(origins: &[Point3<f64>], dirs: &[Vector3<f64>]) -> Result<Triangulation> {
    if origins.len() < 2 {
        return Err(Error::Degenerate("triangulation needs two rays".into()));
    }
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for (o, d) in origins.iter().zip(dirs) {
        let p = Matrix3::identity() - d * d.transpose();
        a += p;
        b += p * o.coords;
    }
    let x = a
        .lu()
        .solve(&b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Degenerate("parallel observation rays".into()))?;
    let point = Point3::from(x);
    let centre = origins.iter().fold(Vector3::zeros(), |s, o| s + o.coords) / origins.len() as f64;
    let baseline = origins
        .iter()
        .flat_map(|a| origins.iter().map(move |b| (a - b).norm()))
        .fold(0.0, f64::max);
    let depth = (point.coords - centre).norm();
    if !(baseline >= MIN_BASELINE_RATIO * depth) || baseline == 0.0 {
        return Err(Error::Degenerate(format!(
            "baseline {baseline:.3} m too short for depth {depth:.1} m"
        )));
    }
    let ss: f64 = origins
        .iter()
        .zip(dirs)
        .map(|(o, d)| {
            let v = point - o;
            (v - d * d.dot(&v)).norm_squared()
        })
        .sum();
    Ok(Triangulation {
        point,
        residual: (ss / origins.len() as f64).sqrt(),
    })
}

/// Triangulates a track from the poses indexed by frame id.
pub fn triangulate(track: &FeatureTrack, poses: &[Pose], camera: &CameraModel) -> Result<Triangulation> {
    triangulate_prefix(track, track.observations.len(), poses, camera)
}

/// Triangulates using only the first `count` observations of the track.
pub fn triangulate_prefix(
    track: &FeatureTrack,
    count: usize,
    poses: &[Pose],
    camera: &CameraModel,
) -> Result<Triangulation> {
    let mut origins = Vec::with_capacity(count);
    let mut dirs = Vec::with_capacity(count);
    for o in track.observations.iter().take(count) {
        let pose = poses.get(o.frame_id).ok_or_else(|| {
            Error::InvalidInput(format!("track {} references unknown frame {}", track.track_id, o.frame_id))
        })?;
        origins.push(pose.position);
        dirs.push(pose.ray_direction(camera, o.u, o.v));
    }
    triangulate_rays(&origins, &dirs)
}

/// Intersects the viewing ray of pixel `px` with the plane `z = ground_z`.
pub fn project_to_ground(px: [f64; 2], pose: &Pose, camera: &CameraModel, ground_z: f64) -> Result<Point3<f64>> {
    let d = pose.ray_direction(camera, px[0], px[1]);
    if d.z.abs() < 1e-12 {
        return Err(Error::Degenerate("viewing ray parallel to ground plane".into()));
    }
    let t = (ground_z - pose.position.z) / d.z;
    if t <= 0.0 {
        return Err(Error::Degenerate("ground plane behind camera".into()));
    }
    Ok(pose.position + d * t)
}
