use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::timing::StageTimer;
use crate::approach_planner::{plan_approach, PlanReport, WindEstimate};
use crate::camera::Pose;
use crate::error::{Error, Result};
use crate::geom3d::{select_keyframes, FeatureTrack};
use crate::region_manager::{RegionSnapshot, RoiRecord};
use crate::scene::{sample_depth_oracle, sub_seed, SceneBundle};
use crate::terrain_map::{fuse_grass_mask, rasterize_elevation, GridStack};

pub const STAGE_KEYFRAMES: &str = "keyframes";
pub const STAGE_CLOUD: &str = "point_cloud";
pub const STAGE_LAYERS: &str = "terrain_layers";
pub const STAGE_PLANNING: &str = "planning";
pub const STAGE_BACKEND: &str = "backend_total";

const STREAM_CLOUD: u64 = 0xC10D_0000;

/// Frames used for the dense reconstruction of `roi`: keyframes of the track
/// graph that see the region centre together with the frames the region was
/// observed in, nearest first, thinned so that any two are at least the
/// keyframe baseline apart, at most `max_keyframes` of them.
pub fn roi_keyframes(
    roi: &RoiRecord,
    tracks: &[FeatureTrack],
    poses: &[Pose],
    cfg: &PipelineConfig,
    camera: &crate::camera::CameraModel,
) -> Vec<usize> {
    let sees = |f: usize| {
        poses[f]
            .project(camera, &roi.centroid)
            .is_some_and(|[u, v]| camera.contains(u, v))
    };
    let horizontal = |f: usize| {
        let p = poses[f].position;
        (p.x - roi.centroid.x).hypot(p.y - roi.centroid.y)
    };
    let mut cands: Vec<usize> = select_keyframes(tracks, poses, cfg.backend.keyframe_min_baseline)
        .into_iter()
        .filter(|&f| sees(f))
        .chain(roi.fine_masks.iter().map(|m| m.frame_id).filter(|&f| f < poses.len()))
        .collect();
    cands.sort_by(|&a, &b| horizontal(a).total_cmp(&horizontal(b)).then(a.cmp(&b)));
    cands.dedup();
    let mut kf: Vec<usize> = Vec::new();
    for f in cands {
        if kf.len() == cfg.backend.max_keyframes {
            break;
        }
        let far = kf
            .iter()
            .all(|&k| (poses[k].position - poses[f].position).norm() >= cfg.backend.keyframe_min_baseline);
        if far {
            kf.push(f);
        }
    }
    kf.sort_unstable();
    kf
}

/// Wind over the log entries up to `frame_id` near the region centre. When no
/// entry lies within the association radius the nearest one is used.
pub fn roi_wind(scene: &SceneBundle, frame_id: usize, center: [f64; 2], cfg: &PipelineConfig) -> Result<WindEstimate> {
    let mut est = WindEstimate::new(cfg.wind)?;
    let entries = &scene.log.entries[..=frame_id.min(scene.log.len().saturating_sub(1))];
    for e in entries {
        est = est.update([e.wind.x, e.wind.y], center, [e.pose.position.x, e.pose.position.y]);
    }
    if est.n_measurements == 0 {
        let nearest = entries
            .iter()
            .min_by(|a, b| {
                let da = (a.pose.position.x - center[0]).hypot(a.pose.position.y - center[1]);
                let db = (b.pose.position.x - center[0]).hypot(b.pose.position.y - center[1]);
                da.total_cmp(&db)
            })
            .ok_or_else(|| Error::InvalidInput("empty flight log".into()))?;
        est = est.update([nearest.wind.x, nearest.wind.y], center, center);
    }
    Ok(est)
}

/// Result of one backend cycle for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendRun {
    pub frame_id: usize,
    pub roi_id: u64,
    pub keyframes: Vec<usize>,
    pub cloud_points: usize,
    pub wind: WindEstimate,
    pub stack: GridStack,
    /// `Err` holds the reason when planning could not start (e.g. wind too strong).
    pub plan: std::result::Result<PlanReport, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRunSummary {
    pub frame_id: usize,
    pub roi_id: u64,
    pub keyframes: Vec<usize>,
    pub cloud_points: usize,
    pub wind_speed: f64,
    pub feasible: bool,
    pub candidates_evaluated: usize,
    pub td_cell: Option<[usize; 2]>,
    pub error: Option<String>,
}

impl BackendRun {
    pub fn summary(&self) -> BackendRunSummary {
        let (feasible, evaluated, td, error) = match &self.plan {
            Ok(r) => (r.feasible(), r.candidates_evaluated, r.plan.as_ref().map(|p| p.td_cell), None),
            Err(e) => (false, 0, None, Some(e.clone())),
        };
        BackendRunSummary {
            frame_id: self.frame_id,
            roi_id: self.roi_id,
            keyframes: self.keyframes.clone(),
            cloud_points: self.cloud_points,
            wind_speed: self.wind.speed(),
            feasible,
            candidates_evaluated: evaluated,
            td_cell: td,
            error,
        }
    }
}

/// Fine analysis of the most promising regions of a store snapshot. `tracks`
/// and `poses` are the frontend's tracks and logged poses up to the snapshot.
pub fn run_backend(
    snapshot: &RegionSnapshot,
    scene: &SceneBundle,
    tracks: &[FeatureTrack],
    poses: &[Pose],
    cfg: &PipelineConfig,
    timer: &mut StageTimer,
) -> Result<Vec<BackendRun>> {
    let t_all = std::time::Instant::now();
    let mut runs = Vec::new();
    let frame_id = snapshot.frame_id;
    for roi in snapshot.best_candidates(cfg.backend.n_candidates) {
        let keyframes = timer.time(STAGE_KEYFRAMES, || roi_keyframes(roi, tracks, poses, cfg, &scene.camera));
        let cloud = timer.time(STAGE_CLOUD, || {
            let kf_poses: Vec<Pose> = keyframes.iter().map(|&f| scene.true_poses[f]).collect();
            sample_depth_oracle(
                &scene.terrain,
                &kf_poses,
                &scene.camera,
                cfg.backend.cloud_noise_sigma,
                cfg.backend.cloud_samples_per_frame,
                sub_seed(cfg.seed, STREAM_CLOUD ^ frame_id as u64 ^ (roi.roi_id << 32)),
            )
        });
        let stack = timer.time(STAGE_LAYERS, || -> Result<GridStack> {
            let tm = &cfg.terrain;
            let geometry = tm.geometry([roi.centroid.x, roi.centroid.y]);
            let elevation = rasterize_elevation(&cloud.points, &geometry, tm.idw_radius_cells * tm.resolution, tm.idw_power);
            let grass = fuse_grass_mask(roi, poses, &scene.camera, &geometry, &elevation, roi.centroid.z)?;
            Ok(GridStack::from_layers(geometry, elevation, grass, tm))
        })?;
        let wind = roi_wind(scene, frame_id, [roi.centroid.x, roi.centroid.y], cfg)?;
        let plan = timer.time(STAGE_PLANNING, || plan_approach(&stack, &cfg.approach, &wind, cfg.backend.max_plan_candidates));
        let plan = match plan {
            Ok(r) => Ok(r),
            Err(e @ Error::InfeasibleWind { .. }) => Err(e.to_string()),
            Err(e) => return Err(e),
        };
        runs.push(BackendRun {
            frame_id,
            roi_id: roi.roi_id,
            keyframes,
            cloud_points: cloud.len(),
            wind,
            stack,
            plan,
        });
    }
    timer.record(STAGE_BACKEND, t_all.elapsed().as_secs_f64() * 1e3);
    Ok(runs)
}
