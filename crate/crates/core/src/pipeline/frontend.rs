use std::sync::Arc;

use image::RgbImage;
use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::timing::StageTimer;
use crate::camera::{CameraModel, Pose};
use crate::classifier::{extract_features_with, gray_f32, ForestModel};
use crate::error::Result;
use crate::geom3d::{coarse_depth, min_area_rect, project_to_ground, FeatureTrack, TrackObservation, TrackStore};
use crate::imgproc::{GaborBank, GaborFft, RegionMask, Window};
use crate::region_manager::{rect_fully_visible, RegionObservation, RegionStore, StoreDelta};
use crate::segmenter::segment;

/// Per-frame stage names.
pub const STAGE_DEPTH: &str = "depth";
pub const STAGE_SEGMENTATION: &str = "segmentation";
pub const STAGE_CLASSIFICATION: &str = "classification";
pub const STAGE_REGION_MANAGER: &str = "region_manager";
pub const STAGE_FRONTEND: &str = "frontend_total";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub frame_id: usize,
    pub agl: f64,
    pub regions: usize,
    pub grass_regions: usize,
    pub deltas: Vec<StoreDelta>,
}

/// Sequential per-frame processing: depth, segmentation, classification and
/// region management.
pub struct Frontend {
    pub store: RegionStore,
    pub tracks: TrackStore,
    pub timer: StageTimer,
    cfg: PipelineConfig,
    camera: CameraModel,
    model: ForestModel,
    fft: GaborFft,
    /// Track observations grouped by frame.
    pending: Vec<Vec<(u64, TrackObservation)>>,
    last_agl: Option<f64>,
}

impl Frontend {
    pub fn new(cfg: &PipelineConfig, model: ForestModel, camera: CameraModel, tracks: &[FeatureTrack], n_frames: usize) -> Result<Self> {
        model.validate()?;
        let bank = GaborBank::new(cfg.gabor.clone())?;
        let fft = GaborFft::new(&bank, camera.width as usize, camera.height as usize);
        let mut pending = vec![Vec::new(); n_frames];
        for t in tracks {
            for o in &t.observations {
                if o.frame_id < n_frames {
                    pending[o.frame_id].push((t.track_id, *o));
                }
            }
        }
        Ok(Self {
            store: RegionStore::new(cfg.regions),
            tracks: TrackStore::new(),
            timer: StageTimer::default(),
            cfg: cfg.clone(),
            camera,
            model,
            fft,
            pending,
            last_agl: None,
        })
    }

    /// Terrain height under pixel `px`, falling back to `fallback`.
    fn ground_z(&self, frame_id: usize, px: [f64; 2], fallback: f64) -> f64 {
        coarse_depth(&self.tracks, frame_id, px, &self.cfg.depth).unwrap_or(fallback)
    }

    fn project(&self, frame_id: usize, pose: &Pose, px: [f64; 2], fallback_z: f64) -> Result<Point3<f64>> {
        let z = self.ground_z(frame_id, px, fallback_z);
        project_to_ground(px, pose, &self.camera, z)
    }

    /// Processes frame `frame_id`; `poses` are the logged poses of all frames.
    pub fn process(&mut self, frame_id: usize, img: &RgbImage, poses: &[Pose]) -> Result<FrameSummary> {
        let t_frame = std::time::Instant::now();
        let pose = poses[frame_id];
        let cam = self.camera;

        // height above ground from the triangulated tracks at the image centre
        let agl = self.timer.time(STAGE_DEPTH, || {
            for (id, o) in std::mem::take(&mut self.pending[frame_id]) {
                self.tracks.push(id, o);
            }
            self.tracks.refresh(poses, &cam);
            let centre = [cam.cx, cam.cy];
            match coarse_depth(&self.tracks, frame_id, centre, &self.cfg.depth) {
                Ok(z) if pose.position.z - z > 0.0 => pose.position.z - z,
                _ => self.last_agl.unwrap_or(pose.position.z.max(1.0)),
            }
        });
        self.last_agl = Some(agl);
        let ground = pose.position.z - agl;

        let regions = self.timer.time(STAGE_SEGMENTATION, || segment(img, agl, &self.cfg.segmenter))?;

        let labelled: Vec<(RegionMask, bool, f64)> = self.timer.time(STAGE_CLASSIFICATION, || -> Result<_> {
            if regions.is_empty() {
                return Ok(Vec::new());
            }
            let responses = self.fft.apply(&gray_f32(img));
            let win = Window::full(img.width() as usize, img.height() as usize);
            let mut out = Vec::with_capacity(regions.len());
            for mask in regions {
                let fv = extract_features_with(img, &mask, &responses, win)?;
                let (label, p) = self.model.predict(&fv);
                out.push((mask, label == 1, p));
            }
            Ok(out)
        })?;

        let t_rm = std::time::Instant::now();
        let mut deltas = Vec::new();
        let grass_regions = labelled.iter().filter(|l| l.1).count();
        let n_regions = labelled.len();
        for (mask, grass, probability) in labelled {
            let pts: Vec<[f64; 2]> = mask.contour.iter().map(|&[x, y]| [x as f64, y as f64]).collect();
            let Ok(rect_px) = min_area_rect(&pts) else {
                continue;
            };
            let mut corners = [Point3::origin(); 4];
            for (c, px) in corners.iter_mut().zip(&rect_px) {
                *c = self.project(frame_id, &pose, *px, ground)?;
            }
            let centroid = self.project(frame_id, &pose, mask.centroid(), ground)?;
            let obs = RegionObservation {
                frame_id,
                mask: Arc::new(mask),
                grass,
                probability,
                rect_px,
                corners,
                centroid,
                fully_visible: rect_fully_visible(&rect_px, cam.width, cam.height),
            };
            deltas.push(self.store.ingest(&obs)?);
        }
        self.store.record_history(frame_id);
        self.timer.record(STAGE_REGION_MANAGER, t_rm.elapsed().as_secs_f64() * 1e3);
        self.timer.record(STAGE_FRONTEND, t_frame.elapsed().as_secs_f64() * 1e3);
        Ok(FrameSummary {
            frame_id,
            agl,
            regions: n_regions,
            grass_regions,
            deltas,
        })
    }
}
