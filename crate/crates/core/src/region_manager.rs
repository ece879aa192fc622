//! Region-of-interest bookkeeping across frames: creation, re-detection by
//! centroid containment, corner growth until a fully visible observation
//! fixes them, merging, grading and bounded retention.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom3d::{min_area_rect, signed_area, winding_inside};
use crate::imgproc::RegionMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionManagerConfig {
    /// Minimum ground area for a non-zero grade, m^2.
    pub a_min: f64,
    /// Minimum number of observations for a non-zero grade.
    pub n_obs_min: u32,
    /// Maximum number of retained regions.
    pub capacity: usize,
}

impl Default for RegionManagerConfig {
    fn default() -> Self {
        Self {
            a_min: 900.0,
            n_obs_min: 3,
            capacity: 20,
        }
    }
}

impl RegionManagerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_min >= 0.0) || self.capacity == 0 {
            return Err(Error::InvalidInput("a_min must be >= 0 and capacity >= 1".into()));
        }
        Ok(())
    }
}

/// `n_grass / n_obs`, or zero when the region is too small or too rarely seen.
pub fn grade(n_grass: u32, n_obs: u32, area: f64, a_min: f64, n_obs_min: u32) -> f64 {
    if area < a_min || n_obs < n_obs_min || n_obs == 0 {
        0.0
    } else {
        n_grass as f64 / n_obs as f64
    }
}

/// A segmented region mask kept for the fine analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct FineMask {
    pub frame_id: usize,
    pub grass: bool,
    pub mask: Arc<RegionMask>,
}

/// One region seen in one frame, already classified and projected.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionObservation {
    pub frame_id: usize,
    pub mask: Arc<RegionMask>,
    pub grass: bool,
    pub probability: f64,
    /// Minimum-area rectangle of the mask in pixels, counter-clockwise.
    pub rect_px: [[f64; 2]; 4],
    /// Rectangle corners projected onto the terrain.
    pub corners: [Point3<f64>; 4],
    pub centroid: Point3<f64>,
    pub fully_visible: bool,
}

/// Whether all rectangle corners lie strictly inside a `width x height` image.
pub fn rect_fully_visible(rect_px: &[[f64; 2]; 4], width: u32, height: u32) -> bool {
    let (w, h) = ((width - 1) as f64, (height - 1) as f64);
    rect_px.iter().all(|&[u, v]| u > 0.0 && u < w && v > 0.0 && v < h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiRecord {
    pub roi_id: u64,
    /// Counter-clockwise in xy.
    pub corners: [Point3<f64>; 4],
    pub corners_fixed: bool,
    pub centroid: Point3<f64>,
    pub n_grass: u32,
    pub n_obs: u32,
    /// Ground area of the corner polygon, m^2.
    pub area: f64,
    pub grade: f64,
    #[serde(skip)]
    pub fine_masks: Vec<FineMask>,
    pub first_seen_frame: usize,
    pub last_seen_frame: usize,
}

fn xy(corners: &[Point3<f64>]) -> Vec<[f64; 2]> {
    corners.iter().map(|p| [p.x, p.y]).collect()
}

impl RoiRecord {
    pub fn polygon(&self) -> Vec<[f64; 2]> {
        xy(&self.corners)
    }

    pub fn contains_xy(&self, p: [f64; 2]) -> bool {
        winding_inside(p, &self.polygon())
    }

    pub fn certainty(&self) -> f64 {
        if self.n_obs == 0 {
            0.0
        } else {
            self.n_grass as f64 / self.n_obs as f64
        }
    }

    fn set_corners(&mut self, corners: [Point3<f64>; 4]) {
        let mut corners = corners;
        if signed_area(&xy(&corners)) < 0.0 {
            corners.reverse();
        }
        self.area = signed_area(&xy(&corners)).abs();
        let n = corners.len() as f64;
        let c = corners.iter().fold(nalgebra::Vector3::zeros(), |a, p| a + p.coords) / n;
        self.centroid = Point3::from(c);
        self.corners = corners;
    }

    fn regrade(&mut self, cfg: &RegionManagerConfig) {
        self.grade = grade(self.n_grass, self.n_obs, self.area, cfg.a_min, cfg.n_obs_min);
    }
}

/// Enclosing minimum-area rectangle of two corner sets, at their mean height.
fn enclosing_rect(a: &[Point3<f64>; 4], b: &[Point3<f64>; 4]) -> Result<[Point3<f64>; 4]> {
    let pts: Vec<[f64; 2]> = a.iter().chain(b).map(|p| [p.x, p.y]).collect();
    let rect = min_area_rect(&pts)?;
    let z = a.iter().chain(b).map(|p| p.z).sum::<f64>() / 8.0;
    Ok(rect.map(|[x, y]| Point3::new(x, y, z)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "roi_id", rename_all = "snake_case")]
pub enum StoreDelta {
    Created(u64),
    Updated(u64),
}

impl StoreDelta {
    pub fn roi_id(self) -> u64 {
        match self {
            StoreDelta::Created(id) | StoreDelta::Updated(id) => id,
        }
    }
}

/// Statistics of one region after one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiSample {
    pub frame_id: usize,
    pub n_obs: u32,
    pub certainty: f64,
    pub area: f64,
    pub grade: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionStore {
    pub config: RegionManagerConfig,
    /// Ordered by id, which is also creation order.
    rois: Vec<RoiRecord>,
    next_id: u64,
    history: BTreeMap<u64, Vec<RoiSample>>,
    snapshots_taken: u64,
}

/// Ranks regions by grade, then recency, then id.
fn ranked<'a>(rois: impl Iterator<Item = &'a RoiRecord>) -> Vec<&'a RoiRecord> {
    let mut v: Vec<&RoiRecord> = rois.collect();
    v.sort_by(|a, b| {
        b.grade
            .total_cmp(&a.grade)
            .then(b.last_seen_frame.cmp(&a.last_seen_frame))
            .then(a.roi_id.cmp(&b.roi_id))
    });
    v
}

/// Immutable copy of the store handed to the backend.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSnapshot {
    pub frame_id: usize,
    rois: Vec<RoiRecord>,
}

impl RegionSnapshot {
    pub fn rois(&self) -> &[RoiRecord] {
        &self.rois
    }

    /// Same ranking as [`RegionStore::best_candidates`].
    pub fn best_candidates(&self, n: usize) -> Vec<&RoiRecord> {
        let mut v = ranked(self.rois.iter().filter(|r| r.grade > 0.0));
        v.truncate(n);
        v
    }
}

impl RegionStore {
    pub fn new(config: RegionManagerConfig) -> Self {
        Self {
            config,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rois.is_empty()
    }

    pub fn rois(&self) -> &[RoiRecord] {
        &self.rois
    }

    pub fn get(&self, id: u64) -> Option<&RoiRecord> {
        self.rois.iter().find(|r| r.roi_id == id)
    }

    fn index_of(&self, id: u64) -> Option<usize> {
        self.rois.iter().position(|r| r.roi_id == id)
    }

    /// Re-detects or creates a region for `obs`.
    pub fn observe(&mut self, obs: &RegionObservation) -> Result<StoreDelta> {
        let c = [obs.centroid.x, obs.centroid.y];
        let cfg = self.config;
        let fine = FineMask {
            frame_id: obs.frame_id,
            grass: obs.grass,
            mask: Arc::clone(&obs.mask),
        };
        if let Some(i) = self.rois.iter().position(|r| r.contains_xy(c)) {
            let roi = &mut self.rois[i];
            roi.n_obs += 1;
            roi.n_grass += u32::from(obs.grass);
            if !roi.corners_fixed {
                let corners = enclosing_rect(&roi.corners, &obs.corners)?;
                roi.set_corners(corners);
                roi.corners_fixed = obs.fully_visible;
            }
            roi.fine_masks.push(fine);
            roi.last_seen_frame = roi.last_seen_frame.max(obs.frame_id);
            roi.regrade(&cfg);
            return Ok(StoreDelta::Updated(roi.roi_id));
        }
        let id = self.next_id;
        self.next_id += 1;
        let mut roi = RoiRecord {
            roi_id: id,
            corners: obs.corners,
            corners_fixed: obs.fully_visible,
            centroid: obs.centroid,
            n_grass: u32::from(obs.grass),
            n_obs: 1,
            area: 0.0,
            grade: 0.0,
            fine_masks: vec![fine],
            first_seen_frame: obs.frame_id,
            last_seen_frame: obs.frame_id,
        };
        roi.set_corners(obs.corners);
        roi.regrade(&cfg);
        self.rois.push(roi);
        Ok(StoreDelta::Created(id))
    }

    /// Merges every region whose centroid lies inside `roi_id`'s corners, or
    /// that contains `roi_id`'s centroid, repeating until nothing changes.
    /// The survivor keeps the larger-area corners; counts are summed.
    /// Returns the removed ids.
    pub fn merge_pass(&mut self, roi_id: u64) -> Vec<u64> {
        let mut removed = Vec::new();
        let mut current = roi_id;
        loop {
            let Some(i) = self.index_of(current) else {
                return removed;
            };
            let partner = self.rois.iter().enumerate().find(|(j, other)| {
                *j != i && {
                    let me = &self.rois[i];
                    me.contains_xy([other.centroid.x, other.centroid.y])
                        || other.contains_xy([me.centroid.x, me.centroid.y])
                }
            });
            let Some((j, _)) = partner else {
                return removed;
            };
            let (a, b) = (&self.rois[i], &self.rois[j]);
            // keep the larger region; equal areas keep the older one
            let keep_i = a.area > b.area || (a.area == b.area && a.roi_id < b.roi_id);
            let (k, r) = if keep_i { (i, j) } else { (j, i) };
            let gone = self.rois[r].clone();
            let keep = &mut self.rois[k];
            keep.n_obs += gone.n_obs;
            keep.n_grass += gone.n_grass;
            keep.first_seen_frame = keep.first_seen_frame.min(gone.first_seen_frame);
            keep.last_seen_frame = keep.last_seen_frame.max(gone.last_seen_frame);
            keep.fine_masks.extend(gone.fine_masks);
            keep.fine_masks.sort_by_key(|m| m.frame_id);
            let cfg = self.config;
            keep.regrade(&cfg);
            current = keep.roi_id;
            self.rois.remove(r);
            removed.push(gone.roi_id);
        }
    }

    /// Evicts the lowest-graded regions beyond capacity; among equal grades the
    /// least recently seen goes first. Returns the evicted ids.
    pub fn retain_top(&mut self) -> Vec<u64> {
        let mut evicted = Vec::new();
        while self.rois.len() > self.config.capacity {
            let (i, _) = self
                .rois
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    a.grade
                        .total_cmp(&b.grade)
                        .then(a.last_seen_frame.cmp(&b.last_seen_frame))
                        .then(a.roi_id.cmp(&b.roi_id))
                })
                .expect("non-empty");
            evicted.push(self.rois.remove(i).roi_id);
        }
        evicted
    }

    /// Observe, merge and retain in one step.
    pub fn ingest(&mut self, obs: &RegionObservation) -> Result<StoreDelta> {
        let delta = self.observe(obs)?;
        self.merge_pass(delta.roi_id());
        self.retain_top();
        Ok(delta)
    }

    /// Up to `n` regions with a positive grade, best first; ties favour the
    /// most recently seen.
    pub fn best_candidates(&self, n: usize) -> Vec<&RoiRecord> {
        let mut v = ranked(self.rois.iter().filter(|r| r.grade > 0.0));
        v.truncate(n);
        v
    }

    /// All regions, best first.
    pub fn ranked(&self) -> Vec<&RoiRecord> {
        ranked(self.rois.iter())
    }

    /// Copies the current regions for the backend.
    pub fn snapshot(&mut self, frame_id: usize) -> RegionSnapshot {
        self.snapshots_taken += 1;
        RegionSnapshot {
            frame_id,
            rois: self.rois.clone(),
        }
    }

    /// Number of snapshots handed out so far.
    pub fn snapshots_taken(&self) -> u64 {
        self.snapshots_taken
    }

    /// Appends the current statistics of every region to its time series.
    pub fn record_history(&mut self, frame_id: usize) {
        for r in &self.rois {
            self.history.entry(r.roi_id).or_default().push(RoiSample {
                frame_id,
                n_obs: r.n_obs,
                certainty: r.certainty(),
                area: r.area,
                grade: r.grade,
            });
        }
    }

    pub fn history(&self) -> &BTreeMap<u64, Vec<RoiSample>> {
        &self.history
    }

    /// JSON dump of the current regions and their time series.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Dump<'a> {
            rois: &'a [RoiRecord],
            history: &'a BTreeMap<u64, Vec<RoiSample>>,
        }
        Ok(serde_json::to_string_pretty(&Dump {
            rois: &self.rois,
            history: &self.history,
        })?)
    }
}
