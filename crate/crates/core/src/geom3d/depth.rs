//! Track store with incremental triangulation and IDW coarse-depth queries.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{triangulate_prefix, FeatureTrack, TrackObservation};
use crate::camera::{CameraModel, Pose};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthQueryConfig {
    /// Number of nearest tracks blended per query.
    pub n: usize,
    /// Tracks with fewer observations are not used.
    pub min_track_length: usize,
    pub idw_power: f64,
}

impl Default for DepthQueryConfig {
    fn default() -> Self {
        Self {
            n: 5,
            min_track_length: 3,
            idw_power: 1.0,
        }
    }
}

impl DepthQueryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.min_track_length < 2 {
            return Err(Error::InvalidInput(
                "depth query needs n >= 1 and min_track_length >= 2".into(),
            ));
        }
        Ok(())
    }
}

const IDW_EPS: f64 = 1e-9;

/// Feature tracks indexed by frame. Observations are appended frame by frame;
/// [`TrackStore::refresh`] re-triangulates tracks that gained observations so
/// that queries only see information available up to the latest frame.
#[derive(Debug, Clone, Default)]
pub struct TrackStore {
    tracks: Vec<FeatureTrack>,
    /// Observation count each cached triangulation was computed from.
    tri_count: Vec<usize>,
    by_id: std::collections::HashMap<u64, usize>,
    /// Per frame: (track index, observation index).
    by_frame: Vec<Vec<(usize, usize)>>,
    dirty: Vec<usize>,
}

impl TrackStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Store holding complete tracks, triangulated with `poses`.
    pub fn from_tracks(tracks: &[FeatureTrack], poses: &[Pose], camera: &CameraModel) -> Self {
        let mut store = Self::new();
        for t in tracks {
            for o in &t.observations {
                store.push(t.track_id, *o);
            }
        }
        store.refresh(poses, camera);
        store
    }

    pub fn tracks(&self) -> &[FeatureTrack] {
        &self.tracks
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    /// Appends one observation. Observations of a track must arrive in
    /// increasing frame order; out-of-order ones are ignored.
    pub fn push(&mut self, track_id: u64, obs: TrackObservation) {
        let idx = *self.by_id.entry(track_id).or_insert_with(|| {
            self.tracks.push(FeatureTrack::new(track_id));
            self.tri_count.push(0);
            self.tracks.len() - 1
        });
        let track = &mut self.tracks[idx];
        if track.observations.last().is_some_and(|l| l.frame_id >= obs.frame_id) {
            return;
        }
        track.observations.push(obs);
        if self.by_frame.len() <= obs.frame_id {
            self.by_frame.resize_with(obs.frame_id + 1, Vec::new);
        }
        self.by_frame[obs.frame_id].push((idx, track.observations.len() - 1));
        self.dirty.push(idx);
    }

    /// Re-triangulates every track that changed since the last refresh.
    pub fn refresh(&mut self, poses: &[Pose], camera: &CameraModel) {
        let mut dirty = std::mem::take(&mut self.dirty);
        dirty.sort_unstable();
        dirty.dedup();
        for idx in dirty {
            let track = &self.tracks[idx];
            let count = track.observations.len();
            if self.tri_count[idx] == count {
                continue;
            }
            let point = if count >= 2 {
                triangulate_prefix(track, count, poses, camera).ok().map(|t| t.point)
            } else {
                None
            };
            self.tracks[idx].triangulated = point;
            self.tri_count[idx] = count;
        }
    }

    /// Observations made in `frame_id` as (track, pixel).
    pub fn observations_in(&self, frame_id: usize) -> impl Iterator<Item = (&FeatureTrack, &TrackObservation)> {
        self.by_frame
            .get(frame_id)
            .into_iter()
            .flatten()
            .map(|&(t, o)| (&self.tracks[t], &self.tracks[t].observations[o]))
    }

    /// Triangulated points of the usable tracks observed in `frame_id`, with
    /// their pixel in that frame.
    pub fn usable_in(&self, frame_id: usize, cfg: &DepthQueryConfig) -> Vec<([f64; 2], Point3<f64>, u64)> {
        self.observations_in(frame_id)
            .filter(|(t, _)| t.observations.len() >= cfg.min_track_length)
            .filter_map(|(t, o)| t.triangulated.map(|p| ([o.u, o.v], p, t.track_id)))
            .collect()
    }
}

/// Terrain height at pixel `query` of `frame_id`: inverse-distance weighting
/// of the heights of the `cfg.n` usable tracks nearest in pixel space.
pub fn coarse_depth(store: &TrackStore, frame_id: usize, query: [f64; 2], cfg: &DepthQueryConfig) -> Result<f64> {
    let usable = store.usable_in(frame_id, cfg);
    idw_nearest(&usable, query, cfg)
        .ok_or_else(|| Error::NoDepth(format!("no usable track observed in frame {frame_id}")))
}

pub(crate) fn idw_nearest(
    usable: &[([f64; 2], Point3<f64>, u64)],
    query: [f64; 2],
    cfg: &DepthQueryConfig,
) -> Option<f64> {
    if usable.is_empty() {
        return None;
    }
    let mut cand: Vec<(f64, u64, f64)> = usable
        .iter()
        .map(|(px, p, id)| {
            let d = ((px[0] - query[0]).powi(2) + (px[1] - query[1]).powi(2)).sqrt();
            (d, *id, p.z)
        })
        .collect();
    let n = cfg.n.min(cand.len());
    cand.select_nth_unstable_by(n - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(n);
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if cand[0].0 == 0.0 {
        return Some(cand[0].2);
    }
    let (num, den) = cand.iter().fold((0.0, 0.0), |(num, den), &(d, _, z)| {
        let w = 1.0 / (d.powf(cfg.idw_power) + IDW_EPS);
        (num + w * z, den + w)
    });
    Some(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usable(pts: &[([f64; 2], f64)]) -> Vec<([f64; 2], Point3<f64>, u64)> {
        pts.iter()
            .enumerate()
            .map(|(i, (px, z))| (*px, Point3::new(0.0, 0.0, *z), i as u64))
            .collect()
    }

    #[test]
    fn constant_field() {
        let u = usable(&[([0.0, 0.0], 50.0), ([10.0, 3.0], 50.0), ([5.0, 9.0], 50.0)]);
        let z = idw_nearest(&u, [4.0, 4.0], &DepthQueryConfig::default()).unwrap();
        assert!((z - 50.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_averages() {
        let u = usable(&[([0.0, 0.0], 1.0), ([10.0, 0.0], 3.0), ([100.0, 0.0], 100.0)]);
        let cfg = DepthQueryConfig {
            n: 2,
            ..Default::default()
        };
        assert!((idw_nearest(&u, [5.0, 0.0], &cfg).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_hit_returns_that_height() {
        let u = usable(&[([0.0, 0.0], 1.0), ([10.0, 0.0], 3.0)]);
        assert_eq!(idw_nearest(&u, [10.0, 0.0], &DepthQueryConfig::default()), Some(3.0));
    }

    #[test]
    fn empty_frame_has_no_depth() {
        let store = TrackStore::new();
        assert!(matches!(
            coarse_depth(&store, 0, [1.0, 1.0], &DepthQueryConfig::default()),
            Err(Error::NoDepth(_))
        ));
    }

    #[test]
    fn out_of_order_observations_are_ignored() {
        let mut s = TrackStore::new();
        s.push(7, TrackObservation { frame_id: 3, u: 0.0, v: 0.0 });
        s.push(7, TrackObservation { frame_id: 2, u: 0.0, v: 0.0 });
        assert_eq!(s.tracks()[0].observations.len(), 1);
        assert!(s.tracks()[0].is_well_formed());
    }
}
