use std::collections::HashSet;

use super::FeatureTrack;
use crate::camera::Pose;

/// A new keyframe is considered once fewer than this many tracks connect the
/// current keyframe to a frame.
pub const KEYFRAME_CONNECTIVITY: usize = 30;

/// Number of tracks observed in both frames.
pub fn connection_count(tracks: &[FeatureTrack], a: usize, b: usize) -> usize {
    tracks
        .iter()
        .filter(|t| t.observation_in(a).is_some() && t.observation_in(b).is_some())
        .count()
}

/// Selects keyframes among frames `0..poses.len()`. Frame 0 is always a
/// keyframe. Scanning forward, once the number of tracks shared with the
/// current keyframe drops below [`KEYFRAME_CONNECTIVITY`], the preceding frame
/// (or the current one when the preceding frame is the keyframe itself) is
/// promoted if its camera baseline to the current keyframe is at least
/// `min_baseline`; otherwise scanning continues.
pub fn select_keyframes(tracks: &[FeatureTrack], poses: &[Pose], min_baseline: f64) -> Vec<usize> {
    let n = poses.len();
    if n == 0 {
        return Vec::new();
    }
    // frame -> set of track indices observed there
    let mut per_frame: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for (i, t) in tracks.iter().enumerate() {
        for o in &t.observations {
            if o.frame_id < n {
                per_frame[o.frame_id].insert(i);
            }
        }
    }
    let mut keyframes = vec![0usize];
    let mut cur = 0usize;
    let mut f = 1usize;
    while f < n {
        let shared = per_frame[cur].intersection(&per_frame[f]).count();
        if shared < KEYFRAME_CONNECTIVITY {
            let cand = if f - 1 > cur { f - 1 } else { f };
            let baseline = (poses[cand].position - poses[cur].position).norm();
            if baseline >= min_baseline {
                keyframes.push(cand);
                cur = cand;
                f = cand + 1;
                continue;
            }
        }
        f += 1;
    }
    keyframes
}
