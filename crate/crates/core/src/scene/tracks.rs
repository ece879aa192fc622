use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{stream_rng, Terrain};
use crate::camera::{CameraModel, Pose};
use crate::geom3d::{FeatureTrack, TrackObservation};

const STREAM_TRACKS: u64 = 0x7AC5;

/// Simulates KLT-style feature tracks. Each frame spawns `density` landmarks
/// at random pixels (their first surface hit); a landmark's track is the
/// contiguous run of frames around its spawn frame in which it projects
/// inside the image and is not occluded. Observations are the exact
/// projections plus zero-mean Gaussian pixel noise.
pub fn simulate_tracks(
    terrain: &Terrain,
    poses: &[Pose],
    camera: &CameraModel,
    density: usize,
    pixel_noise_sigma: f64,
    seed: u64,
) -> Vec<FeatureTrack> {
    let mut rng = stream_rng(seed, STREAM_TRACKS);
    let noise = Normal::new(0.0, pixel_noise_sigma.max(0.0)).expect("finite sigma");
    let (w, h) = (camera.width as f64, camera.height as f64);
    let visible = |f: usize, p: &nalgebra::Point3<f64>| -> Option<[f64; 2]> {
        let pose = &poses[f];
        let px = pose.project(camera, p)?;
        (camera.contains(px[0], px[1]) && terrain.visible_from(&pose.position, p)).then_some(px)
    };
    let mut tracks = Vec::new();
    let mut next_id = 0u64;
    for spawn in 0..poses.len() {
        for _ in 0..density {
            let u = rng.gen::<f64>() * (w - 1.0);
            let v = rng.gen::<f64>() * (h - 1.0);
            let pose = &poses[spawn];
            let Some(point) = terrain.intersect(&pose.position, &pose.ray_direction(camera, u, v)) else {
                continue;
            };
            let mut first = spawn;
            while first > 0 && visible(first - 1, &point).is_some() {
                first -= 1;
            }
            let mut obs = Vec::new();
            let mut f = first;
            while f < poses.len() {
                let Some([pu, pv]) = visible(f, &point) else {
                    if f >= spawn {
                        break;
                    }
                    f += 1;
                    continue;
                };
                let (nu, nv) = if pixel_noise_sigma > 0.0 {
                    (noise.sample(&mut rng), noise.sample(&mut rng))
                } else {
                    (0.0, 0.0)
                };
                obs.push(TrackObservation {
                    frame_id: f,
                    u: pu + nu,
                    v: pv + nv,
                });
                f += 1;
            }
            if obs.is_empty() {
                continue;
            }
            tracks.push(FeatureTrack {
                track_id: next_id,
                observations: obs,
                triangulated: None,
            });
            next_id += 1;
        }
    }
    tracks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom3d::triangulate;
    use crate::scene::{generate_scene, FlightSpec, SceneSpec};

    fn scene() -> crate::scene::SceneBundle {
        let spec = SceneSpec {
            cols: 300,
            rows: 300,
            resolution: 0.5,
            undulation_amplitude: 3.0,
            undulation_wavelength: 40.0,
            camera: CameraModel::nominal().scaled(0.25),
            flight: FlightSpec {
                altitude: 80.0,
                line_spacing: 200.0,
                speed: 10.0,
                margin: 40.0,
                ..FlightSpec::default()
            },
            ..SceneSpec::default()
        };
        generate_scene(&spec, 17).unwrap()
    }

    #[test]
    fn noiseless_observations_reproject_exactly() {
        let s = scene();
        let tracks = simulate_tracks(&s.terrain, &s.true_poses, &s.camera, 20, 0.0, 1);
        assert!(!tracks.is_empty());
        for t in &tracks {
            assert!(t.is_well_formed());
            if t.observations.len() >= 2 {
                let tri = triangulate(t, &s.true_poses, &s.camera).unwrap();
                for o in &t.observations {
                    let [u, v] = s.true_poses[o.frame_id].project(&s.camera, &tri.point).unwrap();
                    assert!((u - o.u).abs() < 1e-6 && (v - o.v).abs() < 1e-6);
                }
                let z = s.terrain.height_at(tri.point.x, tri.point.y);
                assert!((tri.point.z - z).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn observation_frames_are_contiguous() {
        let s = scene();
        for t in simulate_tracks(&s.terrain, &s.true_poses, &s.camera, 10, 0.5, 2) {
            assert!(t.observations.windows(2).all(|w| w[1].frame_id == w[0].frame_id + 1));
        }
    }

    #[test]
    fn tracks_are_deterministic() {
        let s = scene();
        let a = simulate_tracks(&s.terrain, &s.true_poses, &s.camera, 10, 1.0, 5);
        let b = simulate_tracks(&s.terrain, &s.true_poses, &s.camera, 10, 1.0, 5);
        assert_eq!(a, b);
    }
}
