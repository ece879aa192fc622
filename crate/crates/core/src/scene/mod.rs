//! Deterministic synthetic scenes: textured heightfields with semantic labels,
//! lawn-mower flight logs with noisy wind measurements, frame rendering,
//! simulated feature tracks and a ground-truth depth oracle.

mod io;
mod noise;
mod oracle;
mod render;
mod spec;
mod terrain;
mod tracks;

use nalgebra::{Point3, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraModel, Pose};
use crate::error::{Error, Result};
use crate::imgproc::color::{rgb_from_hsv, Hsv};
use crate::raster::Grid;

pub use io::{load_scene, load_tracks, save_scene, save_tracks, ELEVATION_SCALE_MIN};
pub use oracle::{sample_depth_oracle, PointCloud};
pub use render::{render_frame, SKY_COLOR};
pub use spec::{Axis, Feature, FlightSpec, Rect, SceneSpec, WindSpec};
pub use terrain::{Label, Terrain};
pub use tracks::simulate_tracks;

use noise::{normal, splitmix64, uniform, value_noise};

const STREAM_FLIGHT: u64 = 0x0F11_6A7E;
const STREAM_WIND: u64 = 0x0057_1ED0;
const STREAM_TERRAIN: u64 = 0x7E44_A1B0;

/// Derives an independent sub-seed for a named stream.
pub(crate) fn sub_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, stream))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Seconds since the start of the survey.
    pub time: f64,
    pub pose: Pose,
    /// Measured air velocity in the world xy plane, m/s.
    pub wind: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlightLog {
    pub entries: Vec<LogEntry>,
}

impl FlightLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.entries.iter().map(|e| e.pose).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for pair in self.entries.windows(2) {
            if !(pair[1].time > pair[0].time) {
                return Err(Error::InvalidInput(format!(
                    "log times not strictly increasing at t = {}",
                    pair[1].time
                )));
            }
        }
        for e in &self.entries {
            let n = e.pose.orientation.quaternion().norm();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "orientation at t = {} has norm {n}",
                    e.time
                )));
            }
        }
        Ok(())
    }
}

/// A generated scene: terrain, flight log (noisy poses and wind), the true
/// poses used for rendering, and the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub spec: SceneSpec,
    pub seed: u64,
    pub terrain: Terrain,
    pub log: FlightLog,
    pub true_poses: Vec<Pose>,
    pub camera: CameraModel,
}

impl SceneBundle {
    /// Renders frame `i` from its true pose.
    pub fn render(&self, i: usize) -> Result<image::RgbImage> {
        render_frame(&self.terrain, &self.true_poses[i], &self.camera)
    }

    pub fn frame_count(&self) -> usize {
        self.log.len()
    }
}

impl WindSpec {
    /// True wind at time `t`.
    pub fn true_wind(&self, t: f64) -> Vector2<f64> {
        let (s, c) = (self.rotation_rate * t).sin_cos();
        let [x, y] = self.mean;
        Vector2::new(c * x - s * y, s * x + c * y)
    }
}

/// Base colour of each label in HSV (hue degrees, saturation, value).
fn base_hsv(label: Label) -> Hsv {
    let (h, s, v) = match label {
        Label::Grass => (100.0, 0.62, 0.55),
        Label::Crop => (52.0, 0.55, 0.62),
        Label::Forest => (118.0, 0.60, 0.30),
        Label::Building => (10.0, 0.45, 0.60),
        Label::Road => (40.0, 0.08, 0.45),
    };
    Hsv { h, s, v }
}

/// Value factor of cells on a boundary between two fields or features.
const BOUNDARY_DARKENING: f64 = 0.6;

const YOUNG_CROP: Hsv = Hsv {
    h: 78.0,
    s: 0.70,
    v: 0.50,
};

/// Per-cell RGB jitter sigma (8-bit units) at unit texture noise.
fn jitter_sigma(label: Label) -> f64 {
    match label {
        Label::Grass => 3.0,
        Label::Crop => 5.0,
        Label::Forest => 16.0,
        Label::Building => 4.0,
        Label::Road => 6.0,
    }
}

struct Synth<'a> {
    spec: &'a SceneSpec,
    seed: u64,
}

impl Synth<'_> {
    fn elevation_and_labels(&self) -> (Grid<f64>, Grid<Label>, Grid<u16>) {
        let s = self.spec;
        let res = s.resolution;
        let und_seed = sub_seed(self.seed, STREAM_TERRAIN);
        let mut elev = Grid::from_fn(s.cols, s.rows, |c, r| {
            let x = (c as f64 + 0.5) * res;
            let y = (r as f64 + 0.5) * res;
            let mut z = s.base_elevation;
            if s.undulation_amplitude != 0.0 {
                z += s.undulation_amplitude
                    * value_noise(und_seed, x, y, s.undulation_wavelength.max(res));
            }
            z
        });
        let mut labels = Grid::new(s.cols, s.rows, s.base_label);
        // owner 0 is the base layer, k + 1 is feature k
        let mut owner = Grid::new(s.cols, s.rows, 0u16);
        for (k, feature) in s.features.iter().enumerate() {
            let rect = feature.rect();
            let fseed = sub_seed(self.seed, 0x100 + k as u64);
            let c0 = ((rect.x0 / res - 0.5).ceil().max(0.0)) as usize;
            let r0 = ((rect.y0 / res - 0.5).ceil().max(0.0)) as usize;
            let c1 = ((rect.x1 / res - 0.5).ceil().max(0.0) as usize).min(s.cols);
            let r1 = ((rect.y1 / res - 0.5).ceil().max(0.0) as usize).min(s.rows);
            for r in r0..r1 {
                for c in c0..c1 {
                    let x = (c as f64 + 0.5) * res;
                    let y = (r as f64 + 0.5) * res;
                    debug_assert!(rect.contains(x, y));
                    let z = &mut elev[(c, r)];
                    match feature {
                        Feature::Patch { .. } => {}
                        Feature::Ramp {
                            slope_deg, axis, ..
                        } => {
                            let along = match axis {
                                Axis::X => x - rect.x0,
                                Axis::Y => y - rect.y0,
                            };
                            *z += slope_deg.to_radians().tan() * along;
                        }
                        Feature::Forest {
                            canopy_height,
                            roughness,
                            ..
                        } => {
                            *z += canopy_height + roughness * normal(fseed, c as i64, r as i64);
                        }
                        Feature::Building { height, .. } => *z += height,
                    }
                    labels[(c, r)] = feature.label();
                    owner[(c, r)] = (k + 1) as u16;
                }
            }
        }
        (elev, labels, owner)
    }

    fn texture(&self, labels: &Grid<Label>, owner: &Grid<u16>) -> Grid<[u8; 3]> {
        let s = self.spec;
        let res = s.resolution;
        let tex_seed = sub_seed(self.seed, STREAM_TERRAIN ^ 0xC0_10A5);
        let tints: Vec<(f64, f64, f64)> = (0..=s.features.len())
            .map(|k| {
                let u = |j: i64| uniform(tex_seed, k as i64, j) - 0.5;
                let tv = s.tint_variation;
                (tv * 16.0 * u(0), 1.0 + tv * 0.25 * u(1), 1.0 + tv * 0.4 * u(2))
            })
            .collect();
        // roughly half of the crop fields are young green crop
        let young: Vec<bool> = (0..=s.features.len())
            .map(|k| uniform(tex_seed, k as i64, 7) < 0.5)
            .collect();
        let tn = s.texture_noise;
        Grid::from_fn(s.cols, s.rows, |c, r| {
            let label = labels[(c, r)];
            let own = owner[(c, r)] as usize;
            let (dh, ks, kv) = tints[own];
            let mut hsv = base_hsv(label);
            if label == Label::Crop && young[own] {
                hsv = YOUNG_CROP;
            }
            hsv.h = (hsv.h + dh).rem_euclid(360.0);
            hsv.s = (hsv.s * ks).clamp(0.0, 1.0);
            let x = (c as f64 + 0.5) * res;
            let y = (r as f64 + 0.5) * res;
            let (ci, ri) = (c as i64, r as i64);
            let pattern = match label {
                Label::Grass => 0.07 * value_noise(tex_seed ^ 1, x, y, 6.0),
                Label::Crop => {
                    let along_x = s
                        .features
                        .get(own.wrapping_sub(1))
                        .map_or(true, |f| {
                            let rc = f.rect();
                            rc.x1 - rc.x0 >= rc.y1 - rc.y0
                        });
                    let coord = if along_x { y } else { x };
                    0.035 * (std::f64::consts::TAU * coord / 3.0).sin()
                }
                Label::Forest => {
                    0.18 * normal(tex_seed ^ 2, ci, ri) + 0.12 * value_noise(tex_seed ^ 3, x, y, 3.0)
                }
                Label::Building => 0.03 * value_noise(tex_seed ^ 4, x, y, 4.0),
                Label::Road => 0.04 * value_noise(tex_seed ^ 5, x, y, 1.5),
            };
            // darker furrow along every field boundary
            let margin = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].iter().any(|&(dc, dr)| {
                let (nc, nr) = (ci + dc, ri + dr);
                nc >= 0
                    && nr >= 0
                    && (nc as usize) < s.cols
                    && (nr as usize) < s.rows
                    && owner[(nc as usize, nr as usize)] as usize != own
            });
            let kv = if margin { kv * BOUNDARY_DARKENING } else { kv };
            hsv.v = (hsv.v * kv * (1.0 + tn * pattern)).clamp(0.0, 1.0);
            let rgb = rgb_from_hsv(hsv);
            let sigma = tn * jitter_sigma(label);
            let mut out = [0u8; 3];
            for (ch, o) in out.iter_mut().enumerate() {
                let j = if sigma > 0.0 {
                    sigma * normal(tex_seed ^ (10 + ch as u64), ci, ri)
                } else {
                    0.0
                };
                *o = ((rgb[ch] as f64 + j) * s.ambient).round().clamp(0.0, 255.0) as u8;
            }
            out
        })
    }

    fn flight(&self) -> (Vec<f64>, Vec<Pose>) {
        let s = self.spec;
        let f = &s.flight;
        let [w, h] = s.extent();
        let area = f
            .area
            .unwrap_or_else(|| Rect::new(f.margin, f.margin, w - f.margin, h - f.margin));
        let mut lines = Vec::new();
        let mut y = area.y0;
        while y <= area.y1 + 1e-9 {
            lines.push(y);
            y += f.line_spacing;
        }
        if lines.is_empty() {
            lines.push(0.5 * (area.y0 + area.y1));
        }
        let step = f.speed / f.frame_rate;
        let n_along = (((area.x1 - area.x0) / step).floor().max(0.0) as usize) + 1;
        let z = s.base_elevation + f.altitude;
        let mut times = Vec::new();
        let mut poses = Vec::new();
        let mut t = 0.0;
        'outer: for (k, &ly) in lines.iter().enumerate() {
            if k > 0 {
                t += f.line_spacing / f.speed;
            }
            for i in 0..n_along {
                let j = if k % 2 == 0 { i } else { n_along - 1 - i };
                let x = area.x0 + j as f64 * step;
                times.push(t);
                poses.push(Pose::nadir(Point3::new(x, ly, z)));
                if f.max_frames.is_some_and(|m| poses.len() >= m) {
                    break 'outer;
                }
                t += 1.0 / f.frame_rate;
            }
        }
        (times, poses)
    }
}

/// Builds the terrain, flight log and camera for `(spec, seed)`.
/// Identical inputs give bit-identical bundles.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<SceneBundle> {
    spec.validate()?;
    let synth = Synth { spec, seed };
    let terrain = build_terrain(spec, seed);
    let (times, true_poses) = synth.flight();

    let mut rng = stream_rng(seed, STREAM_FLIGHT);
    let pos_noise = Normal::new(0.0, spec.flight.position_noise_sigma.max(0.0))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut wind_rng = stream_rng(seed, STREAM_WIND);
    let wind_noise = Normal::new(0.0, spec.wind.noise_sigma.max(0.0))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;

    let entries = times
        .iter()
        .zip(&true_poses)
        .map(|(&time, truth)| {
            let mut pose = *truth;
            if spec.flight.position_noise_sigma > 0.0 {
                pose.position.x += pos_noise.sample(&mut rng);
                pose.position.y += pos_noise.sample(&mut rng);
                pose.position.z += pos_noise.sample(&mut rng);
            }
            let mut wind = spec.wind.true_wind(time);
            if spec.wind.noise_sigma > 0.0 {
                wind.x += wind_noise.sample(&mut wind_rng);
                wind.y += wind_noise.sample(&mut wind_rng);
            }
            LogEntry { time, pose, wind }
        })
        .collect();

    Ok(SceneBundle {
        spec: spec.clone(),
        seed,
        terrain,
        log: FlightLog { entries },
        true_poses,
        camera: spec.camera,
    })
}

/// Terrain only (elevation, labels and texture) for `(spec, seed)`.
pub fn build_terrain(spec: &SceneSpec, seed: u64) -> Terrain {
    let synth = Synth { spec, seed };
    let (elevation, semantic, owner) = synth.elevation_and_labels();
    let texture = synth.texture(&semantic, &owner);
    Terrain::new(spec.resolution, elevation, semantic, texture)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SceneSpec {
        SceneSpec {
            cols: 200,
            rows: 160,
            resolution: 0.5,
            flight: FlightSpec {
                altitude: 60.0,
                line_spacing: 20.0,
                speed: 10.0,
                margin: 10.0,
                ..FlightSpec::default()
            },
            ..SceneSpec::default()
        }
    }

    #[test]
    fn flat_grass_spec_is_flat_grass() {
        let spec = SceneSpec::flat_grass(50, 40, 1.0);
        let t = build_terrain(&spec, 1);
        assert!(t.semantic.as_slice().iter().all(|&l| l == Label::Grass));
        assert!(t.elevation.as_slice().iter().all(|&z| z == 0.0));
    }

    #[test]
    fn building_raises_footprint_by_its_height() {
        let mut spec = small_spec();
        spec.undulation_amplitude = 1.5;
        spec.features.push(Feature::Building {
            rect: Rect::new(20.0, 20.0, 25.0, 25.0),
            height: 8.0,
        });
        let with = build_terrain(&spec, 9);
        spec.features.clear();
        let without = build_terrain(&spec, 9);
        let mut cells = 0;
        for (c, r, &l) in with.semantic.indexed() {
            if l == Label::Building {
                cells += 1;
                assert!((with.elevation[(c, r)] - without.elevation[(c, r)] - 8.0).abs() < 1e-12);
            }
        }
        assert_eq!(cells, 100);
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = small_spec();
        spec.undulation_amplitude = 2.0;
        spec.flight.position_noise_sigma = 0.5;
        spec.features.push(Feature::Forest {
            rect: Rect::new(10.0, 10.0, 40.0, 30.0),
            canopy_height: 10.0,
            roughness: 1.0,
        });
        let a = generate_scene(&spec, 42).unwrap();
        let b = generate_scene(&spec, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(&spec, 43).unwrap();
        assert_ne!(a.terrain.texture, c.terrain.texture);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let mut spec = small_spec();
        spec.resolution = 0.0;
        assert!(generate_scene(&spec, 0).is_err());
        let mut spec = small_spec();
        spec.cols = 0;
        assert!(generate_scene(&spec, 0).is_err());
    }

    #[test]
    fn flight_log_is_valid_lawn_mower() {
        let bundle = generate_scene(&small_spec(), 3).unwrap();
        bundle.log.validate().unwrap();
        assert!(bundle.log.len() > 10);
        let ys: Vec<f64> = bundle.true_poses.iter().map(|p| p.position.y).collect();
        assert_eq!(ys[0], 10.0);
        // direction alternates between lines
        let first_line: Vec<_> = bundle.true_poses.iter().filter(|p| p.position.y == 10.0).collect();
        let second_line: Vec<_> = bundle.true_poses.iter().filter(|p| p.position.y == 30.0).collect();
        assert!(first_line[1].position.x > first_line[0].position.x);
        assert!(second_line[1].position.x < second_line[0].position.x);
    }

    #[test]
    fn wind_measurements_scatter_around_truth() {
        let mut spec = small_spec();
        spec.flight.line_spacing = 2.0;
        spec.wind = WindSpec {
            mean: [3.0, -1.0],
            rotation_rate: 0.0,
            noise_sigma: 0.5,
        };
        let b = generate_scene(&spec, 5).unwrap();
        let n = b.log.len() as f64;
        let mean = b.log.entries.iter().fold(Vector2::zeros(), |a, e| a + e.wind) / n;
        assert!((mean - Vector2::new(3.0, -1.0)).norm() < 3.0 * 0.5 / n.sqrt() * 2.0);
    }

    #[test]
    fn zero_texture_noise_gives_uniform_colour() {
        let mut spec = SceneSpec::flat_grass(40, 40, 0.5);
        spec.texture_noise = 0.0;
        let t = build_terrain(&spec, 11);
        let first = t.texture.as_slice()[0];
        assert!(t.texture.as_slice().iter().all(|&c| c == first));
    }
}
