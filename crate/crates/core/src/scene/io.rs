//! Scene directory layout (all text files UTF-8):
//!
//! * `terrain.json`: format tag, version, grid size, resolution, seed,
//!   elevation encoding and the generating [`SceneSpec`].
//! * `elevation.pgm`: 16-bit binary PGM, big-endian samples;
//!   `z = offset + scale * sample` metres. PGM row 0 is the northernmost
//!   terrain row (largest y).
//! * `semantic.pgm`: 8-bit binary PGM of label codes (grass 0, crop 1,
//!   forest 2, building 3, road 4), same orientation.
//! * `frames/NNNNNN.png`: rendered RGB frames, one per log entry.
//! * `log.csv`: `time,px,py,pz,qw,qx,qy,qz,wx,wy` with logged (noisy) poses
//!   and wind measurements. Orientation is the camera-to-world quaternion.
//! * `truth.csv`: same columns without wind, holding the true poses used for
//!   rendering.
//! * `camera.json`: pinhole intrinsics.
//! * `tracks.csv`: `track_id,frame_id,u,v`, one row per observation.
//!
//! The texture is not stored; it is regenerated from the spec and seed.

use std::fs;
use std::path::Path;

use nalgebra::{Point3, Quaternion, UnitQuaternion, Vector2};
use serde::{Deserialize, Serialize};

use super::{build_terrain, FlightLog, Label, LogEntry, SceneBundle, SceneSpec, Terrain};
use crate::camera::{CameraModel, Pose};
use crate::error::{Error, Result};
use crate::geom3d::{FeatureTrack, TrackObservation};
use crate::raster::{self, Grid};

const FORMAT: &str = "landsite-scene";
const VERSION: u32 = 1;

/// Finest elevation quantisation step, metres.
pub const ELEVATION_SCALE_MIN: f64 = 0.001;

#[derive(Debug, Serialize, Deserialize)]
struct ElevationEncoding {
    scale: f64,
    offset: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TerrainHeader {
    format: String,
    version: u32,
    cols: usize,
    rows: usize,
    resolution: f64,
    seed: u64,
    elevation: ElevationEncoding,
    labels: Vec<(u8, String)>,
    spec: SceneSpec,
}

#[derive(Debug, Serialize, Deserialize)]
struct LogRow {
    time: f64,
    px: f64,
    py: f64,
    pz: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    wx: f64,
    wy: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PoseRow {
    time: f64,
    px: f64,
    py: f64,
    pz: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackRow {
    track_id: u64,
    frame_id: usize,
    u: f64,
    v: f64,
}

fn pose_parts(p: &Pose) -> [f64; 7] {
    let q = p.orientation.quaternion();
    [p.position.x, p.position.y, p.position.z, q.w, q.i, q.j, q.k]
}

fn pose_from(px: f64, py: f64, pz: f64, qw: f64, qx: f64, qy: f64, qz: f64) -> Pose {
    Pose {
        position: Point3::new(px, py, pz),
        orientation: UnitQuaternion::from_quaternion(Quaternion::new(qw, qx, qy, qz)),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    raster::write_atomic(path, &bytes).map_err(|e| Error::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value)?;
    raster::write_atomic(path, &bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Flips between terrain rows (y up) and image rows (north first).
fn flip_rows<T: Clone>(g: &Grid<T>) -> Grid<T> {
    let h = g.height();
    Grid::from_fn(g.width(), h, |x, y| g[(x, h - 1 - y)].clone())
}

fn encode_elevation(terrain: &Terrain) -> (ElevationEncoding, Grid<u16>) {
    let (lo, hi) = terrain.z_range();
    let scale = ((hi - lo) / 65535.0).max(ELEVATION_SCALE_MIN);
    let enc = ElevationEncoding { scale, offset: lo };
    let grid = terrain
        .elevation
        .map(|&z| ((z - lo) / scale).round().clamp(0.0, 65535.0) as u16);
    (enc, flip_rows(&grid))
}

pub fn frame_path(dir: &Path, index: usize) -> std::path::PathBuf {
    dir.join("frames").join(format!("{index:06}.png"))
}

/// Writes the scene directory. Frames are rendered when `with_frames` is set.
pub fn save_scene(bundle: &SceneBundle, dir: &Path, tracks: Option<&[FeatureTrack]>, with_frames: bool) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (enc, elev) = encode_elevation(&bundle.terrain);
    let header = TerrainHeader {
        format: FORMAT.into(),
        version: VERSION,
        cols: bundle.terrain.cols(),
        rows: bundle.terrain.rows(),
        resolution: bundle.terrain.resolution,
        seed: bundle.seed,
        elevation: enc,
        labels: Label::ALL.iter().map(|l| (l.code(), l.name().to_string())).collect(),
        spec: bundle.spec.clone(),
    };
    write_json(&dir.join("terrain.json"), &header)?;
    let p = dir.join("elevation.pgm");
    raster::write_pgm16(&p, &elev).map_err(|e| Error::io(&p, e))?;
    let p = dir.join("semantic.pgm");
    raster::write_pgm8(&p, &flip_rows(&bundle.terrain.semantic.map(|l| l.code())))
        .map_err(|e| Error::io(&p, e))?;
    write_json(&dir.join("camera.json"), &bundle.camera)?;
    write_csv(
        &dir.join("log.csv"),
        bundle.log.entries.iter().map(|e| {
            let [px, py, pz, qw, qx, qy, qz] = pose_parts(&e.pose);
            LogRow { time: e.time, px, py, pz, qw, qx, qy, qz, wx: e.wind.x, wy: e.wind.y }
        }),
    )?;
    write_csv(
        &dir.join("truth.csv"),
        bundle.log.entries.iter().zip(&bundle.true_poses).map(|(e, p)| {
            let [px, py, pz, qw, qx, qy, qz] = pose_parts(p);
            PoseRow { time: e.time, px, py, pz, qw, qx, qy, qz }
        }),
    )?;
    if let Some(tracks) = tracks {
        save_tracks(&dir.join("tracks.csv"), tracks)?;
    }
    if with_frames {
        let fdir = dir.join("frames");
        fs::create_dir_all(&fdir).map_err(|e| Error::io(&fdir, e))?;
        for i in 0..bundle.frame_count() {
            let img = bundle.render(i)?;
            crate::imgproc::write_debug_rgb(&frame_path(dir, i), &img)?;
        }
    }
    Ok(())
}

pub fn save_tracks(path: &Path, tracks: &[FeatureTrack]) -> Result<()> {
    write_csv(
        path,
        tracks.iter().flat_map(|t| {
            t.observations.iter().map(move |o| TrackRow {
                track_id: t.track_id,
                frame_id: o.frame_id,
                u: o.u,
                v: o.v,
            })
        }),
    )
}

/// Reads `tracks.csv`; rows of one track must be contiguous and in frame order.
pub fn load_tracks(path: &Path) -> Result<Vec<FeatureTrack>> {
    let rows: Vec<TrackRow> = read_csv(path)?;
    let mut tracks: Vec<FeatureTrack> = Vec::new();
    for r in rows {
        if tracks.last().map_or(true, |t| t.track_id != r.track_id) {
            tracks.push(FeatureTrack::new(r.track_id));
        }
        let t = tracks.last_mut().expect("just pushed");
        if t.observations.last().is_some_and(|o| o.frame_id >= r.frame_id) {
            return Err(Error::Format(format!(
                "{}: track {} frames not increasing",
                path.display(),
                r.track_id
            )));
        }
        t.observations.push(TrackObservation { frame_id: r.frame_id, u: r.u, v: r.v });
    }
    Ok(tracks)
}

/// Loads a scene directory written by [`save_scene`].
pub fn load_scene(dir: &Path) -> Result<SceneBundle> {
    let header: TerrainHeader = read_json(&dir.join("terrain.json"))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported scene format {} v{}",
            dir.display(),
            header.format,
            header.version
        )));
    }
    let p = dir.join("elevation.pgm");
    let pgm = raster::read_pgm(&p).map_err(|e| Error::io(&p, e))?;
    let dims = (header.cols, header.rows);
    if (pgm.samples.width(), pgm.samples.height()) != dims {
        return Err(Error::Format(format!("{}: size does not match terrain.json", p.display())));
    }
    let enc = &header.elevation;
    let elevation = flip_rows(&pgm.samples).map(|&s| enc.offset + enc.scale * s as f64);
    let p = dir.join("semantic.pgm");
    let pgm = raster::read_pgm(&p).map_err(|e| Error::io(&p, e))?;
    if (pgm.samples.width(), pgm.samples.height()) != dims {
        return Err(Error::Format(format!("{}: size does not match terrain.json", p.display())));
    }
    let mut bad = None;
    let semantic = flip_rows(&pgm.samples).map(|&c| {
        Label::from_code(c as u8).unwrap_or_else(|| {
            bad = Some(c);
            Label::Grass
        })
    });
    if let Some(c) = bad {
        return Err(Error::Format(format!("{}: unknown label code {c}", p.display())));
    }
    let generated = build_terrain(&header.spec, header.seed);
    if (generated.cols(), generated.rows()) != dims {
        return Err(Error::Format("terrain.json spec does not match its grid size".into()));
    }
    let terrain = Terrain::new(header.resolution, elevation, semantic, generated.texture);
    let camera: CameraModel = read_json(&dir.join("camera.json"))?;
    camera.validate()?;
    let rows: Vec<LogRow> = read_csv(&dir.join("log.csv"))?;
    let log = FlightLog {
        entries: rows
            .iter()
            .map(|r| LogEntry {
                time: r.time,
                pose: pose_from(r.px, r.py, r.pz, r.qw, r.qx, r.qy, r.qz),
                wind: Vector2::new(r.wx, r.wy),
            })
            .collect(),
    };
    log.validate()?;
    let truth = dir.join("truth.csv");
    let true_poses = if truth.exists() {
        let rows: Vec<PoseRow> = read_csv(&truth)?;
        rows.iter()
            .map(|r| pose_from(r.px, r.py, r.pz, r.qw, r.qx, r.qy, r.qz))
            .collect()
    } else {
        log.poses()
    };
    if true_poses.len() != log.len() {
        return Err(Error::Format("truth.csv and log.csv lengths differ".into()));
    }
    Ok(SceneBundle {
        spec: header.spec,
        seed: header.seed,
        terrain,
        log,
        true_poses,
        camera,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_scene, simulate_tracks, Feature, FlightSpec, Rect};

    #[test]
    fn scene_round_trips_through_directory() {
        let spec = SceneSpec {
            cols: 120,
            rows: 80,
            undulation_amplitude: 2.0,
            features: vec![Feature::Building {
                rect: Rect::new(10.0, 10.0, 20.0, 18.0),
                height: 8.0,
            }],
            camera: CameraModel::nominal().scaled(0.1),
            flight: FlightSpec {
                altitude: 50.0,
                margin: 10.0,
                line_spacing: 15.0,
                position_noise_sigma: 0.2,
                ..FlightSpec::default()
            },
            ..SceneSpec::default()
        };
        let bundle = generate_scene(&spec, 99).unwrap();
        let tracks = simulate_tracks(&bundle.terrain, &bundle.true_poses, &bundle.camera, 5, 0.5, 1);
        let dir = tempfile::tempdir().unwrap();
        save_scene(&bundle, dir.path(), Some(&tracks), true).unwrap();
        assert!(frame_path(dir.path(), 0).exists());
        let back = load_scene(dir.path()).unwrap();
        assert_eq!(back.log, bundle.log);
        assert_eq!(back.true_poses, bundle.true_poses);
        assert_eq!(back.terrain.semantic, bundle.terrain.semantic);
        assert_eq!(back.terrain.texture, bundle.terrain.texture);
        for (a, b) in back.terrain.elevation.as_slice().iter().zip(bundle.terrain.elevation.as_slice()) {
            assert!((a - b).abs() <= 0.5 * ELEVATION_SCALE_MIN + 1e-12);
        }
        let t2 = load_tracks(&dir.path().join("tracks.csv")).unwrap();
        assert_eq!(t2, tracks);
        // semantic.pgm is stored north-up
        let pgm = raster::read_pgm(&dir.path().join("semantic.pgm")).unwrap();
        assert_eq!(pgm.samples[(30, 80 - 1 - 30)], Label::Building.code() as u16);
    }
}
