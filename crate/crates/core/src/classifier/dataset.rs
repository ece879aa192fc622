//! Labelled feature datasets: CSV storage and a builder that segments frames
//! of randomly laid out synthetic scenes and labels each region from the
//! ground-truth semantic map.

use std::path::Path;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{extract_features_with, gray_f32, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::camera::{CameraModel, Pose};
use crate::error::{Error, Result};
use crate::imgproc::gabor::{GaborBank, GaborFft, GaborParams, Window};
use crate::imgproc::RegionMask;
use crate::scene::{build_terrain, render_frame, Axis, Feature, Label, Rect, SceneSpec, Terrain};
use crate::segmenter::{segment, SegmenterConfig};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub x: Vec<FeatureVector>,
    /// 1 = grass, 0 = anything else.
    pub y: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn push(&mut self, fv: FeatureVector, label: u8) {
        self.x.push(fv);
        self.y.push(label);
    }

    pub fn grass_count(&self) -> usize {
        self.y.iter().filter(|&&l| l == 1).count()
    }

    /// CSV with one named column per feature followed by `label`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = FEATURE_NAMES.iter().copied().chain(["label"]).collect();
        w.write_record(&header).map_err(csv_err)?;
        for (fv, &label) in self.x.iter().zip(&self.y) {
            let mut rec: Vec<String> = fv.0.iter().map(|v| format!("{v}")).collect();
            rec.push(label.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        crate::raster::write_atomic(path, &bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let header = r.headers().map_err(csv_err)?;
        if header.len() != FEATURE_COUNT + 1 {
            return Err(Error::Format(format!(
                "expected {} columns, found {}",
                FEATURE_COUNT + 1,
                header.len()
            )));
        }
        let mut ds = Dataset::default();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let mut a = [0.0; FEATURE_COUNT];
            for (k, v) in a.iter_mut().enumerate() {
                *v = rec[k]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("bad feature value {:?}", &rec[k])))?;
            }
            let label: u8 = rec[FEATURE_COUNT]
                .trim()
                .parse()
                .ok()
                .filter(|&l| l <= 1)
                .ok_or_else(|| Error::Format(format!("bad label {:?}", &rec[FEATURE_COUNT])))?;
            ds.push(FeatureVector(a), label);
        }
        Ok(ds)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub target_regions: usize,
    /// Frames rendered per random scene.
    pub frames_per_scene: usize,
    /// Camera altitude range above ground, metres.
    pub agl_range: [f64; 2],
    /// Fraction of labelled cells that must be grass for a grass label.
    pub grass_fraction: f64,
    /// Regions whose grass fraction lies strictly between `1 - grass_fraction`
    /// and `grass_fraction` are skipped as ambiguous.
    pub skip_ambiguous: bool,
    /// Pixel stride used when sampling mask pixels for the label vote.
    pub label_stride: u32,
    pub camera: CameraModel,
    pub segmenter: SegmenterConfig,
    pub gabor: GaborParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            target_regions: 600,
            frames_per_scene: 4,
            agl_range: [70.0, 160.0],
            grass_fraction: 0.8,
            skip_ambiguous: true,
            label_stride: 4,
            camera: CameraModel::nominal(),
            segmenter: SegmenterConfig::default(),
            gabor: GaborParams::default(),
        }
    }
}

const SCENE_CELLS: usize = 560;
const SCENE_RES: f64 = 0.5;

/// A random farmland layout: crop or grass background with grass, crop and
/// road patches, forests, gentle ramps and small buildings.
pub fn random_layout(rng: &mut ChaCha8Rng) -> SceneSpec {
    let size = SCENE_CELLS as f64 * SCENE_RES;
    let base_label = if rng.gen_bool(0.5) { Label::Grass } else { Label::Crop };
    let mut features = Vec::new();
    let rand_rect = |rng: &mut ChaCha8Rng, min: f64, max: f64| {
        let w = rng.gen_range(min..max);
        let h = rng.gen_range(min..max);
        let x0 = rng.gen_range(0.0..size - w);
        let y0 = rng.gen_range(0.0..size - h);
        Rect::new(x0, y0, x0 + w, y0 + h)
    };
    for _ in 0..rng.gen_range(4..9) {
        let label = match rng.gen_range(0..3) {
            0 => Label::Grass,
            1 => Label::Crop,
            _ => {
                if base_label == Label::Grass {
                    Label::Crop
                } else {
                    Label::Grass
                }
            }
        };
        let rect = rand_rect(rng, 20.0, 70.0);
        if rng.gen_bool(0.25) {
            features.push(Feature::Ramp {
                label,
                rect,
                slope_deg: rng.gen_range(2.0..12.0),
                axis: if rng.gen_bool(0.5) { Axis::X } else { Axis::Y },
            });
        } else {
            features.push(Feature::Patch { label, rect });
        }
    }
    for _ in 0..rng.gen_range(1..3) {
        features.push(Feature::Forest {
            rect: rand_rect(rng, 25.0, 70.0),
            canopy_height: rng.gen_range(8.0..16.0),
            roughness: rng.gen_range(0.8..2.0),
        });
    }
    if rng.gen_bool(0.7) {
        let w = rng.gen_range(6.0..14.0);
        let along = rng.gen_bool(0.5);
        let c = rng.gen_range(20.0..size - 20.0);
        let rect = if along {
            Rect::new(c, 0.0, c + w, size)
        } else {
            Rect::new(0.0, c, size, c + w)
        };
        features.push(Feature::Patch { label: Label::Road, rect });
    }
    for _ in 0..rng.gen_range(0..3) {
        let r = rand_rect(rng, 8.0, 20.0);
        features.push(Feature::Building {
            rect: r,
            height: rng.gen_range(4.0..10.0),
        });
    }
    SceneSpec {
        cols: SCENE_CELLS,
        rows: SCENE_CELLS,
        resolution: SCENE_RES,
        base_label,
        undulation_amplitude: rng.gen_range(0.0..1.5),
        ambient: rng.gen_range(0.8..1.15),
        features,
        ..SceneSpec::default()
    }
}

/// Fraction of grass among the ground-truth labels seen through a mask,
/// sampled on a `stride` pixel lattice. `None` if no sample hits the terrain.
pub fn grass_fraction(
    mask: &RegionMask,
    terrain: &Terrain,
    pose: &Pose,
    camera: &CameraModel,
    stride: u32,
) -> Option<f64> {
    let stride = stride.max(1);
    let (mut grass, mut total) = (0usize, 0usize);
    for (x, y) in mask.pixels() {
        if x % stride != 0 || y % stride != 0 {
            continue;
        }
        let d = pose.ray_direction(camera, x as f64, y as f64);
        if let Some(l) = terrain.intersect(&pose.position, &d).and_then(|p| terrain.label_at(p.x, p.y)) {
            total += 1;
            grass += usize::from(l == Label::Grass);
        }
    }
    (total > 0).then(|| grass as f64 / total as f64)
}

/// Renders frames of random scenes until `cfg.target_regions` labelled
/// regions are collected. Deterministic for a given seed.
pub fn build_dataset(cfg: &DatasetConfig, seed: u64) -> Result<Dataset> {
    cfg.segmenter.validate()?;
    cfg.camera.validate()?;
    if !(cfg.agl_range[0] > 0.0 && cfg.agl_range[0] <= cfg.agl_range[1]) || cfg.frames_per_scene == 0 {
        return Err(Error::InvalidInput("invalid dataset configuration".into()));
    }
    let bank = GaborBank::new(cfg.gabor.clone())?;
    let fft = GaborFft::new(&bank, cfg.camera.width as usize, cfg.camera.height as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xDA7A_5E7);
    let mut ds = Dataset::default();
    let (w, h) = (cfg.camera.width as usize, cfg.camera.height as usize);
    let mut scenes = 0;
    while ds.len() < cfg.target_regions {
        scenes += 1;
        if scenes > 10 * cfg.target_regions + 100 {
            return Err(Error::InvalidInput("scenes produce too few regions".into()));
        }
        let spec = random_layout(&mut rng);
        let terrain = build_terrain(&spec, rng.gen());
        let size = SCENE_CELLS as f64 * SCENE_RES;
        for _ in 0..cfg.frames_per_scene {
            let agl = rng.gen_range(cfg.agl_range[0]..=cfg.agl_range[1]);
            // keep the whole footprint on the terrain
            let half_w = agl * (w as f64) / (2.0 * cfg.camera.fx) + 2.0;
            let half_h = agl * (h as f64) / (2.0 * cfg.camera.fy) + 2.0;
            if 2.0 * half_w >= size || 2.0 * half_h >= size {
                return Err(Error::InvalidInput("altitude too high for the dataset scene".into()));
            }
            let x = rng.gen_range(half_w..size - half_w);
            let y = rng.gen_range(half_h..size - half_h);
            let ground = terrain.height_at(x, y);
            let pose = Pose::nadir(Point3::new(x, y, ground + agl));
            let img = render_frame(&terrain, &pose, &cfg.camera)?;
            let regions = segment(&img, agl, &cfg.segmenter)?;
            if regions.is_empty() {
                continue;
            }
            let gray = gray_f32(&img);
            let responses = fft.apply(&gray);
            for mask in &regions {
                let Some(frac) = grass_fraction(mask, &terrain, &pose, &cfg.camera, cfg.label_stride) else {
                    continue;
                };
                let label = u8::from(frac >= cfg.grass_fraction);
                if cfg.skip_ambiguous && frac > 1.0 - cfg.grass_fraction && frac < cfg.grass_fraction {
                    continue;
                }
                let fv = extract_features_with(&img, mask, &responses, Window::full(w, h))?;
                ds.push(fv, label);
                if ds.len() >= cfg.target_regions {
                    return Ok(ds);
                }
            }
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = Dataset::default();
        let mut a = [0.0; FEATURE_COUNT];
        for (k, v) in a.iter_mut().enumerate() {
            *v = k as f64 * 0.1 + 1.0 / 3.0;
        }
        ds.push(FeatureVector(a), 1);
        a[4] = -2.5e-7;
        ds.push(FeatureVector(a), 0);
        let p = dir.path().join("d.csv");
        ds.write_csv(&p).unwrap();
        assert_eq!(Dataset::read_csv(&p).unwrap(), ds);
    }

    #[test]
    fn csv_rejects_bad_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let mut text = FEATURE_NAMES.join(",") + ",label\n";
        text += &vec!["1"; FEATURE_COUNT].join(",");
        text += ",2\n";
        std::fs::write(&p, text).unwrap();
        assert!(matches!(Dataset::read_csv(&p), Err(Error::Format(_))));
    }

    #[test]
    fn small_dataset_is_deterministic_and_labelled() {
        let cfg = DatasetConfig {
            target_regions: 12,
            camera: CameraModel::nominal().scaled(0.5),
            ..DatasetConfig::default()
        };
        let a = build_dataset(&cfg, 3).unwrap();
        let b = build_dataset(&cfg, 3).unwrap();
        assert_eq!(a.len(), 12);
        assert_eq!(a, b);
        assert!(a.x.iter().all(|f| f.is_finite()));
    }
}
