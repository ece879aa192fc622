use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::approach_planner::{ApproachParams, WindConfig};
use crate::error::{Error, Result};
use crate::geom3d::DepthQueryConfig;
use crate::imgproc::GaborParams;
use crate::region_manager::RegionManagerConfig;
use crate::scene::SceneSpec;
use crate::segmenter::SegmenterConfig;
use crate::terrain_map::TerrainMapConfig;

/// Simulated feature tracking used when a scene has no `tracks.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackConfig {
    /// New tracks spawned per frame.
    pub density: usize,
    pub pixel_noise_sigma: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            density: 120,
            pixel_noise_sigma: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    /// Regions forwarded per backend cycle.
    pub n_candidates: usize,
    /// Touch-down cells tried per region.
    pub max_plan_candidates: usize,
    /// Minimum camera baseline between keyframes, m.
    pub keyframe_min_baseline: f64,
    pub max_keyframes: usize,
    /// Depth samples per keyframe for the dense cloud.
    pub cloud_samples_per_frame: usize,
    /// Elevation noise of the dense cloud, m.
    pub cloud_noise_sigma: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            n_candidates: 1,
            max_plan_candidates: 2000,
            keyframe_min_baseline: 5.0,
            max_keyframes: 8,
            cloud_samples_per_frame: 120_000,
            cloud_noise_sigma: 0.05,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_candidates == 0 || self.max_plan_candidates == 0 || self.max_keyframes == 0 {
            return Err(Error::InvalidInput("backend counts must be >= 1".into()));
        }
        if !(self.keyframe_min_baseline >= 0.0) || !(self.cloud_noise_sigma >= 0.0) {
            return Err(Error::InvalidInput("backend baseline and noise must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Scene directory written by `generate-scene`.
    pub scene: Option<PathBuf>,
    /// Scene generated in memory when `scene` is not set.
    pub scene_spec: Option<SceneSpec>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Frames between backend cycles.
    pub backend_period: usize,
    /// Throttle frame processing to the log timestamps.
    pub realtime: bool,
    pub max_frames: Option<usize>,
    pub segmenter: SegmenterConfig,
    pub gabor: GaborParams,
    pub depth: DepthQueryConfig,
    pub regions: RegionManagerConfig,
    pub terrain: TerrainMapConfig,
    pub approach: ApproachParams,
    pub wind: WindConfig,
    pub backend: BackendConfig,
    pub tracks: TrackConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scene: None,
            scene_spec: None,
            model: None,
            out: None,
            seed: 0,
            backend_period: 25,
            realtime: false,
            max_frames: None,
            segmenter: SegmenterConfig::default(),
            gabor: GaborParams::default(),
            depth: DepthQueryConfig::default(),
            regions: RegionManagerConfig::default(),
            terrain: TerrainMapConfig::default(),
            approach: ApproachParams::default(),
            wind: WindConfig::default(),
            backend: BackendConfig::default(),
            tracks: TrackConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses a TOML configuration file. Relative paths are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.scene, &mut cfg.model, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Checks value ranges and that referenced inputs exist.
    pub fn validate(&self) -> Result<()> {
        if self.backend_period == 0 {
            return Err(Error::InvalidInput("backend_period must be >= 1".into()));
        }
        if self.scene.is_none() && self.scene_spec.is_none() {
            return Err(Error::InvalidInput("either scene or scene_spec must be set".into()));
        }
        for p in [&self.scene, &self.model].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::InvalidInput(format!("{} does not exist", p.display())));
            }
        }
        if self.model.is_none() {
            return Err(Error::InvalidInput("a classifier model is required".into()));
        }
        self.segmenter.validate()?;
        self.depth.validate()?;
        self.regions.validate()?;
        self.terrain.validate()?;
        self.approach.validate()?;
        self.backend.validate()
    }
}
