//! End-to-end orchestration: a sequential frontend over the flight log and a
//! periodic backend working on snapshots of the region store.

mod backend;
mod config;
mod frontend;
mod report;
mod timing;

use std::path::Path;
use std::time::{Duration, Instant};

pub use backend::{roi_keyframes, roi_wind, run_backend, BackendRun, BackendRunSummary};
pub use config::{BackendConfig, PipelineConfig, TrackConfig};
pub use frontend::{
    FrameSummary, Frontend, STAGE_CLASSIFICATION, STAGE_DEPTH, STAGE_FRONTEND, STAGE_REGION_MANAGER, STAGE_SEGMENTATION,
};
pub use report::{emit_report, Outcome, RunReport, RunResult, SiteSummary};
pub use timing::{StageTimer, TimingStats};

use crate::classifier::ForestModel;
use crate::error::{Error, Result};
use crate::geom3d::FeatureTrack;
use crate::scene::{generate_scene, load_scene, load_tracks, simulate_tracks, sub_seed, SceneBundle};

const STREAM_TRACKS: u64 = 0x7AC4_5000;

/// Loaded inputs of a run.
pub struct RunInputs {
    pub scene: SceneBundle,
    pub tracks: Vec<FeatureTrack>,
    pub model: ForestModel,
    /// Directory holding pre-rendered frames, if any.
    pub frames_dir: Option<std::path::PathBuf>,
}

/// Feature tracks for a scene with the configured simulation settings.
pub fn scene_tracks(scene: &SceneBundle, cfg: &PipelineConfig) -> Vec<FeatureTrack> {
    simulate_tracks(
        &scene.terrain,
        &scene.true_poses,
        &scene.camera,
        cfg.tracks.density,
        cfg.tracks.pixel_noise_sigma,
        sub_seed(cfg.seed, STREAM_TRACKS),
    )
}

/// Reads the scene (or generates it), its tracks and the model.
pub fn load_inputs(cfg: &PipelineConfig) -> Result<RunInputs> {
    cfg.validate()?;
    let model_path = cfg.model.as_ref().ok_or_else(|| Error::InvalidInput("no model".into()))?;
    let model = ForestModel::load(model_path)?;
    let (scene, tracks, frames_dir) = match (&cfg.scene, &cfg.scene_spec) {
        (Some(dir), _) => {
            let scene = load_scene(dir)?;
            let tp = dir.join("tracks.csv");
            let tracks = if tp.exists() { load_tracks(&tp)? } else { scene_tracks(&scene, cfg) };
            let fd = dir.join("frames");
            (scene, tracks, fd.is_dir().then_some(fd))
        }
        (None, Some(spec)) => {
            let scene = generate_scene(spec, cfg.seed)?;
            let tracks = scene_tracks(&scene, cfg);
            (scene, tracks, None)
        }
        (None, None) => return Err(Error::InvalidInput("either scene or scene_spec must be set".into())),
    };
    Ok(RunInputs {
        scene,
        tracks,
        model,
        frames_dir,
    })
}

fn frame(inputs: &RunInputs, i: usize) -> Result<image::RgbImage> {
    match &inputs.frames_dir {
        Some(dir) => {
            let p = dir.join(format!("{i:06}.png"));
            Ok(image::open(&p)
                .map_err(|e| Error::Format(format!("{}: {e}", p.display())))?
                .to_rgb8())
        }
        None => inputs.scene.render(i),
    }
}

/// Runs the frontend over the log and the backend every `backend_period`
/// frames and once more after the last frame.
pub fn run_pipeline(cfg: &PipelineConfig, inputs: &RunInputs) -> Result<RunResult> {
    if cfg.backend_period == 0 {
        return Err(Error::InvalidInput("backend_period must be >= 1".into()));
    }
    let scene = &inputs.scene;
    scene.log.validate()?;
    let n = cfg.max_frames.map_or(scene.frame_count(), |m| m.min(scene.frame_count()));
    let poses = scene.log.poses();
    let mut fe = Frontend::new(cfg, inputs.model.clone(), scene.camera, &inputs.tracks, n)?;
    let mut backend_timer = StageTimer::default();
    let mut summaries: Vec<BackendRunSummary> = Vec::new();
    let mut last: Option<BackendRun> = None;
    let mut frames = Vec::with_capacity(n);
    let start = Instant::now();
    for i in 0..n {
        if cfg.realtime {
            let due = Duration::from_secs_f64((scene.log.entries[i].time - scene.log.entries[0].time).max(0.0));
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        let img = frame(inputs, i)?;
        frames.push(fe.process(i, &img, &poses)?);
        let final_frame = i + 1 == n;
        if (i + 1) % cfg.backend_period == 0 || final_frame {
            let snapshot = fe.store.snapshot(i);
            let out = run_backend(&snapshot, scene, fe.tracks.tracks(), &poses, cfg, &mut backend_timer)?;
            summaries.extend(out.iter().map(BackendRun::summary));
            // the best region of the latest cycle decides the outcome
            last = out.into_iter().next();
        }
    }
    let mut timing = fe.timer.stats();
    timing.extend(backend_timer.stats());
    let report = report::build_report(
        cfg.seed,
        scene.seed,
        cfg.backend_period,
        frames,
        &fe.store,
        summaries,
        last.as_ref(),
        timing,
    );
    Ok(RunResult {
        report,
        store: fe.store,
        final_run: last,
    })
}

/// Loads inputs, runs, and writes the outputs to `cfg.out` when set.
pub fn run_from_config(cfg: &PipelineConfig) -> Result<RunResult> {
    let inputs = load_inputs(cfg)?;
    let result = run_pipeline(cfg, &inputs)?;
    if let Some(out) = &cfg.out {
        emit_report(&result, out)?;
    }
    Ok(result)
}

/// Writes a pipeline configuration template.
pub fn write_config_template(path: &Path) -> Result<()> {
    let text = PipelineConfig::default().to_toml()?;
    crate::raster::write_atomic(path, text.as_bytes()).map_err(|e| Error::io(path, e))
}
