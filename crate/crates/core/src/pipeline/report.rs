use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::backend::{BackendRun, BackendRunSummary};
use super::frontend::FrameSummary;
use super::timing::TimingStats;
use crate::approach_planner::{render_overlay, ApproachPlan};
use crate::error::{Error, Result};
use crate::raster::write_atomic;
use crate::region_manager::{RegionStore, RoiRecord, RoiSample};
use crate::terrain_map::export_layers;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Feasible,
    NoCandidate,
    Infeasible,
}

impl Outcome {
    /// Process exit code.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Feasible => 0,
            Outcome::NoCandidate => 2,
            Outcome::Infeasible => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSummary {
    pub rank: usize,
    pub roi_id: u64,
    pub grade: f64,
    pub certainty: f64,
    pub n_obs: u32,
    pub n_grass: u32,
    pub area: f64,
    pub centroid: [f64; 3],
    pub corners: [[f64; 3]; 4],
    pub corners_fixed: bool,
    pub first_seen_frame: usize,
    pub last_seen_frame: usize,
}

impl SiteSummary {
    fn new(rank: usize, r: &RoiRecord) -> Self {
        Self {
            rank,
            roi_id: r.roi_id,
            grade: r.grade,
            certainty: r.certainty(),
            n_obs: r.n_obs,
            n_grass: r.n_grass,
            area: r.area,
            centroid: [r.centroid.x, r.centroid.y, r.centroid.z],
            corners: r.corners.map(|p| [p.x, p.y, p.z]),
            corners_fixed: r.corners_fixed,
            first_seen_frame: r.first_seen_frame,
            last_seen_frame: r.last_seen_frame,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub scene_seed: u64,
    pub frames_processed: usize,
    pub backend_period: usize,
    pub outcome: Outcome,
    /// All regions at the end of the run, best first.
    pub sites: Vec<SiteSummary>,
    pub roi_series: BTreeMap<u64, Vec<RoiSample>>,
    pub frames: Vec<FrameSummary>,
    pub backend_runs: Vec<BackendRunSummary>,
    /// Plan of the last backend cycle.
    pub plan: Option<ApproachPlan>,
    pub plan_failures: usize,
    /// Wall-clock statistics; not reproducible between runs.
    pub timing: BTreeMap<String, TimingStats>,
}

impl RunReport {
    /// JSON without the timing section, for reproducibility checks.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(o) = v.as_object_mut() {
            o.remove("timing");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub report: RunReport,
    pub store: RegionStore,
    /// Last backend cycle, if any region qualified.
    pub final_run: Option<BackendRun>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn build_report(
    seed: u64,
    scene_seed: u64,
    backend_period: usize,
    frames: Vec<FrameSummary>,
    store: &RegionStore,
    backend_runs: Vec<BackendRunSummary>,
    last: Option<&BackendRun>,
    timing: BTreeMap<String, TimingStats>,
) -> RunReport {
    let outcome = match last.map(|r| &r.plan) {
        None => Outcome::NoCandidate,
        Some(Ok(p)) if p.feasible() => Outcome::Feasible,
        Some(_) => Outcome::Infeasible,
    };
    let (plan, plan_failures) = match last.map(|r| &r.plan) {
        Some(Ok(p)) => (p.plan.clone(), p.failures.len()),
        _ => (None, 0),
    };
    RunReport {
        seed,
        scene_seed,
        frames_processed: frames.len(),
        backend_period,
        outcome,
        sites: store.ranked().into_iter().enumerate().map(|(i, r)| SiteSummary::new(i + 1, r)).collect(),
        roi_series: store.history().clone(),
        frames,
        backend_runs,
        plan,
        plan_failures,
        timing,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes()).map_err(|e| Error::io(path, e))
}

fn series_csv(samples: &[RoiSample]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in samples {
        w.serialize(s).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

/// Writes `report.json`, `rois/roi_<id>.csv`, and for the last backend cycle
/// `layers/`, `plan.json` and `overlay.png`. Every file is replaced atomically.
pub fn emit_report(result: &RunResult, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    let p = out.join("report.json");
    write_json(&p, &result.report)?;
    written.push(p);

    let rois = out.join("rois");
    if !result.report.roi_series.is_empty() {
        std::fs::create_dir_all(&rois).map_err(|e| Error::io(&rois, e))?;
    }
    for (id, samples) in &result.report.roi_series {
        let p = rois.join(format!("roi_{id:05}.csv"));
        write_atomic(&p, &series_csv(samples)?).map_err(|e| Error::io(&p, e))?;
        written.push(p);
    }

    if let Some(run) = &result.final_run {
        written.extend(export_layers(&run.stack, &out.join("layers"))?);
        let p = out.join("plan.json");
        match &run.plan {
            Ok(plan) => {
                write_json(&p, plan)?;
                let img = render_overlay(&run.stack, plan);
                let mut png = Vec::new();
                img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
                    .map_err(|e| Error::Format(e.to_string()))?;
                let o = out.join("overlay.png");
                write_atomic(&o, &png).map_err(|e| Error::io(&o, e))?;
                written.push(o);
            }
            Err(reason) => write_json(&p, &serde_json::json!({ "error": reason }))?,
        }
        written.push(p);
    }
    Ok(written)
}
