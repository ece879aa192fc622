//! C interface to the landsite library.
//!
//! Objects are exposed as opaque handles created by `ls_*_new`/`ls_*_load`
//! functions and released with the matching `ls_*_free`. Every fallible call
//! returns an [`LsStatus`]; on failure a description is available from
//! [`ls_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use landsite::approach_planner::{approach_geometry, plan_approach, ApproachParams, WindConfig, WindEstimate};
use landsite::classifier::{predict, FeatureVector, ForestModel, FEATURE_COUNT};
use landsite::error::Error;
use landsite::pipeline::{run_from_config, PipelineConfig};
use landsite::raster::Grid;
use landsite::segmenter::{thresholds_for_agl, SegmenterConfig};
use landsite::terrain_map::{export_layers, import_stack, GridGeometry, GridStack, HazardThresholds, Layer, TerrainMapConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Io = 3,
    Format = 4,
    ModelMismatch = 5,
    InfeasibleWind = 6,
    Degenerate = 7,
    /// No grass cell free of hazards to land on.
    NoCandidate = 8,
    /// Candidates exist but none passed every gate.
    Infeasible = 9,
    Panic = 10,
}

/// Trained grass classifier.
pub struct LsModel(ForestModel);

/// Terrain layer stack of one region.
pub struct LsStack(GridStack);

/// Approach parameters; angles in radians, lengths in metres.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LsApproachParams {
    pub v_land: f64,
    pub gamma_land: f64,
    pub delta_beta_w: f64,
    pub h_app: f64,
    pub phi_land: f64,
    pub delta_td: f64,
    pub g: f64,
    pub safety_margin: f64,
    pub flare_clearance_ratio: f64,
    /// Non-zero: cells without elevation block the approach.
    pub unknown_is_obstacle: u8,
}

impl From<ApproachParams> for LsApproachParams {
    fn from(p: ApproachParams) -> Self {
        Self {
            v_land: p.v_land,
            gamma_land: p.gamma_land,
            delta_beta_w: p.delta_beta_w,
            h_app: p.h_app,
            phi_land: p.phi_land,
            delta_td: p.delta_td,
            g: p.g,
            safety_margin: p.safety_margin,
            flare_clearance_ratio: p.flare_clearance_ratio,
            unknown_is_obstacle: u8::from(p.unknown_is_obstacle),
        }
    }
}

impl From<LsApproachParams> for ApproachParams {
    fn from(p: LsApproachParams) -> Self {
        Self {
            v_land: p.v_land,
            gamma_land: p.gamma_land,
            delta_beta_w: p.delta_beta_w,
            h_app: p.h_app,
            phi_land: p.phi_land,
            delta_td: p.delta_td,
            g: p.g,
            safety_margin: p.safety_margin,
            flare_clearance_ratio: p.flare_clearance_ratio,
            unknown_is_obstacle: p.unknown_is_obstacle != 0,
        }
    }
}

/// Chosen touch-down and approach; world coordinates, metres.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LsPlan {
    pub td_col: usize,
    pub td_row: usize,
    pub touch_down: [f64; 3],
    pub approach_point: [f64; 3],
    /// Unit vector from the touch-down towards the approach point.
    pub direction: [f64; 2],
    pub x_app: f64,
    pub r_loit: f64,
    pub loiter_center: [f64; 3],
    /// +1 loiter circle left of the approach direction, -1 right.
    pub loiter_side: i8,
    /// Distance to the nearest hazard at the touch-down, metres.
    pub score: f64,
    pub unverified_cells: usize,
    pub candidates_evaluated: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> LsStatus {
    match e {
        Error::InvalidInput(_) | Error::PoseBelowTerrain | Error::EmptyMask | Error::BadDataset { .. } => {
            LsStatus::InvalidInput
        }
        Error::Degenerate(_) | Error::NoDepth(_) => LsStatus::Degenerate,
        Error::ModelMismatch(_) => LsStatus::ModelMismatch,
        Error::InfeasibleWind { .. } => LsStatus::InfeasibleWind,
        Error::NoGrassMask(_) => LsStatus::NoCandidate,
        Error::Io { .. } => LsStatus::Io,
        Error::Format(_) => LsStatus::Format,
    }
}

struct Fail(LsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<LsStatus, Fail>) -> LsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LsStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LsStatus::InvalidInput, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Fills `out` with the default approach parameters.
///
/// # Safety
/// `out` must be null or point to writable memory for one `LsApproachParams`.
#[no_mangle]
pub unsafe extern "C" fn ls_approach_params_default(out: *mut LsApproachParams) -> LsStatus {
    guard(|| {
        *out_ref(out, "out")? = ApproachParams::default().into();
        Ok(LsStatus::Ok)
    })
}

/// Final approach length and loiter radius for wind speed `wind` (m/s).
///
/// # Safety
/// Pointers must be null or valid for reads (`params`) and writes (outputs).
#[no_mangle]
pub unsafe extern "C" fn ls_approach_geometry(
    params: *const LsApproachParams,
    wind: f64,
    x_app: *mut f64,
    r_loit: *mut f64,
) -> LsStatus {
    guard(|| {
        let p: ApproachParams = (*params.as_ref().ok_or_else(|| null("params"))?).into();
        p.validate()?;
        let (x, r) = approach_geometry(&p, wind)?;
        *out_ref(x_app, "x_app")? = x;
        *out_ref(r_loit, "r_loit")? = r;
        Ok(LsStatus::Ok)
    })
}

/// Altitude-dependent edge and distance thresholds of the default segmenter.
///
/// # Safety
/// Output pointers must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ls_thresholds_for_agl(agl: f64, canny: *mut f64, distance: *mut f64) -> LsStatus {
    guard(|| {
        let (c, d) = thresholds_for_agl(agl, &SegmenterConfig::default())?;
        *out_ref(canny, "canny")? = c;
        *out_ref(distance, "distance")? = d;
        Ok(LsStatus::Ok)
    })
}

/// Loads a classifier model from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_model_load(path: *const c_char, out: *mut *mut LsModel) -> LsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let model = ForestModel::load(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(LsModel(model)));
        Ok(LsStatus::Ok)
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from `ls_model_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ls_model_free(model: *mut LsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of region features a model expects.
#[no_mangle]
pub extern "C" fn ls_feature_count() -> usize {
    FEATURE_COUNT
}

/// Classifies one feature vector of `n` values; `label` is 1 for grass.
///
/// # Safety
/// `features` must point to `n` readable doubles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_model_predict(
    model: *const LsModel,
    features: *const f64,
    n: usize,
    label: *mut u8,
    p_grass: *mut f64,
) -> LsStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if features.is_null() {
            return Err(null("features"));
        }
        if n != FEATURE_COUNT {
            return Err(Fail(
                LsStatus::ModelMismatch,
                format!("expected {FEATURE_COUNT} features, got {n}"),
            ));
        }
        let mut fv = [0.0; FEATURE_COUNT];
        fv.copy_from_slice(std::slice::from_raw_parts(features, n));
        let (l, p) = predict(&model.0, &FeatureVector(fv));
        *out_ref(label, "label")? = l;
        *out_ref(p_grass, "p_grass")? = p;
        Ok(LsStatus::Ok)
    })
}

/// Builds a layer stack from row-major rasters (row 0 is the southern edge).
/// `valid` may be null when every elevation is valid; `grass` is 1 for grass.
/// The hazard thresholds are a slope in radians and a roughness in metres.
///
/// # Safety
/// `elevation` and `grass` (and `valid` if non-null) must point to
/// `cols * rows` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_stack_new(
    cols: usize,
    rows: usize,
    origin_x: f64,
    origin_y: f64,
    resolution: f64,
    elevation: *const f64,
    valid: *const u8,
    grass: *const u8,
    max_slope: f64,
    max_roughness: f64,
    out: *mut *mut LsStack,
) -> LsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if elevation.is_null() || grass.is_null() {
            return Err(null("elevation or grass"));
        }
        let geometry = GridGeometry {
            origin: [origin_x, origin_y],
            resolution,
            cols,
            rows,
        };
        geometry.validate()?;
        let n = cols * rows;
        let elev = std::slice::from_raw_parts(elevation, n);
        let valid = if valid.is_null() {
            vec![true; n]
        } else {
            std::slice::from_raw_parts(valid, n).iter().map(|&v| v != 0).collect()
        };
        let layer = Layer {
            values: Grid::from_vec(cols, rows, elev.to_vec()),
            valid: Grid::from_vec(cols, rows, valid),
        };
        let mask = Grid::from_vec(cols, rows, std::slice::from_raw_parts(grass, n).iter().map(|&g| u8::from(g != 0)).collect());
        let cfg = TerrainMapConfig {
            resolution,
            cols,
            rows,
            thresholds: HazardThresholds {
                max_slope,
                max_tri: max_roughness,
            },
            ..TerrainMapConfig::default()
        };
        cfg.validate()?;
        *out = Box::into_raw(Box::new(LsStack(GridStack::from_layers(geometry, layer, mask, &cfg))));
        Ok(LsStatus::Ok)
    })
}

/// Loads a stack from a directory of exported layers, recomputing derived
/// layers with the default thresholds.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_stack_import(dir: *const c_char, out: *mut *mut LsStack) -> LsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let stack = import_stack(&path_arg(dir, "dir")?, &TerrainMapConfig::default())?;
        *out = Box::into_raw(Box::new(LsStack(stack)));
        Ok(LsStatus::Ok)
    })
}

/// Writes every layer as a 16-bit PGM with a JSON sidecar into `dir`.
///
/// # Safety
/// `stack` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ls_stack_export(stack: *const LsStack, dir: *const c_char) -> LsStatus {
    guard(|| {
        let stack = stack.as_ref().ok_or_else(|| null("stack"))?;
        export_layers(&stack.0, &path_arg(dir, "dir")?)?;
        Ok(LsStatus::Ok)
    })
}

/// Releases a stack; null is ignored.
///
/// # Safety
/// `stack` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ls_stack_free(stack: *mut LsStack) {
    if !stack.is_null() {
        drop(Box::from_raw(stack));
    }
}

/// Grid size of a stack.
///
/// # Safety
/// `stack` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_stack_size(stack: *const LsStack, cols: *mut usize, rows: *mut usize) -> LsStatus {
    guard(|| {
        let g = &stack.as_ref().ok_or_else(|| null("stack"))?.0.geometry;
        *out_ref(cols, "cols")? = g.cols;
        *out_ref(rows, "rows")? = g.rows;
        Ok(LsStatus::Ok)
    })
}

/// Copies the distance-to-hazard layer (metres, row-major, `INFINITY` when
/// there is no hazard) into `out`, which holds `len` doubles.
///
/// # Safety
/// `stack` must be a live handle; `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ls_stack_hazard_distance(stack: *const LsStack, out: *mut f64, len: usize) -> LsStatus {
    guard(|| {
        let d = &stack.as_ref().ok_or_else(|| null("stack"))?.0.hazard_distance;
        if out.is_null() {
            return Err(null("out"));
        }
        if len != d.len() {
            return Err(Fail(LsStatus::InvalidInput, format!("buffer holds {len} values, layer has {}", d.len())));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(d.as_slice());
        Ok(LsStatus::Ok)
    })
}

/// Plans a touch-down and approach on `stack` for the wind velocity
/// `(wind_x, wind_y)` (direction the air moves towards, m/s). Returns
/// `Ok`, `NoCandidate` or `Infeasible`; `out` is written only on `Ok`.
///
/// # Safety
/// `stack` must be a live handle; `params` null (defaults) or readable;
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ls_plan(
    stack: *const LsStack,
    params: *const LsApproachParams,
    wind_x: f64,
    wind_y: f64,
    max_candidates: usize,
    out: *mut LsPlan,
) -> LsStatus {
    guard(|| {
        let stack = &stack.as_ref().ok_or_else(|| null("stack"))?.0;
        let out = out_ref(out, "out")?;
        let p: ApproachParams = params.as_ref().map_or_else(ApproachParams::default, |p| (*p).into());
        p.validate()?;
        let c = stack.geometry.center();
        let wind = WindEstimate::new(WindConfig {
            association_radius: f64::INFINITY,
            ..WindConfig::default()
        })?
        .update([wind_x, wind_y], c, c);
        let report = plan_approach(stack, &p, &wind, max_candidates)?;
        match report.plan.as_ref().filter(|_| report.feasible()) {
            Some(plan) => {
                *out = LsPlan {
                    td_col: plan.td_cell[0],
                    td_row: plan.td_cell[1],
                    touch_down: plan.x_td,
                    approach_point: plan.approach_point,
                    direction: plan.direction,
                    x_app: plan.x_app,
                    r_loit: plan.r_loit,
                    loiter_center: plan.loiter_center,
                    loiter_side: plan.loiter_side,
                    score: plan.score,
                    unverified_cells: plan.unverified_cells,
                    candidates_evaluated: report.candidates_evaluated,
                };
                Ok(LsStatus::Ok)
            }
            None if report.candidates_available == 0 => {
                set_error("no hazard-free grass cell");
                Ok(LsStatus::NoCandidate)
            }
            None => {
                set_error(format!("all {} evaluated candidates rejected", report.candidates_evaluated));
                Ok(LsStatus::Infeasible)
            }
        }
    })
}

/// Runs the full pipeline from a TOML configuration file and writes its
/// outputs to the configured directory. `outcome` receives 0 (feasible
/// plan), 2 (no candidate) or 3 (infeasible plan).
///
/// # Safety
/// `config` must be a NUL-terminated string; `outcome` writable.
#[no_mangle]
pub unsafe extern "C" fn ls_run_config(config: *const c_char, outcome: *mut i32) -> LsStatus {
    guard(|| {
        let outcome = out_ref(outcome, "outcome")?;
        let cfg = PipelineConfig::load(&path_arg(config, "config")?)?;
        let result = run_from_config(&cfg)?;
        *outcome = result.report.outcome.exit_code();
        Ok(LsStatus::Ok)
    })
}
