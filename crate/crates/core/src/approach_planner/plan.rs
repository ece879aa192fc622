use serde::{Deserialize, Serialize};

use super::raster_path::{circle_cells, supercover};
use super::{approach_geometry, ApproachParams, WindEstimate};
use crate::error::{Error, Result};
use crate::terrain_map::GridStack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    TouchDown,
    LinearPath,
    LoiterCircle,
}

/// Why one touch-down candidate was rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateFailure {
    pub candidate: [usize; 2],
    pub gate: Gate,
    /// Offending cell; `None` when the checked geometry leaves the grid.
    pub cell: Option<[usize; 2]>,
    pub clearance: Option<f64>,
    pub required: Option<f64>,
}

/// Clearance of the final approach over one traversed cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearanceSample {
    /// Horizontal distance before touch-down, m.
    pub distance: f64,
    pub clearance: f64,
    pub required: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachPlan {
    pub td_cell: [usize; 2],
    pub x_td: [f64; 3],
    pub approach_point: [f64; 3],
    /// Unit horizontal direction from touch-down towards the approach point.
    pub direction: [f64; 2],
    pub wind_speed: f64,
    pub x_app: f64,
    pub r_loit: f64,
    pub loiter_center: [f64; 3],
    /// +1 when the loiter centre lies left of the approach direction, -1 right.
    pub loiter_side: i8,
    pub path_cells: Vec<[usize; 2]>,
    pub loiter_cells: Vec<[usize; 2]>,
    /// Ordered by distance before touch-down.
    pub clearance_profile: Vec<ClearanceSample>,
    pub min_loiter_clearance: Option<f64>,
    /// Traversed cells without a valid elevation.
    pub unverified_cells: usize,
    /// Length of the final approach outside the grid, m.
    pub path_outside_grid: f64,
    pub loiter_leaves_grid: bool,
    pub feasible: bool,
    /// Hazard distance at the touch-down cell, m.
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub plan: Option<ApproachPlan>,
    pub candidates_available: usize,
    pub candidates_evaluated: usize,
    pub failures: Vec<GateFailure>,
}

impl PlanReport {
    pub fn feasible(&self) -> bool {
        self.plan.as_ref().is_some_and(|p| p.feasible)
    }
}

/// Grass, hazard-free cells by descending hazard distance; ties go to the
/// cell nearer the grid centre.
fn candidates(stack: &GridStack) -> Vec<(usize, usize)> {
    let g = &stack.geometry;
    let center = g.center();
    let mut v: Vec<(f64, f64, usize, usize)> = stack
        .grass_mask
        .indexed()
        .filter(|&(c, r, &m)| m != 0 && stack.fused_hazard[(c, r)] == 0 && stack.elevation.valid[(c, r)])
        .map(|(c, r, _)| {
            let [x, y] = g.cell_center(c, r);
            let d2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
            (stack.hazard_distance[(c, r)], d2, r, c)
        })
        .collect();
    v.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    v.into_iter().map(|(_, _, r, c)| (c, r)).collect()
}

fn add(p: [f64; 2], d: [f64; 2], s: f64) -> [f64; 2] {
    [p[0] + s * d[0], p[1] + s * d[1]]
}

/// Mean hazard distance under a set of cells, infinite values capped.
fn mean_distance(stack: &GridStack, cells: &[(usize, usize)]) -> f64 {
    if cells.is_empty() {
        return 0.0;
    }
    cells.iter().map(|&c| stack.hazard_distance[c].min(1e6)).sum::<f64>() / cells.len() as f64
}

struct Geometry {
    dir: [f64; 2],
    wind_speed: f64,
    x_app: f64,
    r_loit: f64,
}

enum Outcome {
    Pass(ApproachPlan),
    Fail(GateFailure),
}

fn evaluate(stack: &GridStack, p: &ApproachParams, geo: &Geometry, cand: (usize, usize)) -> Outcome {
    let g = &stack.geometry;
    let dir = geo.dir;
    let td = g.cell_center(cand.0, cand.1);
    let e_td = stack.elevation.values[cand];
    let fail = |gate, cell: Option<(usize, usize)>, clearance, required| {
        Outcome::Fail(GateFailure {
            candidate: [cand.0, cand.1],
            gate,
            cell: cell.map(|(c, r)| [c, r]),
            clearance,
            required,
        })
    };

    // touch-down interval
    let (a, b) = (add(td, dir, -p.delta_td), add(td, dir, p.delta_td));
    if g.cell_of(a[0], a[1]).is_none() || g.cell_of(b[0], b[1]).is_none() {
        return fail(Gate::TouchDown, None, None, None);
    }
    for s in supercover(g, a, b) {
        if stack.fused_hazard[s.cell] != 0 {
            return fail(Gate::TouchDown, Some(s.cell), None, None);
        }
    }

    // final approach from touch-down (t = 0) to the approach point (t = 1)
    let app = add(td, dir, geo.x_app);
    let spans = supercover(g, td, app);
    let t_td = (p.delta_td / geo.x_app).min(1.0);
    let covered: f64 = spans.iter().map(|s| s.t1).fold(0.0, f64::max);
    let mut profile = Vec::new();
    let mut unverified = 0usize;
    for s in &spans {
        if s.t1 <= t_td {
            continue;
        }
        let t = s.t0.max(t_td);
        let nominal = p.h_app * t;
        let required = p.safety_margin.min(p.flare_clearance_ratio * nominal);
        let Some(elev) = stack.elevation.get(s.cell.0, s.cell.1) else {
            if p.unknown_is_obstacle {
                return fail(Gate::LinearPath, Some(s.cell), None, Some(required));
            }
            unverified += 1;
            continue;
        };
        let clearance = e_td + nominal - elev;
        if clearance < required {
            return fail(Gate::LinearPath, Some(s.cell), Some(clearance), Some(required));
        }
        profile.push(ClearanceSample {
            distance: t * geo.x_app,
            clearance,
            required,
        });
    }
    if p.unknown_is_obstacle && covered < 1.0 {
        return fail(Gate::LinearPath, None, None, None);
    }
    profile.sort_by(|a, b| a.distance.total_cmp(&b.distance));

    // loiter-down circle through the approach point, on the safer side
    let left = [-dir[1], dir[0]];
    let centers = [add(app, left, geo.r_loit), add(app, left, -geo.r_loit)];
    let rings = centers.map(|c| circle_cells(g, c, geo.r_loit));
    let side = if mean_distance(stack, &rings[1]) > mean_distance(stack, &rings[0]) {
        1
    } else {
        0
    };
    let center = centers[side];
    let loiter_alt = e_td + p.h_app;
    let mut min_loiter: Option<f64> = None;
    for &cell in &rings[side] {
        let Some(elev) = stack.elevation.get(cell.0, cell.1) else {
            if p.unknown_is_obstacle {
                return fail(Gate::LoiterCircle, Some(cell), None, Some(p.safety_margin));
            }
            unverified += 1;
            continue;
        };
        let clearance = loiter_alt - elev;
        if clearance < p.safety_margin {
            return fail(Gate::LoiterCircle, Some(cell), Some(clearance), Some(p.safety_margin));
        }
        min_loiter = Some(min_loiter.map_or(clearance, |m: f64| m.min(clearance)));
    }
    let extent = [
        g.origin,
        [
            g.origin[0] + g.cols as f64 * g.resolution,
            g.origin[1] + g.rows as f64 * g.resolution,
        ],
    ];
    let leaves = (0..2).any(|k| center[k] - geo.r_loit < extent[0][k] || center[k] + geo.r_loit > extent[1][k]);
    if p.unknown_is_obstacle && leaves {
        return fail(Gate::LoiterCircle, None, None, None);
    }

    Outcome::Pass(ApproachPlan {
        td_cell: [cand.0, cand.1],
        x_td: [td[0], td[1], e_td],
        approach_point: [app[0], app[1], e_td + p.h_app],
        direction: dir,
        wind_speed: geo.wind_speed,
        x_app: geo.x_app,
        r_loit: geo.r_loit,
        loiter_center: [center[0], center[1], loiter_alt],
        loiter_side: if side == 0 { 1 } else { -1 },
        path_cells: spans.iter().map(|s| [s.cell.0, s.cell.1]).collect(),
        loiter_cells: rings[side].iter().map(|&(c, r)| [c, r]).collect(),
        clearance_profile: profile,
        min_loiter_clearance: min_loiter,
        unverified_cells: unverified,
        path_outside_grid: (1.0 - covered).max(0.0) * geo.x_app,
        loiter_leaves_grid: leaves,
        feasible: true,
        score: stack.hazard_distance[cand],
    })
}

fn geometry(params: &ApproachParams, wind: &WindEstimate) -> Result<Geometry> {
    params.validate()?;
    if wind.n_measurements == 0 {
        return Err(Error::InvalidInput("wind estimate has no measurements".into()));
    }
    let wind_speed = wind.speed();
    let (x_app, r_loit) = approach_geometry(params, wind_speed)?;
    Ok(Geometry {
        dir: wind.direction().unwrap_or([1.0, 0.0]),
        wind_speed,
        x_app,
        r_loit,
    })
}

/// Picks the safest touch-down cell whose touch-down interval, final approach
/// and loiter circle pass the collision gates. The approach runs along the
/// estimated wind direction; in calm air it defaults to east.
pub fn plan_approach(stack: &GridStack, params: &ApproachParams, wind: &WindEstimate, max_candidates: usize) -> Result<PlanReport> {
    let geo = geometry(params, wind)?;
    let cands = candidates(stack);
    let mut report = PlanReport {
        candidates_available: cands.len(),
        ..PlanReport::default()
    };
    for &cand in cands.iter().take(max_candidates) {
        report.candidates_evaluated += 1;
        match evaluate(stack, params, &geo, cand) {
            Outcome::Pass(plan) => {
                report.plan = Some(plan);
                break;
            }
            Outcome::Fail(f) => report.failures.push(f),
        }
    }
    Ok(report)
}

/// Runs the gates for a single touch-down cell.
pub fn check_candidate(
    stack: &GridStack,
    params: &ApproachParams,
    wind: &WindEstimate,
    cell: (usize, usize),
) -> Result<std::result::Result<ApproachPlan, GateFailure>> {
    let geo = geometry(params, wind)?;
    if !stack.elevation.valid[cell] {
        return Err(Error::InvalidInput(format!("cell {cell:?} has no elevation")));
    }
    Ok(match evaluate(stack, params, &geo, cell) {
        Outcome::Pass(p) => Ok(p),
        Outcome::Fail(f) => Err(f),
    })
}

/// Point-sampled re-check of a plan against the elevation layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recheck {
    /// Smallest clearance on the final approach beyond `from_distance`.
    pub min_path_clearance: Option<f64>,
    pub min_loiter_clearance: Option<f64>,
    pub from_distance: f64,
}

impl Recheck {
    pub fn passes(&self, margin: f64) -> bool {
        self.min_path_clearance.is_none_or(|c| c >= margin) && self.min_loiter_clearance.is_none_or(|c| c >= margin)
    }
}

/// Samples the final approach beyond `from_distance` metres before touch-down
/// and the loiter circle every tenth of a cell and reports the smallest
/// clearance over mapped cells.
pub fn recheck_clearance(stack: &GridStack, plan: &ApproachPlan, h_app: f64, from_distance: f64) -> Recheck {
    let g = &stack.geometry;
    let step = 0.1 * g.resolution;
    let e_td = plan.x_td[2];
    let sample = |x: f64, y: f64| g.cell_of(x, y).and_then(|(c, r)| stack.elevation.get(c, r));
    let mut path: Option<f64> = None;
    let n = (plan.x_app / step).ceil() as usize;
    for k in 0..=n {
        let d = (k as f64 * step).min(plan.x_app);
        if d < from_distance {
            continue;
        }
        let x = plan.x_td[0] + d * plan.direction[0];
        let y = plan.x_td[1] + d * plan.direction[1];
        if let Some(e) = sample(x, y) {
            let c = e_td + h_app * d / plan.x_app - e;
            path = Some(path.map_or(c, |m: f64| m.min(c)));
        }
    }
    let mut loiter: Option<f64> = None;
    let m = (std::f64::consts::TAU * plan.r_loit / step).ceil() as usize;
    for k in 0..m {
        let a = std::f64::consts::TAU * k as f64 / m as f64;
        let x = plan.loiter_center[0] + plan.r_loit * a.cos();
        let y = plan.loiter_center[1] + plan.r_loit * a.sin();
        if let Some(e) = sample(x, y) {
            let c = plan.loiter_center[2] - e;
            loiter = Some(loiter.map_or(c, |m: f64| m.min(c)));
        }
    }
    Recheck {
        min_path_clearance: path,
        min_loiter_clearance: loiter,
        from_distance,
    }
}
