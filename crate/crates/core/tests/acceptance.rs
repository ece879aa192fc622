//! End-to-end acceptance checks. Runs sequentially and prints one PASS/FAIL
//! line per criterion; fails if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use landsite::approach_planner::{
    approach_geometry, check_candidate, plan_approach, recheck_clearance, ApproachParams, Gate, WindConfig, WindEstimate,
};
use landsite::classifier::{build_dataset, cross_validate, train, DatasetConfig, FeatureSet, ForestModel, TrainConfig};
use landsite::geom3d::{min_area_rect, winding_inside};
use landsite::imgproc::edt_squared;
use landsite::pipeline::{emit_report, run_pipeline, scene_tracks, Outcome, PipelineConfig, RunInputs, RunResult, STAGE_FRONTEND};
use landsite::raster::Grid;
use landsite::region_manager::{grade, RegionManagerConfig};
use landsite::scene::{generate_scene, Rect, SceneSpec, Terrain};
use landsite::segmenter::{thresholds_for_agl, SegmenterConfig};
use landsite::terrain_map::{normals_and_slope, rasterize_elevation, tri, GridGeometry, GridStack, Layer, TerrainMapConfig, TriMode};

const DATASET_SEED: u64 = 7;
const SCENE_SEED: u64 = 3;
/// Grass field of the evaluation scene.
const FIELD: Rect = Rect {
    x0: 200.0,
    y0: 130.0,
    x1: 320.0,
    y1: 210.0,
};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Shared state between criteria that reuse expensive artefacts.
#[derive(Default)]
struct Shared {
    model: Option<ForestModel>,
    run: Option<(RunResult, Terrain, Duration)>,
}

fn c1_approach_geometry() -> Check {
    let p = ApproachParams::default();
    let oracle = |w: f64| {
        let (v, gamma, dbeta) = (13.0f64, 4.0f64.to_radians(), 30.0f64.to_radians());
        let (phi, h, g) = (11.0f64.to_radians(), 12.0, 9.81);
        let x = (v * gamma.cos() - w * dbeta.cos()) / (v * gamma.sin()) * h;
        let r = (v * gamma.cos() + w).powi(2) / (g * phi.tan());
        (x, r)
    };
    let t = Instant::now();
    let a = approach_geometry(&p, 0.0).map_err(|e| e.to_string())?;
    let b = approach_geometry(&p, 5.5).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let mut ok = elapsed < Duration::from_millis(1);
    for ((x, r), (ex, er), w) in [(a, (171.6, 88.2), 0.0), (b, (108.6, 178.9), 5.5)] {
        let (ox, or) = oracle(w);
        ok &= (x - ex).abs() <= 0.1 && (r - er).abs() <= 0.1;
        ok &= (x - ox).abs() < 1e-9 && (r - or).abs() < 1e-9;
    }
    ensure(
        ok,
        format!(
            "w=0: ({:.2}, {:.2}); w=5.5: ({:.2}, {:.2}); {:?}",
            a.0, a.1, b.0, b.1, elapsed
        ),
    )
}

fn c2_thresholds() -> Check {
    let cfg = SegmenterConfig::default();
    let cubic = |c: [f64; 4], h: f64| c[0] * h.powi(3) + c[1] * h.powi(2) + c[2] * h + c[3];
    let canny = [-1.72e-6, 1.48e-3, -0.43, 62.97];
    let dtf = [-1.23e-6, 1.1e-3, -0.39, 56.82];
    let at = |h: f64| thresholds_for_agl(h, &cfg).map_err(|e| e.to_string());
    let (c100, d100) = at(100.0)?;
    let mut ok = (c100 - 33.05).abs() <= 0.01 && (d100 - 27.59).abs() <= 0.01;
    ok &= (c100 - cubic(canny, 100.0)).abs() < 1e-9 && (d100 - cubic(dtf, 100.0)).abs() < 1e-9;
    let lo = at(58.0)?;
    let hi = at(382.0)?;
    ok &= (lo.0 - cubic(canny, 58.0)).abs() < 1e-9 && (lo.1 - cubic(dtf, 58.0)).abs() < 1e-9;
    ok &= (hi.0 - cubic(canny, 382.0)).abs() < 1e-9 && (hi.1 - cubic(dtf, 382.0).max(0.0)).abs() < 1e-9;
    ok &= at(20.0)? == lo && at(57.9)? == lo && at(382.1)? == hi && at(900.0)? == hi;
    ensure(
        ok,
        format!(
            "100 m: ({c100:.3}, {d100:.3}); 58 m: ({:.2}, {:.2}); 382 m: ({:.2}, {:.2})",
            lo.0, lo.1, hi.0, hi.1
        ),
    )
}

fn c3_edt() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0usize;
    for i in 0..100 {
        let density = [0.002, 0.01, 0.05, 0.3][i % 4];
        let mask = Grid::from_fn(64, 64, |_, _| u8::from(rng.gen_bool(density)));
        if mask.as_slice().iter().all(|&v| v == 0) {
            return Err("empty mask drawn".into());
        }
        let fast = edt_squared(&mask);
        let set: Vec<(i64, i64)> = mask
            .indexed()
            .filter(|(_, _, &v)| v != 0)
            .map(|(x, y, _)| (x as i64, y as i64))
            .collect();
        for (x, y, &d) in fast.indexed() {
            let brute = set
                .iter()
                .map(|&(a, b)| ((a - x as i64).pow(2) + (b - y as i64).pow(2)) as u64)
                .min()
                .unwrap();
            mismatches += usize::from(brute != d);
        }
    }
    let elapsed = t.elapsed();
    ensure(
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!("{mismatches} mismatching pixels over 100 masks, {elapsed:?}"),
    )
}

fn c4_slope_and_tri() -> Check {
    let n = 40;
    let mut worst = 0.0f64;
    for deg in [5.0f64, 15.0, 30.0] {
        let t = deg.to_radians().tan();
        let elev = Layer {
            values: Grid::from_fn(n, n, |c, _| c as f64 * t),
            valid: Grid::new(n, n, true),
        };
        let (_, slope) = normals_and_slope(&elev, 1.0);
        for r in 1..n - 1 {
            for c in 1..n - 1 {
                let s = slope.get(c, r).ok_or("interior slope invalid")?;
                worst = worst.max((s - deg.to_radians()).abs());
            }
        }
    }
    let mut spike = Layer {
        values: Grid::new(5, 5, 0.0),
        valid: Grid::new(5, 5, true),
    };
    spike.values[(2, 2)] = 1.0;
    let centre = tri(&spike, TriMode::RootSumSquare).get(2, 2).ok_or("TRI invalid")?;
    ensure(
        worst < 1e-4 && (centre - 8f64.sqrt()).abs() <= 1e-9,
        format!("max slope error {worst:.2e} rad; spike TRI {centre:.12}"),
    )
}

fn span(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    hi - lo
}

fn c5_geometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..200 {
        let n = rng.gen_range(3..60);
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen_range(-40.0..40.0), rng.gen_range(-15.0..15.0)])
            .collect();
        let q = min_area_rect(&pts).map_err(|e| e.to_string())?;
        let area = 0.5
            * (0..4)
                .map(|i| q[i][0] * q[(i + 1) % 4][1] - q[(i + 1) % 4][0] * q[i][1])
                .sum::<f64>()
                .abs();
        let sweep = (0..3600)
            .map(|k| {
                let (s, c) = (k as f64 / 3600.0 * std::f64::consts::FRAC_PI_2).sin_cos();
                span(pts.iter().map(|p| c * p[0] + s * p[1])) * span(pts.iter().map(|p| -s * p[0] + c * p[1]))
            })
            .fold(f64::INFINITY, f64::min);
        worst_excess = worst_excess.max(area - sweep);
    }
    let mut disagreements = 0;
    for _ in 0..10_000 {
        let k = rng.gen_range(3..10);
        let mut angles: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let r = rng.gen_range(1.0..8.0);
        let poly: Vec<[f64; 2]> = angles.iter().map(|a| [r * a.cos(), r * a.sin()]).collect();
        let p = [rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0)];
        let half_planes = (0..k).all(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % k]);
            (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
        });
        disagreements += usize::from(winding_inside(p, &poly) != half_planes);
    }
    ensure(
        worst_excess <= 1e-6 && disagreements == 0,
        format!("rect area - sweep minimum <= {worst_excess:.2e}; winding disagreements {disagreements}/10000"),
    )
}

fn c6_grade() -> Check {
    let cfg = RegionManagerConfig::default();
    let (a, n) = (cfg.a_min, cfg.n_obs_min);
    let g = grade(19, 20, a, a, n);
    let ok = (g - 0.95).abs() < 1e-12
        && grade(19, 20, a * 10.0, a, n) == 0.95
        && grade(19, 20, a - 1e-9, a, n) == 0.0
        && grade(n - 1, n - 1, a * 10.0, a, n) == 0.0
        && grade(n, n, a, a, n) == 1.0;
    ensure(ok, format!("grade(19, 20, A_min) = {g}; gates at A_min = {a} m2, n_obs_min = {n}"))
}

fn c7_classifier(shared: &mut Shared) -> Check {
    let t = Instant::now();
    let ds = build_dataset(&DatasetConfig::default(), DATASET_SEED).map_err(|e| e.to_string())?;
    let base = TrainConfig {
        depths: vec![4, 8, 12],
        min_samples: vec![2, 10],
        n_trees: 50,
        folds: 10,
        ..TrainConfig::default()
    };
    let cv = |set: FeatureSet, seed: u64| -> Result<f64, String> {
        let cfg = TrainConfig {
            feature_indices: set.indices(),
            seed,
            ..base.clone()
        };
        Ok(cross_validate(&ds.x, &ds.y, &cfg).map_err(|e| e.to_string())?.best.cv_error)
    };
    let full = cv(FeatureSet::All, 0)?;
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..10 {
        let (rgb, rgb_hsv) = (cv(FeatureSet::Rgb, seed)?, cv(FeatureSet::RgbHsv, seed)?);
        wins += usize::from(rgb_hsv <= rgb);
        pairs.push(format!("{:.3}/{:.3}", rgb_hsv, rgb));
    }
    let elapsed = t.elapsed();
    let (model, _) = train(&ds.x, &ds.y, &TrainConfig { seed: DATASET_SEED, ..base }).map_err(|e| e.to_string())?;
    shared.model = Some(model);
    let n = ds.len();
    let grass = ds.grass_count();
    ensure(
        n >= 600 && full <= 0.10 && wins >= 8 && elapsed < Duration::from_secs(120),
        format!(
            "{n} regions ({grass} grass); CV error {:.2}%; RGB+HSV <= RGB on {wins}/10 seeds [{}]; {elapsed:.1?}",
            100.0 * full,
            pairs.join(" ")
        ),
    )
}

fn evaluation_run(model: &ForestModel) -> Result<(RunResult, Terrain, Duration), String> {
    let cfg = PipelineConfig {
        scene_spec: Some(SceneSpec::evaluation()),
        seed: SCENE_SEED,
        ..PipelineConfig::default()
    };
    let t = Instant::now();
    let scene = generate_scene(&SceneSpec::evaluation(), SCENE_SEED).map_err(|e| e.to_string())?;
    let terrain = scene.terrain.clone();
    let tracks = scene_tracks(&scene, &cfg);
    let inputs = RunInputs {
        scene,
        tracks,
        model: model.clone(),
        frames_dir: None,
    };
    let result = run_pipeline(&cfg, &inputs).map_err(|e| e.to_string())?;
    Ok((result, terrain, t.elapsed()))
}

fn c8_end_to_end(shared: &mut Shared) -> Check {
    let model = shared.model.as_ref().ok_or("no model (classifier criterion failed)")?;
    let (result, terrain, elapsed) = evaluation_run(model)?;
    let report = &result.report;
    let centre = FIELD.center();
    let (field_sites, others): (Vec<_>, Vec<_>) = report.sites.iter().partition(|s| {
        let poly: Vec<[f64; 2]> = s.corners.iter().map(|c| [c[0], c[1]]).collect();
        winding_inside(centre, &poly)
    });
    let field_grade = field_sites.iter().map(|s| s.grade).fold(0.0, f64::max);
    let other_grade = others.iter().map(|s| s.grade).fold(0.0, f64::max);
    let separation = field_grade - other_grade;

    let params = ApproachParams::default();
    let plan = report.plan.as_ref().filter(|_| report.outcome == Outcome::Feasible);
    let (td_ok, clearance, recheck_ok, td) = match plan {
        Some(p) => {
            let m = params.safety_margin;
            let safe = Rect::new(FIELD.x0 + m, FIELD.y0 + m, FIELD.x1 - m, FIELD.y1 - m);
            // aircraft height over the true terrain beyond the final 35 m
            let z_td = terrain.height_at(p.x_td[0], p.x_td[1]);
            let mut min = f64::INFINITY;
            let mut s = 35.0;
            while s <= p.x_app {
                let (x, y) = (p.x_td[0] + s * p.direction[0], p.x_td[1] + s * p.direction[1]);
                min = min.min(z_td + params.h_app * s / p.x_app - terrain.height_at(x, y));
                s += 0.25;
            }
            let stack = &result.final_run.as_ref().ok_or("no backend run")?.stack;
            let re = recheck_clearance(stack, p, params.h_app, 35.0);
            (safe.contains(p.x_td[0], p.x_td[1]), min, re.passes(params.safety_margin), p.x_td)
        }
        None => (false, f64::NAN, false, [f64::NAN; 3]),
    };
    let detail = format!(
        "field grade {field_grade:.3} vs best other {other_grade:.3} (separation {separation:.3}); \
         touch-down ({:.1}, {:.1}) in safe zone: {td_ok}; clearance beyond 35 m {clearance:.2} m, recheck {recheck_ok}; {elapsed:.1?}",
        td[0], td[1]
    );
    let ok = separation >= 0.3
        && td_ok
        && clearance >= params.safety_margin
        && recheck_ok
        && elapsed < Duration::from_secs(120);
    shared.run = Some((result, terrain, elapsed));
    ensure(ok, detail)
}

fn flat_stack(n: usize, building: Option<[f64; 2]>) -> GridStack {
    let g = GridGeometry::centered([0.0, 0.0], 1.0, n, n);
    let in_house = |x: f64, y: f64| building.is_some_and(|[bx, by]| (x - bx).abs() < 4.0 && (y - by).abs() < 4.0);
    let elevation = Layer {
        values: Grid::from_fn(n, n, |c, r| {
            let [x, y] = g.cell_center(c, r);
            if in_house(x, y) {
                8.0
            } else {
                0.0
            }
        }),
        valid: Grid::new(n, n, true),
    };
    let grass = Grid::from_fn(n, n, |c, r| {
        let [x, y] = g.cell_center(c, r);
        u8::from(!in_house(x, y))
    });
    GridStack::from_layers(g, elevation, grass, &TerrainMapConfig::default())
}

fn c9_obstruction() -> Check {
    let p = ApproachParams::default();
    let wind = WindEstimate::new(WindConfig::default())
        .map_err(|e| e.to_string())?
        .update([5.5, 0.0], [0.0; 2], [0.0; 2]);
    let open = flat_stack(240, None);
    let best = plan_approach(&open, &p, &wind, 10)
        .map_err(|e| e.to_string())?
        .plan
        .ok_or("no plan on open ground")?;
    let house = [best.x_td[0] + 60.0 * best.direction[0], best.x_td[1] + 60.0 * best.direction[1]];
    let blocked = flat_stack(240, Some(house));
    let td = (best.td_cell[0], best.td_cell[1]);
    let gate = match check_candidate(&blocked, &p, &wind, td).map_err(|e| e.to_string())? {
        Ok(_) => None,
        Err(f) => Some(f.gate),
    };
    let rep = plan_approach(&blocked, &p, &wind, 5000).map_err(|e| e.to_string())?;
    let other = rep.plan.as_ref().filter(|q| q.feasible && q.td_cell != best.td_cell);
    let clear = other.is_some_and(|q| recheck_clearance(&blocked, q, p.h_app, 35.0).passes(p.safety_margin));
    ensure(
        gate == Some(Gate::LinearPath) && other.is_some() && clear,
        format!(
            "building at ({:.0}, {:.0}): original cell rejected at {gate:?}; new touch-down {:?}, clear {clear}",
            house[0],
            house[1],
            other.map(|q| [q.x_td[0].round(), q.x_td[1].round()])
        ),
    )
}

fn c10_performance(shared: &Shared) -> Check {
    let (result, _, _) = shared.run.as_ref().ok_or("no end-to-end run")?;
    let fe = result.report.timing.get(STAGE_FRONTEND).ok_or("no frontend timing")?;

    let n_points = 4_200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let points: Vec<_> = (0..n_points)
        .map(|_| {
            let (x, y): (f64, f64) = (rng.gen_range(-150.0..150.0), rng.gen_range(-150.0..150.0));
            let z = 0.01 * x + 0.3 * (x / 17.0).sin() * (y / 23.0).cos() + rng.gen_range(-0.02..0.02);
            nalgebra::Point3::new(x, y, z)
        })
        .collect();
    let cfg = TerrainMapConfig::default();
    let t = Instant::now();
    let geom = cfg.geometry([0.0, 0.0]);
    let elev = rasterize_elevation(&points, &geom, cfg.idw_radius_cells * cfg.resolution, cfg.idw_power);
    let stack = GridStack::from_layers(geom, elev, Grid::new(geom.cols, geom.rows, 1u8), &cfg);
    let layers = t.elapsed();
    let wind = WindEstimate::new(WindConfig::default())
        .map_err(|e| e.to_string())?
        .update([3.0, 1.0], [0.0; 2], [0.0; 2]);
    let rep = plan_approach(&stack, &ApproachParams::default(), &wind, 2000).map_err(|e| e.to_string())?;
    let total = t.elapsed();
    ensure(
        fe.mean_ms <= 250.0 && total <= Duration::from_secs(5) && rep.feasible(),
        format!(
            "frontend {:.1} ± {:.1} ms/frame (n={}); {}x{} layers from {n_points} points {layers:.2?}, with plan {total:.2?}",
            fe.mean_ms, fe.std_ms, fe.samples, geom.cols, geom.rows
        ),
    )
}

fn c11_determinism(shared: &Shared) -> Check {
    let (first, _, _) = shared.run.as_ref().ok_or("no end-to-end run")?;
    let model = shared.model.as_ref().ok_or("no model")?;
    let (second, _, _) = evaluation_run(model)?;
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    let mut texts = Vec::new();
    for (run, dir) in [first, &second].into_iter().zip(&dirs) {
        emit_report(run, dir.path()).map_err(|e| e.to_string())?;
        let raw = std::fs::read_to_string(dir.path().join("report.json")).map_err(|e| e.to_string())?;
        let mut v: serde_json::Value = serde_json::from_str(&raw).map_err(|e| e.to_string())?;
        v.as_object_mut().ok_or("report is not an object")?.remove("timing");
        texts.push(serde_json::to_string(&v).map_err(|e| e.to_string())?);
    }
    ensure(
        texts[0] == texts[1],
        format!("report.json without timing: {} bytes, identical: {}", texts[0].len(), texts[0] == texts[1]),
    )
}

#[test]
fn acceptance() {
    let mut shared = Shared::default();
    let mut failed = Vec::new();
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut(&mut Shared) -> Check| {
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&mut shared)))
            .unwrap_or_else(|e| Err(format!("panicked: {:?}", e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())))));
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail}"),
            Err(detail) => {
                println!("FAIL {id:>2} {name}: {detail}");
                failed.push(id);
            }
        }
    };
    run(1, "approach geometry", &mut |_| c1_approach_geometry());
    run(2, "segmentation thresholds", &mut |_| c2_thresholds());
    run(3, "distance transform", &mut |_| c3_edt());
    run(4, "slope and roughness", &mut |_| c4_slope_and_tri());
    run(5, "rectangle and winding", &mut |_| c5_geometry());
    run(6, "region grade", &mut |_| c6_grade());
    run(7, "classifier", &mut |s| c7_classifier(s));
    run(8, "end-to-end separation", &mut |s| c8_end_to_end(s));
    run(9, "obstruction", &mut |_| c9_obstruction());
    run(10, "performance", &mut |s| c10_performance(s));
    run(11, "determinism", &mut |s| c11_determinism(s));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
