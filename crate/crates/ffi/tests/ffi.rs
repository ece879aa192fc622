use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use landsite::classifier::{build_dataset, train, DatasetConfig, TrainConfig};
use landsite::pipeline::PipelineConfig;
use landsite::scene::SceneSpec;
use landsite_ffi::*;

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ls_last_error_message()) }.to_string_lossy().into_owned()
}

fn write_model(dir: &Path) -> std::path::PathBuf {
    let ds = build_dataset(
        &DatasetConfig {
            target_regions: 40,
            ..DatasetConfig::default()
        },
        1,
    )
    .unwrap();
    let cfg = TrainConfig {
        depths: vec![4],
        min_samples: vec![2],
        n_trees: 5,
        folds: 3,
        seed: 1,
        ..TrainConfig::default()
    };
    let path = dir.join("model.json");
    train(&ds.x, &ds.y, &cfg).unwrap().0.save(&path).unwrap();
    path
}

/// Flat all-grass square with an 8 m block on its eastern side.
fn stack(n: usize) -> *mut LsStack {
    let mut elevation = vec![0.0; n * n];
    for r in n / 2 - 4..n / 2 + 4 {
        for c in n - 30..n - 22 {
            elevation[r * n + c] = 8.0;
        }
    }
    let grass = vec![1u8; n * n];
    let mut out = ptr::null_mut();
    let s = unsafe {
        ls_stack_new(
            n,
            n,
            -(n as f64) / 2.0,
            -(n as f64) / 2.0,
            1.0,
            elevation.as_ptr(),
            ptr::null(),
            grass.as_ptr(),
            0.105,
            0.3,
            &mut out,
        )
    };
    assert_eq!(s, LsStatus::Ok, "{}", last_error());
    out
}

#[test]
fn version_and_defaults() {
    let v = unsafe { CStr::from_ptr(ls_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let mut p = std::mem::MaybeUninit::<LsApproachParams>::uninit();
    assert_eq!(unsafe { ls_approach_params_default(p.as_mut_ptr()) }, LsStatus::Ok);
    let p = unsafe { p.assume_init() };
    assert_eq!(p.v_land, 13.0);
    assert_eq!(p.unknown_is_obstacle, 0);

    let (mut x, mut r) = (0.0, 0.0);
    assert_eq!(unsafe { ls_approach_geometry(&p, 5.5, &mut x, &mut r) }, LsStatus::Ok);
    assert!((x - 108.6).abs() < 0.1 && (r - 178.9).abs() < 0.1, "{x} {r}");
    assert_eq!(unsafe { ls_approach_geometry(&p, 20.0, &mut x, &mut r) }, LsStatus::InfeasibleWind);
    assert!(!last_error().is_empty());

    let (mut c, mut d) = (0.0, 0.0);
    assert_eq!(unsafe { ls_thresholds_for_agl(100.0, &mut c, &mut d) }, LsStatus::Ok);
    assert!((c - 33.05).abs() < 0.01 && (d - 27.59).abs() < 0.01);
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(ls_approach_params_default(ptr::null_mut()), LsStatus::NullPointer);
        assert_eq!(last_error(), "out is null");
        let mut x = 0.0;
        assert_eq!(ls_approach_geometry(ptr::null(), 0.0, &mut x, &mut x), LsStatus::NullPointer);
        assert_eq!(ls_plan(ptr::null(), ptr::null(), 0.0, 0.0, 10, ptr::null_mut()), LsStatus::NullPointer);
        assert_eq!(ls_model_load(ptr::null(), ptr::null_mut()), LsStatus::NullPointer);
        let mut outcome = 0;
        assert_eq!(ls_run_config(ptr::null(), &mut outcome), LsStatus::NullPointer);
        ls_model_free(ptr::null_mut());
        ls_stack_free(ptr::null_mut());
    }
}

#[test]
fn model_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = c_path(&write_model(dir.path()));
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { ls_model_load(path.as_ptr(), &mut model) }, LsStatus::Ok);
    assert_eq!(ls_feature_count(), 18);

    let features = [0.5; 18];
    let (mut label, mut p) = (9u8, -1.0);
    let s = unsafe { ls_model_predict(model, features.as_ptr(), 18, &mut label, &mut p) };
    assert_eq!(s, LsStatus::Ok);
    assert!(label <= 1 && (0.0..=1.0).contains(&p));
    let s = unsafe { ls_model_predict(model, features.as_ptr(), 17, &mut label, &mut p) };
    assert_eq!(s, LsStatus::ModelMismatch);
    unsafe { ls_model_free(model) };

    let missing = c_path(&dir.path().join("missing.json"));
    assert_eq!(unsafe { ls_model_load(missing.as_ptr(), &mut model) }, LsStatus::Io);
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "not json").unwrap();
    assert_eq!(unsafe { ls_model_load(c_path(&garbage).as_ptr(), &mut model) }, LsStatus::ModelMismatch);
}

#[test]
fn stack_plan_and_export() {
    let n = 200;
    let s = stack(n);
    let (mut cols, mut rows) = (0, 0);
    assert_eq!(unsafe { ls_stack_size(s, &mut cols, &mut rows) }, LsStatus::Ok);
    assert_eq!((cols, rows), (n, n));

    let mut dist = vec![0.0; n * n];
    assert_eq!(unsafe { ls_stack_hazard_distance(s, dist.as_mut_ptr(), dist.len()) }, LsStatus::Ok);
    // the block's western edge is steep
    assert_eq!(dist[(n / 2) * n + n - 30], 0.0);
    assert!(dist[(n / 2) * n + n / 2] > 50.0);
    assert_eq!(unsafe { ls_stack_hazard_distance(s, dist.as_mut_ptr(), 3) }, LsStatus::InvalidInput);

    let mut plan = LsPlan::default();
    assert_eq!(unsafe { ls_plan(s, ptr::null(), 3.0, 0.0, 500, &mut plan) }, LsStatus::Ok, "{}", last_error());
    // lands against the wind, so the approach comes from the east
    assert!(plan.direction[0] > 0.9, "{:?}", plan.direction);
    let d = &plan.direction;
    let ap = plan.approach_point;
    assert!((ap[0] - plan.touch_down[0] - plan.x_app * d[0]).abs() < 1e-9);
    assert!((ap[1] - plan.touch_down[1] - plan.x_app * d[1]).abs() < 1e-9);
    assert!(plan.score >= 2.0 && plan.loiter_side.abs() == 1);

    let dir = tempfile::tempdir().unwrap();
    let layers = c_path(dir.path());
    assert_eq!(unsafe { ls_stack_export(s, layers.as_ptr()) }, LsStatus::Ok);
    let mut imported = ptr::null_mut();
    assert_eq!(unsafe { ls_stack_import(layers.as_ptr(), &mut imported) }, LsStatus::Ok, "{}", last_error());
    let mut again = LsPlan::default();
    assert_eq!(unsafe { ls_plan(imported, ptr::null(), 3.0, 0.0, 500, &mut again) }, LsStatus::Ok);
    assert_eq!((again.td_col, again.td_row), (plan.td_col, plan.td_row));
    unsafe {
        ls_stack_free(imported);
        ls_stack_free(s);
    }
}

#[test]
fn plan_outcomes() {
    let n = 60;
    let elevation = vec![0.0; n * n];
    let no_grass = vec![0u8; n * n];
    let mut s = ptr::null_mut();
    let st = unsafe {
        ls_stack_new(n, n, 0.0, 0.0, 1.0, elevation.as_ptr(), ptr::null(), no_grass.as_ptr(), 0.105, 0.3, &mut s)
    };
    assert_eq!(st, LsStatus::Ok);
    let mut plan = LsPlan::default();
    assert_eq!(unsafe { ls_plan(s, ptr::null(), 0.0, 0.0, 10, &mut plan) }, LsStatus::NoCandidate);
    unsafe { ls_stack_free(s) };

    // a 60 m field is far shorter than the final approach at 12 m height
    let grass = vec![1u8; n * n];
    let st = unsafe {
        ls_stack_new(n, n, 0.0, 0.0, 1.0, elevation.as_ptr(), ptr::null(), grass.as_ptr(), 0.105, 0.3, &mut s)
    };
    assert_eq!(st, LsStatus::Ok);
    let mut p = std::mem::MaybeUninit::<LsApproachParams>::uninit();
    unsafe { ls_approach_params_default(p.as_mut_ptr()) };
    let mut p = unsafe { p.assume_init() };
    p.unknown_is_obstacle = 1;
    assert_eq!(unsafe { ls_plan(s, &p, 0.0, 0.0, 50, &mut plan) }, LsStatus::Infeasible);
    p.v_land = -1.0;
    assert_eq!(unsafe { ls_plan(s, &p, 0.0, 0.0, 50, &mut plan) }, LsStatus::InvalidInput);
    unsafe { ls_stack_free(s) };

    let bad_res = unsafe {
        ls_stack_new(n, n, 0.0, 0.0, 0.0, elevation.as_ptr(), ptr::null(), grass.as_ptr(), 0.105, 0.3, &mut s)
    };
    assert_eq!(bad_res, LsStatus::InvalidInput);
}

#[test]
fn run_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let cfg = PipelineConfig {
        scene_spec: Some(SceneSpec::flat_grass(200, 200, 0.5)),
        model: Some(model),
        out: Some(dir.path().join("out")),
        max_frames: Some(0),
        ..PipelineConfig::default()
    };
    let path = dir.path().join("landsite.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let mut outcome = -1;
    let s = unsafe { ls_run_config(c_path(&path).as_ptr(), &mut outcome) };
    assert_eq!(s, LsStatus::Ok, "{}", last_error());
    assert_eq!(outcome, 2);
    assert!(dir.path().join("out/report.json").is_file());

    let missing = c_path(&dir.path().join("nope.toml"));
    assert_eq!(unsafe { ls_run_config(missing.as_ptr(), &mut outcome) }, LsStatus::Io);
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/landsite.h")).unwrap();
    for name in [
        "LsStatus",
        "ls_version",
        "ls_last_error_message",
        "ls_approach_geometry",
        "ls_model_load",
        "ls_model_predict",
        "ls_stack_new",
        "ls_stack_import",
        "ls_stack_hazard_distance",
        "ls_plan",
        "ls_run_config",
        "typedef struct LsStack LsStack",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
