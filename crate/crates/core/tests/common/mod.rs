#![allow(dead_code)]

use std::sync::OnceLock;

use landsite::classifier::{build_dataset, train, DatasetConfig, ForestModel, TrainConfig};
use landsite::scene::{Feature, FlightSpec, Label, Rect, SceneSpec};

/// Small model trained on a reduced synthetic dataset, shared by the tests of
/// one binary.
pub fn quick_model() -> &'static ForestModel {
    static MODEL: OnceLock<ForestModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let cfg = DatasetConfig {
            target_regions: 200,
            ..DatasetConfig::default()
        };
        let ds = build_dataset(&cfg, 11).expect("dataset");
        let tc = TrainConfig {
            depths: vec![4, 8, 12],
            min_samples: vec![2, 5],
            n_trees: 25,
            folds: 5,
            seed: 11,
            ..TrainConfig::default()
        };
        train(&ds.x, &ds.y, &tc).expect("training").0
    })
}

/// Writes the shared model into `dir` and returns its path.
pub fn model_file(dir: &std::path::Path) -> std::path::PathBuf {
    let p = dir.join("model.json");
    quick_model().save(&p).expect("save model");
    p
}

/// A 400 m square of one material surveyed at 100 m. Survey lines are 35 m
/// apart so neighbouring strips merge into one region.
pub fn uniform_scene(label: Label, max_frames: usize) -> SceneSpec {
    let mut spec = SceneSpec::flat_grass(800, 800, 0.5);
    spec.flight = FlightSpec {
        line_spacing: 35.0,
        max_frames: Some(max_frames),
        ..FlightSpec::default()
    };
    match label {
        Label::Grass => {}
        Label::Forest => spec.features.push(Feature::Forest {
            rect: Rect::new(0.0, 0.0, 400.0, 400.0),
            canopy_height: 12.0,
            roughness: 1.5,
        }),
        other => spec.base_label = other,
    }
    spec
}
