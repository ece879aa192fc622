use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use landsite::approach_planner::{plan_approach, render_overlay, WindConfig, WindEstimate};
use landsite::classifier::{build_dataset, train, Dataset, DatasetConfig, FeatureSet, TrainConfig};
use landsite::pipeline::{run_from_config, scene_tracks, write_config_template, Outcome, PipelineConfig};
use landsite::raster::write_atomic;
use landsite::scene::{generate_scene, save_scene, SceneSpec};
use landsite::terrain_map::{import_stack, read_layer, LAYER_NAMES};

#[derive(Parser)]
#[command(name = "landsite", version, about = "Landing site detection and approach planning on synthetic flights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene directory (terrain, flight log, tracks).
    GenerateScene {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scene specification (TOML or JSON); the evaluation scene by default.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Render and store every frame as PNG.
        #[arg(long)]
        frames: bool,
    },
    /// Build a labelled region dataset from random synthetic scenes.
    BuildDataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 600)]
        regions: usize,
    },
    /// Grid-search and train the random forest classifier.
    TrainClassifier {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Search grid, e.g. "depths=2..12 minsamples=2,5,10,20".
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 50)]
        trees: usize,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Feature groups: rgb, hsv, rgb_hsv, rgb_gabor, hsv_gabor or all.
        #[arg(long, default_value = "all")]
        features: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the full pipeline on a scene.
    Run(RunArgs),
    /// Plan an approach on previously exported layers.
    Plan {
        /// Directory with exported layers.
        #[arg(long)]
        layers: PathBuf,
        /// Wind velocity as "east,north" in m/s.
        #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
        wind: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print statistics of exported layers.
    DumpLayers {
        #[arg(long)]
        layers: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    backend_period: Option<usize>,
    #[arg(long)]
    realtime: bool,
    #[arg(long)]
    max_frames: Option<usize>,
    /// Write a configuration template to this file and exit.
    #[arg(long)]
    write_config: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::GenerateScene { out, seed, spec, frames } => generate(&out, seed, spec.as_deref(), frames),
        Command::BuildDataset { out, seed, regions } => {
            let cfg = DatasetConfig {
                target_regions: regions,
                ..DatasetConfig::default()
            };
            let ds = build_dataset(&cfg, seed)?;
            ds.write_csv(&out)?;
            println!("{} regions ({} grass) -> {}", ds.len(), ds.grass_count(), out.display());
            Ok(0)
        }
        Command::TrainClassifier {
            data,
            out,
            grid,
            trees,
            folds,
            features,
            seed,
        } => {
            let mut cfg = TrainConfig {
                n_trees: trees,
                folds,
                feature_indices: parse_features(&features)?.indices(),
                seed,
                ..TrainConfig::default()
            };
            if let Some(g) = grid {
                parse_grid(&g, &mut cfg)?;
            }
            let ds = Dataset::read_csv(&data)?;
            let (model, cv) = train(&ds.x, &ds.y, &cfg)?;
            model.save(&out)?;
            let cv_path = out.with_extension("cv.json");
            write_atomic(&cv_path, serde_json::to_string_pretty(&cv)?.as_bytes())
                .with_context(|| format!("writing {}", cv_path.display()))?;
            println!(
                "best depth {} min_samples {}: cv error {:.4} -> {}",
                cv.best.max_depth,
                cv.best.min_samples,
                cv.best.cv_error,
                out.display()
            );
            Ok(0)
        }
        Command::Run(args) => run(args),
        Command::Plan {
            layers,
            wind,
            config,
            out,
        } => plan(&layers, &wind, config.as_deref(), &out),
        Command::DumpLayers { layers } => dump_layers(&layers),
    }
}

fn generate(out: &Path, seed: u64, spec: Option<&Path>, frames: bool) -> Result<u8> {
    let spec = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            if p.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text)?
            } else {
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
        }
        None => SceneSpec::evaluation(),
    };
    let scene = generate_scene(&spec, seed)?;
    let cfg = PipelineConfig {
        seed,
        ..PipelineConfig::default()
    };
    let tracks = scene_tracks(&scene, &cfg);
    save_scene(&scene, out, Some(&tracks), frames)?;
    println!("{} frames, {} tracks -> {}", scene.frame_count(), tracks.len(), out.display());
    Ok(0)
}

fn run(args: RunArgs) -> Result<u8> {
    if let Some(path) = &args.write_config {
        write_config_template(path)?;
        return Ok(0);
    }
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = args.scene {
        cfg.scene = Some(s);
        cfg.scene_spec = None;
    }
    if cfg.scene.is_none() && cfg.scene_spec.is_none() {
        cfg.scene_spec = Some(SceneSpec::evaluation());
    }
    if args.model.is_some() {
        cfg.model = args.model;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(p) = args.backend_period {
        cfg.backend_period = p;
    }
    if args.max_frames.is_some() {
        cfg.max_frames = args.max_frames;
    }
    cfg.realtime |= args.realtime;
    let result = run_from_config(&cfg)?;
    let report = &result.report;
    for s in report.sites.iter().take(5) {
        println!(
            "roi {:>4}  grade {:.3}  obs {:>3}  area {:>8.0} m2",
            s.roi_id, s.grade, s.n_obs, s.area
        );
    }
    match (&report.outcome, &report.plan) {
        (Outcome::Feasible, Some(p)) => println!(
            "touch-down ({:.1}, {:.1}) heading ({:.2}, {:.2}), approach {:.1} m, loiter radius {:.1} m",
            p.x_td[0], p.x_td[1], p.direction[0], p.direction[1], p.x_app, p.r_loit
        ),
        (o, _) => println!("outcome: {o:?}"),
    }
    for (stage, t) in &report.timing {
        println!("{stage:<16} {:>9.1} ± {:>7.1} ms  (n={})", t.mean_ms, t.std_ms, t.samples);
    }
    Ok(report.outcome.exit_code() as u8)
}

fn plan(layers: &Path, wind: &str, config: Option<&Path>, out: &Path) -> Result<u8> {
    let cfg = match config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let stack = import_stack(layers, &cfg.terrain)?;
    let w = parse_pair(wind)?;
    let center = stack.geometry.center();
    let est = WindEstimate::new(WindConfig {
        association_radius: f64::INFINITY,
        ..cfg.wind
    })?
    .update(w, center, center);
    let report = plan_approach(&stack, &cfg.approach, &est, cfg.backend.max_plan_candidates)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let plan_path = out.join("plan.json");
    write_atomic(&plan_path, serde_json::to_string_pretty(&report)?.as_bytes())
        .with_context(|| format!("writing {}", plan_path.display()))?;
    let overlay = out.join("overlay.png");
    render_overlay(&stack, &report)
        .save(&overlay)
        .with_context(|| format!("writing {}", overlay.display()))?;
    match &report.plan {
        Some(p) if report.feasible() => {
            println!("touch-down ({:.1}, {:.1}), score {:.1}", p.x_td[0], p.x_td[1], p.score);
            Ok(Outcome::Feasible.exit_code() as u8)
        }
        _ if report.candidates_available == 0 => {
            println!("no candidate cells");
            Ok(Outcome::NoCandidate.exit_code() as u8)
        }
        _ => {
            println!("infeasible: {} candidates rejected", report.failures.len());
            Ok(Outcome::Infeasible.exit_code() as u8)
        }
    }
}

fn dump_layers(dir: &Path) -> Result<u8> {
    println!("{:<16} {:>9} {:>12} {:>12} {:>12}", "layer", "valid", "min", "max", "mean");
    for name in LAYER_NAMES {
        let (values, sc) = read_layer(dir, name)?;
        let finite: Vec<f64> = values.as_slice().iter().flatten().copied().filter(|v| v.is_finite()).collect();
        let (lo, hi) = finite
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
        println!("{name:<16} {:>9} {lo:>12.3} {hi:>12.3} {mean:>12.3}", sc.valid_cells);
    }
    Ok(0)
}

fn parse_features(s: &str) -> Result<FeatureSet> {
    Ok(match s {
        "rgb" => FeatureSet::Rgb,
        "hsv" => FeatureSet::Hsv,
        "rgb_hsv" => FeatureSet::RgbHsv,
        "rgb_gabor" => FeatureSet::RgbGabor,
        "hsv_gabor" => FeatureSet::HsvGabor,
        "all" => FeatureSet::All,
        other => bail!("unknown feature set {other:?}"),
    })
}

fn parse_pair(s: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b] = parts[..] else {
        bail!("expected \"east,north\", got {s:?}");
    };
    Ok([a.parse()?, b.parse()?])
}

/// Parses "depths=2..12 minsamples=2,5,10,20"; either key may be omitted.
fn parse_grid(s: &str, cfg: &mut TrainConfig) -> Result<()> {
    for item in s.split_whitespace() {
        let Some((key, value)) = item.split_once('=') else {
            bail!("grid item {item:?} is not key=value");
        };
        let values = parse_list(value).with_context(|| format!("grid item {item:?}"))?;
        match key {
            "depths" => cfg.depths = values,
            "minsamples" | "min_samples" => cfg.min_samples = values,
            other => bail!("unknown grid key {other:?}"),
        }
    }
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (a.parse()?, b.parse()?);
        if a > b {
            bail!("empty range {s}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|v| Ok(v.parse()?)).collect()
}
