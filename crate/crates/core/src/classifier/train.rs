//! Grid search over tree depth and minimum split size by k-fold
//! cross-validation, then a final fit on the full dataset.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::forest::{bootstrap, grow_tree, tree_seed, ForestModel, Node, TreeLimits};
use crate::error::{Error, Result};

pub const MIN_DATASET_SIZE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub depths: Vec<usize>,
    pub min_samples: Vec<usize>,
    pub n_trees: usize,
    pub folds: usize,
    pub feature_indices: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            depths: (2..=12).collect(),
            min_samples: vec![2, 5, 10, 20],
            n_trees: 50,
            folds: 10,
            feature_indices: (0..super::FEATURE_COUNT).collect(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depths.is_empty() || self.min_samples.is_empty() || self.depths.contains(&0) {
            return Err(Error::InvalidInput("grid needs positive depths and at least one min_samples".into()));
        }
        if self.n_trees == 0 || self.folds < 2 {
            return Err(Error::InvalidInput("need n_trees >= 1 and folds >= 2".into()));
        }
        if self.feature_indices.is_empty() || self.feature_indices.iter().any(|&f| f >= super::FEATURE_COUNT) {
            return Err(Error::InvalidInput("invalid feature indices".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub max_depth: usize,
    pub min_samples: usize,
    pub cv_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub grid: Vec<GridPoint>,
    pub best: GridPoint,
}

impl CvReport {
    pub fn mean_error(&self) -> f64 {
        self.grid.iter().map(|g| g.cv_error).sum::<f64>() / self.grid.len() as f64
    }
}

fn check_dataset(x: &[FeatureVector], y: &[u8]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("features and labels differ in length".into()));
    }
    let pos = y.iter().filter(|&&l| l == 1).count();
    if x.len() < MIN_DATASET_SIZE || pos == 0 || pos == y.len() || y.iter().any(|&l| l > 1) {
        return Err(Error::BadDataset {
            min: MIN_DATASET_SIZE,
            got: x.len(),
        });
    }
    if x.iter().any(|f| !f.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }
    Ok(())
}

/// Seeded assignment of each sample to one of `folds` folds of near-equal size.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xF01D));
    let mut fold = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        fold[i] = k % folds;
    }
    fold
}

/// Cross-validation errors for every grid point. Each fold grows its trees
/// once with the loosest limits; tighter limits are evaluated by truncation.
pub fn cross_validate(x: &[FeatureVector], y: &[u8], cfg: &TrainConfig) -> Result<CvReport> {
    cfg.validate()?;
    check_dataset(x, y)?;
    let folds = cfg.folds.min(x.len());
    let fold = fold_assignment(x.len(), folds, cfg.seed);
    let loosest = TreeLimits {
        max_depth: *cfg.depths.iter().max().expect("non-empty"),
        min_samples: *cfg.min_samples.iter().min().expect("non-empty"),
    };
    let grid: Vec<(usize, usize)> = cfg
        .depths
        .iter()
        .flat_map(|&d| cfg.min_samples.iter().map(move |&m| (d, m)))
        .collect();
    let mut wrong = vec![0usize; grid.len()];
    for f in 0..folds {
        let train: Vec<usize> = (0..x.len()).filter(|&i| fold[i] != f).collect();
        let test: Vec<usize> = (0..x.len()).filter(|&i| fold[i] == f).collect();
        let fold_seed = cfg.seed.wrapping_add(1 + f as u64);
        let trees: Vec<Node> = (0..cfg.n_trees)
            .map(|t| {
                grow_tree(
                    x,
                    y,
                    &bootstrap(&train, fold_seed, t),
                    &cfg.feature_indices,
                    loosest,
                    tree_seed(fold_seed, t),
                )
            })
            .collect();
        for &i in &test {
            for (g, &(d, m)) in grid.iter().enumerate() {
                let votes: usize = trees.iter().map(|tr| tr.predict_limited(&x[i].0, d, m) as usize).sum();
                let label = u8::from(2 * votes >= trees.len());
                if label != y[i] {
                    wrong[g] += 1;
                }
            }
        }
    }
    let points: Vec<GridPoint> = grid
        .iter()
        .zip(&wrong)
        .map(|(&(d, m), &w)| GridPoint {
            max_depth: d,
            min_samples: m,
            cv_error: w as f64 / x.len() as f64,
        })
        .collect();
    let best = points
        .iter()
        .min_by(|a, b| {
            a.cv_error
                .total_cmp(&b.cv_error)
                .then(a.max_depth.cmp(&b.max_depth))
                .then(b.min_samples.cmp(&a.min_samples))
        })
        .cloned()
        .expect("non-empty grid");
    Ok(CvReport {
        folds,
        grid: points,
        best,
    })
}

/// Cross-validates the grid and refits on all samples with the best point.
pub fn train(x: &[FeatureVector], y: &[u8], cfg: &TrainConfig) -> Result<(ForestModel, CvReport)> {
    let report = cross_validate(x, y, cfg)?;
    let limits = TreeLimits {
        max_depth: report.best.max_depth,
        min_samples: report.best.min_samples,
    };
    let model = ForestModel::fit(x, y, &cfg.feature_indices, limits, cfg.n_trees, cfg.seed)?;
    Ok((model, report))
}
