//! Binary random forest (grass = 1, not grass = 0) with Gini splits,
//! bootstrap sampling and per-node feature subsampling.
//!
//! Every random choice at a node is drawn from a generator seeded by the
//! tree seed and the node's position in the tree. Growth limits (depth,
//! minimum samples to split) therefore only decide where a tree stops: a tree
//! grown with tighter limits is exactly a truncation of one grown with looser
//! limits. Cross-validation relies on this to score a whole parameter grid
//! from a single set of deep trees.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, FEATURE_COUNT};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "landsite-forest";
pub const MODEL_VERSION: u32 = 1;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Training sample counts per class: `[not_grass, grass]`.
pub type Counts = [u32; 2];

#[inline]
fn majority(counts: Counts) -> u8 {
    u8::from(counts[1] >= counts[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: u8,
        counts: Counts,
    },
    Split {
        feature: usize,
        threshold: f64,
        counts: Counts,
        /// Samples with `x[feature] <= threshold`.
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn counts(&self) -> Counts {
        match self {
            Node::Leaf { counts, .. } | Node::Split { counts, .. } => *counts,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Label of the tree truncated to `max_depth` splits and to nodes holding
    /// at least `min_samples` training samples.
    pub fn predict_limited(&self, x: &[f64; FEATURE_COUNT], max_depth: usize, min_samples: usize) -> u8 {
        let mut node = self;
        let mut depth = 0;
        loop {
            match node {
                Node::Leaf { label, .. } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    counts,
                    left,
                    right,
                } => {
                    if depth >= max_depth || ((counts[0] + counts[1]) as usize) < min_samples {
                        return majority(*counts);
                    }
                    node = if x[*feature] <= *threshold { left } else { right };
                    depth += 1;
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64; FEATURE_COUNT]) -> u8 {
        self.predict_limited(x, usize::MAX, 0)
    }

    fn leaves_valid(&self, max_depth: usize) -> bool {
        match self {
            Node::Leaf { label, counts } => *label == majority(*counts) && max_depth < usize::MAX,
            Node::Split { counts, left, right, .. } => {
                max_depth > 0 && {
                    let (l, r) = (left.counts(), right.counts());
                    l[0] + r[0] == counts[0]
                        && l[1] + r[1] == counts[1]
                        && left.leaves_valid(max_depth - 1)
                        && right.leaves_valid(max_depth - 1)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeLimits {
    /// Maximum number of splits on any root-to-leaf path.
    pub max_depth: usize,
    /// Nodes with fewer samples are not split.
    pub min_samples: usize,
}

/// Grows one tree on `rows` (indices into `x`/`y`, duplicates allowed).
pub(crate) fn grow_tree(
    x: &[FeatureVector],
    y: &[u8],
    rows: &[usize],
    features: &[usize],
    limits: TreeLimits,
    tree_seed: u64,
) -> Node {
    let mut grower = Grower {
        x,
        y,
        features,
        limits,
        tree_seed,
        buf: Vec::with_capacity(rows.len()),
    };
    let mut rows = rows.to_vec();
    grower.grow(&mut rows, 0, 1)
}

struct Grower<'a> {
    x: &'a [FeatureVector],
    y: &'a [u8],
    features: &'a [usize],
    limits: TreeLimits,
    tree_seed: u64,
    buf: Vec<(f64, u8)>,
}

#[inline]
fn gini(c: [f64; 2]) -> f64 {
    let n = c[0] + c[1];
    if n == 0.0 {
        return 0.0;
    }
    let p = c[1] / n;
    2.0 * p * (1.0 - p)
}

impl Grower<'_> {
    fn counts(&self, rows: &[usize]) -> Counts {
        let mut c = [0u32; 2];
        for &r in rows {
            c[self.y[r] as usize] += 1;
        }
        c
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize, node_id: u64) -> Node {
        let counts = self.counts(rows);
        let leaf = Node::Leaf {
            label: majority(counts),
            counts,
        };
        if depth >= self.limits.max_depth
            || rows.len() < self.limits.min_samples.max(2)
            || counts[0] == 0
            || counts[1] == 0
        {
            return leaf;
        }
        let Some((feature, threshold)) = self.best_split(rows, counts, node_id) else {
            return leaf;
        };
        // partition rows in place: left part `<= threshold`
        let mut i = 0;
        for j in 0..rows.len() {
            if self.x[rows[j]].0[feature] <= threshold {
                rows.swap(i, j);
                i += 1;
            }
        }
        let (l, r) = rows.split_at_mut(i);
        let left = self.grow(l, depth + 1, node_id.wrapping_mul(2));
        let right = self.grow(r, depth + 1, node_id.wrapping_mul(2).wrapping_add(1));
        Node::Split {
            feature,
            threshold,
            counts,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn best_split(&mut self, rows: &[usize], counts: Counts, node_id: u64) -> Option<(usize, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.tree_seed ^ mix(node_id)));
        let m = (self.features.len() as f64).sqrt().ceil() as usize;
        let mut cand: Vec<usize> = self.features.to_vec();
        let (chosen, _) = cand.partial_shuffle(&mut rng, m.min(self.features.len()));
        let n = rows.len() as f64;
        let total = [counts[0] as f64, counts[1] as f64];
        let parent = gini(total);
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in chosen.iter() {
            self.buf.clear();
            self.buf
                .extend(rows.iter().map(|&r| (self.x[r].0[f], self.y[r])));
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0.0f64; 2];
            for k in 0..self.buf.len() - 1 {
                left[self.buf[k].1 as usize] += 1.0;
                let (v, next) = (self.buf[k].0, self.buf[k + 1].0);
                if v == next {
                    continue;
                }
                let nl = (k + 1) as f64;
                let right = [total[0] - left[0], total[1] - left[1]];
                let impurity = (nl * gini(left) + (n - nl) * gini(right)) / n;
                if best.as_ref().map_or(true, |b| impurity < b.0) {
                    let mut thr = 0.5 * (v + next);
                    if !(thr < next) {
                        thr = v;
                    }
                    best = Some((impurity, f, thr));
                }
            }
        }
        // require a strict impurity decrease
        best.filter(|b| b.0 < parent - 1e-12).map(|b| (b.1, b.2))
    }
}

/// Hyper-parameters and training provenance of a forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format: String,
    pub version: u32,
    pub n_features: usize,
    /// Feature columns the trees may split on.
    pub feature_indices: Vec<usize>,
    pub max_depth: usize,
    pub min_samples_per_branch: usize,
    pub n_trees: usize,
    pub training_seed: u64,
    pub trees: Vec<Node>,
}

/// Seed of tree `t` in a forest trained with `seed`.
pub(crate) fn tree_seed(seed: u64, t: usize) -> u64 {
    mix(seed ^ mix(0x7EE5 + t as u64))
}

/// Bootstrap sample of `n` rows for tree `t`.
pub(crate) fn bootstrap(rows: &[usize], seed: u64, t: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(tree_seed(seed, t) ^ 0xB007));
    (0..rows.len()).map(|_| rows[rng.gen_range(0..rows.len())]).collect()
}

impl ForestModel {
    /// Trains a forest on all rows with fixed limits.
    pub fn fit(
        x: &[FeatureVector],
        y: &[u8],
        features: &[usize],
        limits: TreeLimits,
        n_trees: usize,
        seed: u64,
    ) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::InvalidInput("features and labels must be non-empty and aligned".into()));
        }
        if n_trees == 0 || features.is_empty() || features.iter().any(|&f| f >= FEATURE_COUNT) {
            return Err(Error::InvalidInput("invalid forest configuration".into()));
        }
        let rows: Vec<usize> = (0..x.len()).collect();
        let trees = (0..n_trees)
            .map(|t| grow_tree(x, y, &bootstrap(&rows, seed, t), features, limits, tree_seed(seed, t)))
            .collect();
        Ok(Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            n_features: FEATURE_COUNT,
            feature_indices: features.to_vec(),
            max_depth: limits.max_depth,
            min_samples_per_branch: limits.min_samples,
            n_trees,
            training_seed: seed,
            trees,
        })
    }

    /// `(label, grass_probability)`; the probability is the fraction of trees
    /// voting grass and the label is grass when it is at least one half.
    pub fn predict(&self, fv: &FeatureVector) -> (u8, f64) {
        let votes: usize = self.trees.iter().map(|t| t.predict(&fv.0) as usize).sum();
        let p = votes as f64 / self.trees.len() as f64;
        (u8::from(2 * votes >= self.trees.len()), p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(Error::ModelMismatch(format!(
                "unsupported model format {} v{}",
                self.format, self.version
            )));
        }
        if self.n_features != FEATURE_COUNT {
            return Err(Error::ModelMismatch(format!(
                "model expects {} features, extractor produces {FEATURE_COUNT}",
                self.n_features
            )));
        }
        if self.trees.is_empty() || self.trees.len() != self.n_trees {
            return Err(Error::ModelMismatch("tree count does not match n_trees".into()));
        }
        for t in &self.trees {
            if !t.leaves_valid(self.max_depth) {
                return Err(Error::ModelMismatch("malformed tree".into()));
            }
            if !splits_within(t, &self.feature_indices) {
                return Err(Error::ModelMismatch("split on a feature outside the model's set".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| Error::ModelMismatch(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        crate::raster::write_atomic(path, self.to_json()?.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

fn splits_within(node: &Node, features: &[usize]) -> bool {
    match node {
        Node::Leaf { .. } => true,
        Node::Split { feature, left, right, .. } => {
            features.contains(feature) && splits_within(left, features) && splits_within(right, features)
        }
    }
}
