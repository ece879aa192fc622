//! Region classification (grass or not) from colour and Gabor texture
//! statistics with a random forest.

mod dataset;
mod features;
mod forest;
mod train;

pub use dataset::{build_dataset, grass_fraction, random_layout, Dataset, DatasetConfig};
pub use features::{
    extract_features, extract_features_with, gabor_window, gray_f32, FeatureSet, FeatureVector, FEATURE_COUNT,
    FEATURE_NAMES, GABOR_FEATURES, HSV_FEATURES, RGB_FEATURES,
};
pub use forest::{ForestModel, Node, TreeLimits, MODEL_FORMAT, MODEL_VERSION};
pub use train::{cross_validate, fold_assignment, train, CvReport, GridPoint, TrainConfig, MIN_DATASET_SIZE};

/// `(label, grass_probability)` of one feature vector.
pub fn predict(model: &ForestModel, fv: &FeatureVector) -> (u8, f64) {
    model.predict(fv)
}
