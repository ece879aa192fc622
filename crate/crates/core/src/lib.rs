pub mod approach_planner;
pub mod camera;
pub mod classifier;
pub mod error;
pub mod geom3d;
pub mod imgproc;
pub mod pipeline;
pub mod raster;
pub mod region_manager;
pub mod scene;
pub mod segmenter;
pub mod terrain_map;
