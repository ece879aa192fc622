//! Fine terrain analysis on a 2.5D grid: elevation from a dense point cloud,
//! surface normals, slope and ruggedness, the grass mask of a region, binary
//! hazard layers and the distance to the nearest hazard.

mod analysis;
mod export;
mod grass;
mod rasterize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Grid;

pub use analysis::{fuse_hazards, hazard_distance, normals_and_slope, tri, HazardLayers};
pub use export::{export_layers, import_stack, read_layer, LayerSidecar, LAYER_NAMES};
pub use grass::fuse_grass_mask;
pub use rasterize::{brute_force_idw, rasterize_elevation, PointIndex};

/// Axis-aligned grid in the world xy plane. Cell `(c, r)` covers
/// `origin + [c, c+1) x [r, r+1)` cells; `r` grows northwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub cols: usize,
    pub rows: usize,
}

impl GridGeometry {
    /// Grid of `cols x rows` cells centred on `center`.
    pub fn centered(center: [f64; 2], resolution: f64, cols: usize, rows: usize) -> Self {
        Self {
            origin: [
                center[0] - 0.5 * cols as f64 * resolution,
                center[1] - 0.5 * rows as f64 * resolution,
            ],
            resolution,
            cols,
            rows,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) || self.cols == 0 || self.rows == 0 {
            return Err(Error::InvalidInput("grid needs positive resolution and size".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn cell_center(&self, c: usize, r: usize) -> [f64; 2] {
        [
            self.origin[0] + (c as f64 + 0.5) * self.resolution,
            self.origin[1] + (r as f64 + 0.5) * self.resolution,
        ]
    }

    /// Cell containing `(x, y)`, if inside the grid.
    #[inline]
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.origin[0]) / self.resolution;
        let fy = (y - self.origin[1]) / self.resolution;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (c, r) = (fx as usize, fy as usize);
        (c < self.cols && r < self.rows).then_some((c, r))
    }

    pub fn center(&self) -> [f64; 2] {
        [
            self.origin[0] + 0.5 * self.cols as f64 * self.resolution,
            self.origin[1] + 0.5 * self.rows as f64 * self.resolution,
        ]
    }
}

/// A scalar layer with a per-cell validity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub values: Grid<f64>,
    pub valid: Grid<bool>,
}

impl Layer {
    pub fn invalid(cols: usize, rows: usize) -> Self {
        Self {
            values: Grid::new(cols, rows, f64::NAN),
            valid: Grid::new(cols, rows, false),
        }
    }

    /// Value at `(c, r)` if valid.
    #[inline]
    pub fn get(&self, c: usize, r: usize) -> Option<f64> {
        self.valid[(c, r)].then(|| self.values[(c, r)])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|&&v| v).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriMode {
    /// `sqrt(sum_k (e_k - e)^2)` over the 8 neighbours.
    RootSumSquare,
    /// `mean_k |e_k - e|` over the 8 neighbours.
    MeanAbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardThresholds {
    /// Radians.
    pub max_slope: f64,
    /// Metres.
    pub max_tri: f64,
}

impl Default for HazardThresholds {
    fn default() -> Self {
        Self {
            max_slope: 0.105,
            max_tri: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerrainMapConfig {
    pub resolution: f64,
    pub cols: usize,
    pub rows: usize,
    /// IDW search radius in cells.
    pub idw_radius_cells: f64,
    pub idw_power: f64,
    pub tri_mode: TriMode,
    pub thresholds: HazardThresholds,
}

impl Default for TerrainMapConfig {
    fn default() -> Self {
        Self {
            resolution: 1.0,
            cols: 300,
            rows: 300,
            idw_radius_cells: 2.5,
            idw_power: 2.0,
            tri_mode: TriMode::RootSumSquare,
            thresholds: HazardThresholds::default(),
        }
    }
}

impl TerrainMapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.idw_radius_cells > 0.0) || !(self.idw_power >= 0.0) {
            return Err(Error::InvalidInput("IDW radius must be positive and power >= 0".into()));
        }
        if !(self.thresholds.max_slope > 0.0 && self.thresholds.max_tri > 0.0) {
            return Err(Error::InvalidInput("hazard thresholds must be positive".into()));
        }
        self.geometry([0.0, 0.0]).validate()
    }

    pub fn geometry(&self, center: [f64; 2]) -> GridGeometry {
        GridGeometry::centered(center, self.resolution, self.cols, self.rows)
    }
}

/// Co-registered layers of one analysed region.
#[derive(Debug, Clone, PartialEq)]
pub struct GridStack {
    pub geometry: GridGeometry,
    pub elevation: Layer,
    pub normal_z: Layer,
    pub slope: Layer,
    pub roughness: Layer,
    pub grass_mask: Grid<u8>,
    pub binary_slope: Grid<u8>,
    pub binary_rough: Grid<u8>,
    pub fused_hazard: Grid<u8>,
    /// Metres to the nearest hazard cell centre; infinite without hazards.
    pub hazard_distance: Grid<f64>,
}

impl GridStack {
    /// All layers from an elevation layer and a grass mask.
    pub fn from_layers(geometry: GridGeometry, elevation: Layer, grass_mask: Grid<u8>, cfg: &TerrainMapConfig) -> Self {
        let (normal_z, slope) = normals_and_slope(&elevation, geometry.resolution);
        let roughness = tri(&elevation, cfg.tri_mode);
        let h = fuse_hazards(&slope, &roughness, &grass_mask, &cfg.thresholds);
        let hazard_distance = hazard_distance(&h.fused, geometry.resolution);
        Self {
            geometry,
            elevation,
            normal_z,
            slope,
            roughness,
            grass_mask,
            binary_slope: h.slope,
            binary_rough: h.rough,
            fused_hazard: h.fused,
            hazard_distance,
        }
    }

    /// Elevation of the cell containing a world position.
    pub fn elevation_at(&self, x: f64, y: f64) -> Option<f64> {
        let (c, r) = self.geometry.cell_of(x, y)?;
        self.elevation.get(c, r)
    }
}
