use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GridGeometry, GridStack, Layer, TerrainMapConfig};
use crate::error::{Error, Result};
use crate::raster::{read_pgm, write_atomic, write_pgm16, Grid};

pub const LAYER_NAMES: [&str; 9] = [
    "elevation",
    "normal_z",
    "slope",
    "roughness",
    "grass_mask",
    "binary_slope",
    "binary_rough",
    "fused_hazard",
    "hazard_distance",
];

/// Pixel value for invalid cells.
const NODATA: u16 = 0;
/// Pixel value for `+inf`.
const INFINITE: u16 = u16::MAX;
const MAX_FINITE: f64 = (u16::MAX - 1) as f64;

/// Decoding information for one exported layer:
/// `value = offset + scale * (pixel - 1)` for pixels in `1..=65534`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSidecar {
    pub layer: String,
    pub scale: f64,
    pub offset: f64,
    pub nodata: u16,
    pub infinity: u16,
    pub origin: [f64; 2],
    pub resolution: f64,
    pub cols: usize,
    pub rows: usize,
    /// Image row 0 is the northernmost grid row.
    pub north_up: bool,
    pub valid_cells: usize,
}

impl LayerSidecar {
    pub fn decode(&self, pixel: u16) -> Option<f64> {
        match pixel {
            p if p == self.nodata => None,
            p if p == self.infinity => Some(f64::INFINITY),
            p => Some(self.offset + self.scale * (p - 1) as f64),
        }
    }
}

fn layer_values(stack: &GridStack, name: &str) -> Grid<Option<f64>> {
    let g = &stack.geometry;
    let from_layer = |l: &super::Layer| Grid::from_fn(g.cols, g.rows, |c, r| l.get(c, r));
    let from_u8 = |m: &Grid<u8>| m.map(|&v| Some(v as f64));
    match name {
        "elevation" => from_layer(&stack.elevation),
        "normal_z" => from_layer(&stack.normal_z),
        "slope" => from_layer(&stack.slope),
        "roughness" => from_layer(&stack.roughness),
        "grass_mask" => from_u8(&stack.grass_mask),
        "binary_slope" => from_u8(&stack.binary_slope),
        "binary_rough" => from_u8(&stack.binary_rough),
        "fused_hazard" => from_u8(&stack.fused_hazard),
        "hazard_distance" => stack.hazard_distance.map(|&v| Some(v)),
        other => unreachable!("unknown layer {other}"),
    }
}

/// Quantises a layer to 16 bits, north-up.
fn encode(values: &Grid<Option<f64>>, name: &str, g: &GridGeometry) -> (Grid<u16>, LayerSidecar) {
    let finite = values.as_slice().iter().flatten().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (offset, scale) = if lo.is_finite() && hi > lo {
        (lo, (hi - lo) / (MAX_FINITE - 1.0))
    } else {
        (if lo.is_finite() { lo } else { 0.0 }, 1.0)
    };
    let rows = g.rows;
    let img = Grid::from_fn(g.cols, rows, |c, y| match values[(c, rows - 1 - y)] {
        None => NODATA,
        Some(v) if v.is_infinite() => INFINITE,
        Some(v) => (1.0 + ((v - offset) / scale).round()).clamp(1.0, MAX_FINITE) as u16,
    });
    let sidecar = LayerSidecar {
        layer: name.to_string(),
        scale,
        offset,
        nodata: NODATA,
        infinity: INFINITE,
        origin: g.origin,
        resolution: g.resolution,
        cols: g.cols,
        rows: g.rows,
        north_up: true,
        valid_cells: values.as_slice().iter().filter(|v| v.is_some()).count(),
    };
    (img, sidecar)
}

/// Writes every layer as `<name>.pgm` with a `<name>.json` sidecar into `dir`.
/// Returns the written paths.
pub fn export_layers(stack: &GridStack, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for name in LAYER_NAMES {
        let (img, sidecar) = encode(&layer_values(stack, name), name, &stack.geometry);
        let pgm = dir.join(format!("{name}.pgm"));
        let tmp = dir.join(format!(".{name}.pgm.tmp"));
        write_pgm16(&tmp, &img).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &pgm).map_err(|e| Error::io(&pgm, e))?;
        let json = dir.join(format!("{name}.json"));
        write_atomic(&json, serde_json::to_string_pretty(&sidecar)?.as_bytes()).map_err(|e| Error::io(&json, e))?;
        written.push(pgm);
        written.push(json);
    }
    Ok(written)
}

/// Reads one exported layer back into grid orientation (row 0 south).
pub fn read_layer(dir: &Path, name: &str) -> Result<(Grid<Option<f64>>, LayerSidecar)> {
    let json = dir.join(format!("{name}.json"));
    let text = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let sidecar: LayerSidecar = serde_json::from_str(&text)?;
    let path = dir.join(format!("{name}.pgm"));
    let pgm = read_pgm(&path).map_err(|e| Error::io(&path, e))?;
    let (w, h) = (pgm.samples.width(), pgm.samples.height());
    if (w, h) != (sidecar.cols, sidecar.rows) {
        return Err(Error::Format(format!(
            "{}: {w}x{h} image but sidecar says {}x{}",
            path.display(),
            sidecar.cols,
            sidecar.rows
        )));
    }
    let values = Grid::from_fn(w, h, |c, r| {
        let y = if sidecar.north_up { h - 1 - r } else { r };
        sidecar.decode(pgm.samples[(c, y)])
    });
    Ok((values, sidecar))
}

/// Rebuilds a layer stack from exported elevation and grass mask layers.
/// Derived layers are recomputed with `cfg`'s thresholds.
pub fn import_stack(dir: &Path, cfg: &TerrainMapConfig) -> Result<GridStack> {
    let (elev, sc) = read_layer(dir, "elevation")?;
    let (grass, gsc) = read_layer(dir, "grass_mask")?;
    if (gsc.cols, gsc.rows) != (sc.cols, sc.rows) || gsc.origin != sc.origin || gsc.resolution != sc.resolution {
        return Err(Error::Format("elevation and grass_mask geometries differ".into()));
    }
    let geometry = GridGeometry {
        origin: sc.origin,
        resolution: sc.resolution,
        cols: sc.cols,
        rows: sc.rows,
    };
    geometry.validate()?;
    let elevation = Layer {
        values: elev.map(|v| v.filter(|x| x.is_finite()).unwrap_or(0.0)),
        valid: elev.map(|v| v.is_some_and(f64::is_finite)),
    };
    let grass = grass.map(|v| u8::from(v.is_some_and(|x| x >= 0.5)));
    Ok(GridStack::from_layers(geometry, elevation, grass, cfg))
}
