//! Raster primitives used by the frontend: colour conversion, Canny edges,
//! exact distance transform, Gabor filtering and region extraction.

pub mod canny;
pub mod color;
pub mod edt;
pub mod gabor;
pub mod regions;

use std::path::Path;

use image::{GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::raster::{self, Grid};

pub use canny::canny;
pub use color::{rgb_to_gray, rgb_to_hsv, Hsv};
pub use edt::{edt, edt_squared};
pub use gabor::{gabor_bank, GaborBank, GaborFft, GaborParams, Window};
pub use regions::{extract_regions, BBox, RegionMask, Run};

/// Linearly rescales finite values to 0..=255 (non-finite values map to 255).
pub fn normalize_to_u8(grid: &Grid<f64>) -> Grid<u8> {
    let finite = grid.as_slice().iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    grid.map(|&v| {
        if v.is_finite() {
            ((v - lo) / span * 255.0).round() as u8
        } else {
            255
        }
    })
}

/// Debug dump of an intermediate raster. The extension picks the format
/// (`.pgm` or `.png`).
pub fn write_debug_gray(path: &Path, grid: &Grid<u8>) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => raster::write_pgm8(path, grid).map_err(|e| Error::io(path, e)),
        _ => {
            let img = GrayImage::from_raw(
                grid.width() as u32,
                grid.height() as u32,
                grid.as_slice().to_vec(),
            )
            .expect("buffer size matches");
            save_png(path, |p| img.save(p))
        }
    }
}

pub fn write_debug_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    save_png(path, |p| img.save(p))
}

fn save_png(path: &Path, save: impl FnOnce(&Path) -> image::ImageResult<()>) -> Result<()> {
    let tmp = path.with_extension("tmp.png");
    save(&tmp).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
