use nalgebra::Point3;

use super::{GridGeometry, Layer};
use crate::camera::{CameraModel, Pose};
use crate::error::{Error, Result};
use crate::raster::Grid;
use crate::region_manager::RoiRecord;

/// OR of the region's grass-labelled fine masks on the grid. Each cell centre,
/// lifted to its ground elevation (or `fallback_z` where the elevation is
/// invalid), is projected into the frame of every mask; the cell is grass if
/// any mask covers the pixel it lands on. `poses` is indexed by frame id.
pub fn fuse_grass_mask(
    roi: &RoiRecord,
    poses: &[Pose],
    camera: &CameraModel,
    geometry: &GridGeometry,
    elevation: &Layer,
    fallback_z: f64,
) -> Result<Grid<u8>> {
    let masks: Vec<_> = roi.fine_masks.iter().filter(|m| m.grass).collect();
    if masks.is_empty() {
        return Err(Error::NoGrassMask(roi.roi_id));
    }
    let g = geometry;
    let mut out = Grid::new(g.cols, g.rows, 0u8);
    for m in masks {
        let pose = poses
            .get(m.frame_id)
            .ok_or_else(|| Error::InvalidInput(format!("no pose for frame {}", m.frame_id)))?;
        let bb = m.mask.bbox;
        for r in 0..g.rows {
            for c in 0..g.cols {
                if out[(c, r)] != 0 {
                    continue;
                }
                let [x, y] = g.cell_center(c, r);
                let z = elevation.get(c, r).unwrap_or(fallback_z);
                let Some([u, v]) = pose.project(camera, &Point3::new(x, y, z)) else {
                    continue;
                };
                let (u, v) = (u.round(), v.round());
                if u < bb.x0 as f64 || v < bb.y0 as f64 || u > bb.x1 as f64 || v > bb.y1 as f64 {
                    continue;
                }
                if m.mask.contains(u as u32, v as u32) {
                    out[(c, r)] = 1;
                }
            }
        }
    }
    Ok(out)
}
