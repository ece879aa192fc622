use image::{Rgb, RgbImage};

use super::terrain::Terrain;
use crate::camera::{CameraModel, Pose};
use crate::error::{Error, Result};

/// Colour of rays that leave the terrain without hitting it.
pub const SKY_COLOR: [u8; 3] = [135, 180, 235];

/// Ray-casts every pixel centre against the heightfield and colours it with
/// the texture of the first surface hit.
pub fn render_frame(terrain: &Terrain, pose: &Pose, camera: &CameraModel) -> Result<RgbImage> {
    camera.validate()?;
    let p = pose.position;
    if p.z <= terrain.height_at(p.x, p.y) {
        return Err(Error::PoseBelowTerrain);
    }
    let mut img = RgbImage::new(camera.width, camera.height);
    for (u, v, px) in img.enumerate_pixels_mut() {
        let d = pose.ray_direction(camera, u as f64, v as f64);
        let color = terrain
            .intersect(&p, &d)
            .and_then(|hit| terrain.color_at(hit.x, hit.y))
            .unwrap_or(SKY_COLOR);
        *px = Rgb(color);
    }
    Ok(img)
}
