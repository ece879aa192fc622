use nalgebra::Point3;

use super::{GridGeometry, Layer};
use crate::raster::Grid;

/// Points bucketed into square bins for fixed-radius queries.
#[derive(Debug, Clone)]
pub struct PointIndex {
    origin: [f64; 2],
    bin: f64,
    nx: usize,
    ny: usize,
    /// `starts[b]..starts[b + 1]` indexes `xyz` for bin `b`.
    starts: Vec<usize>,
    xyz: Vec<[f64; 3]>,
}

impl PointIndex {
    /// Indexes the points inside `[min, max]` in xy; others are dropped.
    pub fn build(points: &[Point3<f64>], min: [f64; 2], max: [f64; 2], bin: f64) -> Self {
        let nx = (((max[0] - min[0]) / bin).ceil() as usize).max(1);
        let ny = (((max[1] - min[1]) / bin).ceil() as usize).max(1);
        let bin_of = |p: &Point3<f64>| -> Option<usize> {
            if !(p.x >= min[0] && p.x <= max[0] && p.y >= min[1] && p.y <= max[1]) {
                return None;
            }
            let bx = (((p.x - min[0]) / bin) as usize).min(nx - 1);
            let by = (((p.y - min[1]) / bin) as usize).min(ny - 1);
            Some(by * nx + bx)
        };
        // counting sort by bin
        let mut starts = vec![0usize; nx * ny + 1];
        for p in points {
            if let Some(b) = bin_of(p) {
                starts[b + 1] += 1;
            }
        }
        for b in 0..nx * ny {
            starts[b + 1] += starts[b];
        }
        let mut fill = starts.clone();
        let mut xyz = vec![[0.0; 3]; starts[nx * ny]];
        for p in points {
            if let Some(b) = bin_of(p) {
                xyz[fill[b]] = [p.x, p.y, p.z];
                fill[b] += 1;
            }
        }
        Self {
            origin: min,
            bin,
            nx,
            ny,
            starts,
            xyz,
        }
    }

    pub fn len(&self) -> usize {
        self.xyz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xyz.is_empty()
    }

    /// Calls `f(point, squared_distance)` for every point within `radius` of `q`.
    pub fn for_each_within(&self, q: [f64; 2], radius: f64, mut f: impl FnMut(&[f64; 3], f64)) {
        let r2 = radius * radius;
        let lo = |v: f64, o: f64, n: usize| (((v - radius - o) / self.bin).floor().max(0.0) as usize).min(n);
        let hi = |v: f64, o: f64, n: usize| ((((v + radius - o) / self.bin).floor() + 1.0).max(0.0) as usize).min(n);
        let (x0, x1) = (lo(q[0], self.origin[0], self.nx), hi(q[0], self.origin[0], self.nx));
        let (y0, y1) = (lo(q[1], self.origin[1], self.ny), hi(q[1], self.origin[1], self.ny));
        for by in y0..y1 {
            let row = by * self.nx;
            let (s, e) = (self.starts[row + x0], self.starts[row + x1]);
            for p in &self.xyz[s..e] {
                let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
                let d2 = dx * dx + dy * dy;
                if d2 <= r2 {
                    f(p, d2);
                }
            }
        }
    }
}

/// Inverse-distance weighting accumulator. A point exactly at the query
/// location takes precedence over all others.
#[derive(Default)]
struct Idw {
    num: f64,
    den: f64,
    exact_sum: f64,
    exact_n: usize,
}

impl Idw {
    #[inline]
    fn add(&mut self, z: f64, d2: f64, power: f64) {
        if d2 == 0.0 {
            self.exact_sum += z;
            self.exact_n += 1;
        } else {
            let w = if power == 2.0 { 1.0 / d2 } else { d2.powf(-0.5 * power) };
            self.num += w * z;
            self.den += w;
        }
    }

    fn value(&self) -> Option<f64> {
        if self.exact_n > 0 {
            Some(self.exact_sum / self.exact_n as f64)
        } else if self.den > 0.0 {
            Some(self.num / self.den)
        } else {
            None
        }
    }
}

/// Elevation per cell: IDW over the points within `radius` of the cell
/// centre. Cells without such points are invalid.
pub fn rasterize_elevation(points: &[Point3<f64>], geometry: &GridGeometry, radius: f64, power: f64) -> Layer {
    let g = geometry;
    let mut layer = Layer::invalid(g.cols, g.rows);
    if points.is_empty() || !(radius > 0.0) {
        return layer;
    }
    let min = [g.origin[0] - radius, g.origin[1] - radius];
    let max = [
        g.origin[0] + g.cols as f64 * g.resolution + radius,
        g.origin[1] + g.rows as f64 * g.resolution + radius,
    ];
    let index = PointIndex::build(points, min, max, g.resolution.max(radius / 3.0));
    for r in 0..g.rows {
        for c in 0..g.cols {
            let mut acc = Idw::default();
            index.for_each_within(g.cell_center(c, r), radius, |p, d2| acc.add(p[2], d2, power));
            if let Some(z) = acc.value() {
                layer.values[(c, r)] = z;
                layer.valid[(c, r)] = true;
            }
        }
    }
    layer
}

/// Reference IDW that scans every point for every cell.
pub fn brute_force_idw(points: &[Point3<f64>], geometry: &GridGeometry, radius: f64, power: f64) -> Grid<Option<f64>> {
    let g = geometry;
    Grid::from_fn(g.cols, g.rows, |c, r| {
        let q = g.cell_center(c, r);
        let mut acc = Idw::default();
        for p in points {
            let d2 = (p.x - q[0]).powi(2) + (p.y - q[1]).powi(2);
            if d2 <= radius * radius {
                acc.add(p.z, d2, power);
            }
        }
        acc.value()
    })
}
