use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::raster::Grid;

/// Semantic class of a terrain cell. The discriminant is the on-disk code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Label {
    Grass = 0,
    Crop = 1,
    Forest = 2,
    Building = 3,
    Road = 4,
}

impl Label {
    pub const ALL: [Label; 5] = [
        Label::Grass,
        Label::Crop,
        Label::Forest,
        Label::Building,
        Label::Road,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Grass => "grass",
            Label::Crop => "crop",
            Label::Forest => "forest",
            Label::Building => "building",
            Label::Road => "road",
        }
    }
}

/// Heightfield with per-cell labels and colours. Cell `(c, r)` covers
/// `[c*res, (c+1)*res) x [r*res, (r+1)*res)`; elevation is sampled at cell
/// centres and bilinearly interpolated between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Terrain {
    pub resolution: f64,
    pub elevation: Grid<f64>,
    pub semantic: Grid<Label>,
    pub texture: Grid<[u8; 3]>,
    z_min: f64,
    z_max: f64,
    /// Maximum surface height over each `BLOCK x BLOCK` cell block, including
    /// the one-cell apron the bilinear interpolation reads from.
    block_max: Grid<f64>,
}

const BLOCK: usize = 8;

impl Terrain {
    pub fn new(
        resolution: f64,
        elevation: Grid<f64>,
        semantic: Grid<Label>,
        texture: Grid<[u8; 3]>,
    ) -> Self {
        assert!(resolution > 0.0);
        assert_eq!(
            (elevation.width(), elevation.height()),
            (semantic.width(), semantic.height())
        );
        assert_eq!(
            (elevation.width(), elevation.height()),
            (texture.width(), texture.height())
        );
        let (z_min, z_max) = elevation
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| {
                (lo.min(z), hi.max(z))
            });
        let block_max = block_maxima(&elevation);
        Self {
            resolution,
            elevation,
            semantic,
            texture,
            z_min,
            z_max,
            block_max,
        }
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.elevation.width()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.elevation.height()
    }

    pub fn extent(&self) -> [f64; 2] {
        [
            self.cols() as f64 * self.resolution,
            self.rows() as f64 * self.resolution,
        ]
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.z_min, self.z_max)
    }

    #[inline]
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        let [w, h] = self.extent();
        x >= 0.0 && y >= 0.0 && x < w && y < h
    }

    /// Cell containing `(x, y)`, if inside the terrain.
    #[inline]
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !self.contains_xy(x, y) {
            return None;
        }
        let c = ((x / self.resolution) as usize).min(self.cols() - 1);
        let r = ((y / self.resolution) as usize).min(self.rows() - 1);
        Some((c, r))
    }

    pub fn cell_center(&self, c: usize, r: usize) -> [f64; 2] {
        [
            (c as f64 + 0.5) * self.resolution,
            (r as f64 + 0.5) * self.resolution,
        ]
    }

    /// Bilinear surface height, clamped to the border cells outside the extent.
    #[inline]
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let fx = (x / self.resolution - 0.5).clamp(0.0, (self.cols() - 1) as f64);
        let fy = (y / self.resolution - 0.5).clamp(0.0, (self.rows() - 1) as f64);
        let c0 = (fx as usize).min(self.cols().saturating_sub(2));
        let r0 = (fy as usize).min(self.rows().saturating_sub(2));
        let c1 = (c0 + 1).min(self.cols() - 1);
        let r1 = (r0 + 1).min(self.rows() - 1);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let e = &self.elevation;
        let z00 = e[(c0, r0)];
        let z10 = e[(c1, r0)];
        let z01 = e[(c0, r1)];
        let z11 = e[(c1, r1)];
        let a = z00 + (z10 - z00) * tx;
        let b = z01 + (z11 - z01) * tx;
        a + (b - a) * ty
    }

    pub fn label_at(&self, x: f64, y: f64) -> Option<Label> {
        self.cell_of(x, y).map(|(c, r)| self.semantic[(c, r)])
    }

    pub fn color_at(&self, x: f64, y: f64) -> Option<[u8; 3]> {
        self.cell_of(x, y).map(|(c, r)| self.texture[(c, r)])
    }

    /// Ray parameter interval inside the terrain's xy extent and z range.
    fn clip(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<(f64, f64)> {
        let [w, h] = self.extent();
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for (oi, di, hi) in [(o.x, d.x, w), (o.y, d.y, h)] {
            if di.abs() < 1e-15 {
                if oi < 0.0 || oi >= hi {
                    return None;
                }
            } else {
                let a = (0.0 - oi) / di;
                let b = (hi - oi) / di;
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        let (zlo, zhi) = (self.z_min - 1e-6, self.z_max + 1e-6);
        if d.z.abs() < 1e-15 {
            if o.z < zlo || o.z > zhi {
                return None;
            }
        } else {
            let a = (zlo - o.z) / d.z;
            let b = (zhi - o.z) / d.z;
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t0 < t1 && t1.is_finite()).then_some((t0, t1))
    }

    /// First intersection of the ray `o + t d` with the surface. Blocks whose
    /// maximum height stays below the ray are skipped; elsewhere the ray
    /// marches in quarter-cell horizontal steps and the bracketing step is
    /// refined by regula falsi. Returns `t`.
    pub fn raycast(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<f64> {
        let (ta, tb) = self.clip(o, d)?;
        let f = |t: f64| o.z + t * d.z - self.height_at(o.x + t * d.x, o.y + t * d.y);
        let horiz = (d.x * d.x + d.y * d.y).sqrt();
        let dt = if horiz > 1e-12 {
            0.25 * self.resolution / horiz
        } else {
            f64::INFINITY
        };
        if f(ta) <= 0.0 {
            return Some(ta);
        }
        let bsize = BLOCK as f64 * self.resolution;
        let (bw, bh) = (self.block_max.width(), self.block_max.height());
        let mut t = ta;
        while t < tb {
            // block containing the ray just after `t`, and where the ray leaves it
            let (x, y) = (o.x + t * d.x, o.y + t * d.y);
            let bx = ((x / bsize).floor().max(0.0) as usize).min(bw - 1);
            let by = ((y / bsize).floor().max(0.0) as usize).min(bh - 1);
            let exit_x = axis_exit(o.x, d.x, bx, bsize);
            let exit_y = axis_exit(o.y, d.y, by, bsize);
            let t_exit = exit_x.min(exit_y).min(tb).max(t);
            let z_low = (o.z + t * d.z).min(o.z + t_exit * d.z);
            let bmax = self.block_max[(bx, by)];
            if z_low > bmax {
                if t_exit >= tb {
                    return None;
                }
                // step just past the block boundary
                t = t_exit + 1e-9 * (1.0 + t_exit.abs());
                continue;
            }
            // nothing in this block is hit before the ray descends to its maximum
            let mut t0 = t;
            if d.z < 0.0 && o.z + t * d.z > bmax {
                t0 = ((bmax - o.z) / d.z).clamp(t, t_exit);
            }
            loop {
                let t1 = (t0 + dt).min(t_exit);
                if f(t1) <= 0.0 {
                    return Some(self.bisect(&f, t0, t1));
                }
                if t1 >= t_exit {
                    break;
                }
                t0 = t1;
            }
            if t_exit >= tb {
                return None;
            }
            t = t_exit;
            if t_exit <= t0 {
                t += 1e-9 * (1.0 + t.abs());
            }
        }
        None
    }

    /// Root of `f` in `[lo, hi]` given `f(lo) > 0 >= f(hi)`: Illinois-style
    /// regula falsi, falling back to bisection steps when it stalls.
    fn bisect(&self, f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let (mut flo, mut fhi) = (f(lo), f(hi));
        let mut side = 0i8;
        for it in 0..60 {
            if hi - lo < 1e-9 {
                break;
            }
            let mut mid = if it % 4 == 3 {
                0.5 * (lo + hi)
            } else {
                (lo * fhi - hi * flo) / (fhi - flo)
            };
            if !(mid > lo && mid < hi) {
                mid = 0.5 * (lo + hi);
            }
            let fm = f(mid);
            if fm <= 0.0 {
                hi = mid;
                fhi = fm;
                if fm > -1e-10 {
                    break;
                }
                if side == -1 {
                    flo *= 0.5;
                }
                side = -1;
            } else {
                lo = mid;
                flo = fm;
                if side == 1 {
                    fhi *= 0.5;
                }
                side = 1;
            }
        }
        hi
    }

    /// Surface point hit by the ray, with `z` snapped to the surface height.
    pub fn intersect(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<Point3<f64>> {
        let t = self.raycast(o, d)?;
        let x = o.x + t * d.x;
        let y = o.y + t * d.y;
        if !self.contains_xy(x, y) {
            return None;
        }
        Some(Point3::new(x, y, self.height_at(x, y)))
    }

    /// Whether the surface point `p` is the first hit seen from `eye`.
    pub fn visible_from(&self, eye: &Point3<f64>, p: &Point3<f64>) -> bool {
        let v = p - eye;
        let dist = v.norm();
        if dist < 1e-9 {
            return true;
        }
        let d = v / dist;
        match self.raycast(eye, &d) {
            Some(t) => t >= dist - 0.5 * self.resolution,
            None => true,
        }
    }
}

/// Ray parameter at which `o + t d` leaves block `b` along one axis.
#[inline]
fn axis_exit(o: f64, d: f64, b: usize, size: f64) -> f64 {
    if d > 1e-15 {
        ((b + 1) as f64 * size - o) / d
    } else if d < -1e-15 {
        (b as f64 * size - o) / d
    } else {
        f64::INFINITY
    }
}

fn block_maxima(e: &Grid<f64>) -> Grid<f64> {
    let (w, h) = (e.width(), e.height());
    let (bw, bh) = (w.div_ceil(BLOCK), h.div_ceil(BLOCK));
    Grid::from_fn(bw.max(1), bh.max(1), |bx, by| {
        let c0 = (bx * BLOCK).saturating_sub(1);
        let r0 = (by * BLOCK).saturating_sub(1);
        let c1 = ((bx + 1) * BLOCK + 1).min(w);
        let r1 = ((by + 1) * BLOCK + 1).min(h);
        let mut m = f64::NEG_INFINITY;
        for r in r0..r1 {
            for &z in &e.row(r)[c0..c1] {
                m = m.max(z);
            }
        }
        m + 1e-9
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(cols: usize, rows: usize, z: f64) -> Terrain {
        Terrain::new(
            0.5,
            Grid::new(cols, rows, z),
            Grid::new(cols, rows, Label::Grass),
            Grid::new(cols, rows, [0, 255, 0]),
        )
    }

    #[test]
    fn bilinear_height_interpolates_centres() {
        let mut t = flat(4, 4, 0.0);
        t.elevation[(1, 1)] = 2.0;
        let t = Terrain::new(t.resolution, t.elevation, t.semantic, t.texture);
        let [x, y] = t.cell_center(1, 1);
        assert_eq!(t.height_at(x, y), 2.0);
        assert!((t.height_at(x + 0.25, y) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vertical_ray_hits_flat_ground() {
        let t = flat(100, 100, 3.0);
        let o = Point3::new(20.0, 20.0, 50.0);
        let p = t.intersect(&o, &-Vector3::z()).unwrap();
        assert!((p.z - 3.0).abs() < 1e-12);
        assert!((p.x - 20.0).abs() < 1e-12);
    }

    #[test]
    fn oblique_ray_hits_plane_where_expected() {
        let t = flat(200, 200, 0.0);
        let o = Point3::new(10.0, 10.0, 30.0);
        let d = Vector3::new(1.0, 0.0, -1.0).normalize();
        let p = t.intersect(&o, &d).unwrap();
        assert!((p.x - 40.0).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn ray_leaving_terrain_misses() {
        let t = flat(10, 10, 0.0);
        let o = Point3::new(2.0, 2.0, 30.0);
        assert!(t.intersect(&o, &Vector3::new(1.0, 0.0, -0.01).normalize()).is_none());
        assert!(t.intersect(&o, &Vector3::z()).is_none());
    }

    #[test]
    fn label_codes_round_trip() {
        for l in Label::ALL {
            assert_eq!(Label::from_code(l.code()), Some(l));
        }
        assert_eq!(Label::from_code(9), None);
    }

    /// Plain quarter-cell march over the whole clipped interval.
    fn march_oracle(t: &Terrain, o: &Point3<f64>, d: &Vector3<f64>) -> Option<f64> {
        let (ta, tb) = t.clip(o, d)?;
        let f = |s: f64| o.z + s * d.z - t.height_at(o.x + s * d.x, o.y + s * d.y);
        let step = 0.02 * t.resolution;
        let mut s = ta;
        while s < tb {
            let s1 = (s + step).min(tb);
            if f(s1) <= 0.0 {
                return Some(t.bisect(&f, s, s1));
            }
            s = s1;
        }
        None
    }

    #[test]
    fn block_skipping_matches_plain_march() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let (cols, rows) = (90, 70);
        let elevation = Grid::from_fn(cols, rows, |c, r| {
            let base = 0.05 * c as f64 + 2.0 * ((r as f64) * 0.2).sin();
            if (30..45).contains(&c) && (20..40).contains(&r) {
                base + 8.0 + rng.gen_range(0.0..1.5)
            } else {
                base
            }
        });
        let t = Terrain::new(
            0.5,
            elevation,
            Grid::new(cols, rows, Label::Grass),
            Grid::new(cols, rows, [0, 0, 0]),
        );
        let mut agree = 0;
        let n = 2000;
        for _ in 0..n {
            let o = Point3::new(rng.gen_range(-5.0..50.0), rng.gen_range(-5.0..40.0), rng.gen_range(15.0..60.0));
            let d = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..-0.05)).normalize();
            let fast = t.raycast(&o, &d);
            let slow = march_oracle(&t, &o, &d);
            if let Some(s) = fast {
                let p = o + s * d;
                // rays entering through the side of the block hit at the clip entry
                if s > t.clip(&o, &d).unwrap().0 {
                    assert!((p.z - t.height_at(p.x, p.y)).abs() < 1e-6);
                }
            }
            match (fast, slow) {
                (Some(a), Some(b)) if (a - b).abs() < 1e-6 => agree += 1,
                (None, None) => agree += 1,
                _ => {}
            }
        }
        // the plain march uses a finer step and can catch grazing hits the quarter-cell march steps over
        assert!(agree as f64 >= 0.99 * n as f64, "{agree}/{n}");
    }
}
