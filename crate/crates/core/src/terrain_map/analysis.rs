use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{HazardThresholds, Layer, TriMode};
use crate::imgproc::edt;
use crate::raster::Grid;

const NEIGHBOURS: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Elevations of the 3x3 block around `(c, r)`, centre included, if all valid.
fn block(e: &Layer, c: usize, r: usize) -> Option<[(i64, i64, f64); 9]> {
    let (w, h) = (e.values.width(), e.values.height());
    if c == 0 || r == 0 || c + 1 >= w || r + 1 >= h {
        return None;
    }
    let mut out = [(0, 0, 0.0); 9];
    out[0] = (0, 0, e.get(c, r)?);
    for (k, &(dx, dy)) in NEIGHBOURS.iter().enumerate() {
        let z = e.get((c as i64 + dx) as usize, (r as i64 + dy) as usize)?;
        out[k + 1] = (dx, dy, z);
    }
    Some(out)
}

/// Upward unit normal of the plane fitted by PCA to 3x3 cell centres.
fn pca_normal(b: &[(i64, i64, f64); 9], resolution: f64) -> Vector3<f64> {
    let pts = b.map(|(dx, dy, z)| Vector3::new(dx as f64 * resolution, dy as f64 * resolution, z - b[0].2));
    let mean = pts.iter().sum::<Vector3<f64>>() / 9.0;
    let cov = pts.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - mean;
        acc + d * d.transpose()
    });
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imin();
    let n = eig.eigenvectors.column(k).normalize();
    if n.z < 0.0 {
        -n
    } else {
        n
    }
}

/// Per-cell `n_z` and slope `acos(n_z)` from a PCA plane fit over the 3x3
/// neighbourhood. Border cells and cells next to invalid elevation are invalid.
pub fn normals_and_slope(elevation: &Layer, resolution: f64) -> (Layer, Layer) {
    let (w, h) = (elevation.values.width(), elevation.values.height());
    let mut nz = Layer::invalid(w, h);
    let mut slope = Layer::invalid(w, h);
    for r in 0..h {
        for c in 0..w {
            if let Some(b) = block(elevation, c, r) {
                let z = pca_normal(&b, resolution).z.clamp(0.0, 1.0);
                nz.values[(c, r)] = z;
                nz.valid[(c, r)] = true;
                slope.values[(c, r)] = z.acos();
                slope.valid[(c, r)] = true;
            }
        }
    }
    (nz, slope)
}

/// Terrain ruggedness index from the elevation differences to the 8 neighbours.
pub fn tri(elevation: &Layer, mode: TriMode) -> Layer {
    let (w, h) = (elevation.values.width(), elevation.values.height());
    let mut out = Layer::invalid(w, h);
    for r in 0..h {
        for c in 0..w {
            if let Some(b) = block(elevation, c, r) {
                let e0 = b[0].2;
                let v = match mode {
                    TriMode::RootSumSquare => b[1..].iter().map(|&(_, _, z)| (z - e0).powi(2)).sum::<f64>().sqrt(),
                    TriMode::MeanAbs => b[1..].iter().map(|&(_, _, z)| (z - e0).abs()).sum::<f64>() / 8.0,
                };
                out.values[(c, r)] = v;
                out.valid[(c, r)] = true;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HazardLayers {
    pub slope: Grid<u8>,
    pub rough: Grid<u8>,
    pub fused: Grid<u8>,
}

/// Thresholds slope and roughness on grass cells and ORs them. Cells that are
/// not grass or lack a valid slope or roughness are hazards in the fused layer.
pub fn fuse_hazards(slope: &Layer, roughness: &Layer, grass: &Grid<u8>, th: &HazardThresholds) -> HazardLayers {
    let (w, h) = (grass.width(), grass.height());
    let mut bs = Grid::new(w, h, 0u8);
    let mut br = Grid::new(w, h, 0u8);
    let mut fused = Grid::new(w, h, 0u8);
    for r in 0..h {
        for c in 0..w {
            let is_grass = grass[(c, r)] != 0;
            let (s, t) = (slope.get(c, r), roughness.get(c, r));
            if is_grass {
                bs[(c, r)] = u8::from(s.is_some_and(|s| s > th.max_slope));
                br[(c, r)] = u8::from(t.is_some_and(|t| t > th.max_tri));
            }
            let hazard = !is_grass || s.is_none() || t.is_none() || bs[(c, r)] != 0 || br[(c, r)] != 0;
            fused[(c, r)] = u8::from(hazard);
        }
    }
    HazardLayers {
        slope: bs,
        rough: br,
        fused,
    }
}

/// Metres from each cell centre to the nearest hazard cell centre; infinite
/// when there is no hazard.
pub fn hazard_distance(fused: &Grid<u8>, resolution: f64) -> Grid<f64> {
    edt(fused).map(|&d| d * resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layer_from(w: usize, h: usize, f: impl Fn(f64, f64) -> f64) -> Layer {
        Layer {
            values: Grid::from_fn(w, h, |c, r| f(c as f64 + 0.5, r as f64 + 0.5)),
            valid: Grid::new(w, h, true),
        }
    }

    #[test]
    fn flat_has_vertical_normals() {
        let e = layer_from(6, 6, |_, _| 3.0);
        let (nz, s) = normals_and_slope(&e, 1.0);
        assert_eq!(nz.valid_count(), 16);
        for r in 1..5 {
            for c in 1..5 {
                assert!((nz.get(c, r).unwrap() - 1.0).abs() < 1e-12);
                assert!(s.get(c, r).unwrap().abs() < 1e-6);
            }
        }
        assert!(nz.get(0, 3).is_none());
    }

    #[test]
    fn ramp_slope_in_every_direction() {
        let t = 30f64.to_radians();
        for k in 0..8 {
            let phi = k as f64 * std::f64::consts::FRAC_PI_4 + 0.1;
            let e = layer_from(7, 7, |x, y| (x * phi.cos() + y * phi.sin()) * t.tan());
            let (nz, s) = normals_and_slope(&e, 1.0);
            for r in 1..6 {
                for c in 1..6 {
                    assert!((s.get(c, r).unwrap() - 0.5235987755982988).abs() < 1e-6);
                    assert!((s.get(c, r).unwrap() - nz.get(c, r).unwrap().acos()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn resolution_scales_slope() {
        // same height steps over 2 m cells halve the gradient
        let e = layer_from(5, 5, |x, _| x);
        let (_, s) = normals_and_slope(&e, 2.0);
        assert!((s.get(2, 2).unwrap() - 0.5f64.atan()).abs() < 1e-9);
    }

    #[test]
    fn invalid_neighbour_invalidates() {
        let mut e = layer_from(5, 5, |_, _| 0.0);
        e.valid[(2, 1)] = false;
        let (nz, _) = normals_and_slope(&e, 1.0);
        assert!(nz.get(2, 2).is_none());
        assert!(nz.get(3, 3).is_some());
        assert!(tri(&e, TriMode::RootSumSquare).get(1, 2).is_none());
    }

    #[test]
    fn tri_single_bump() {
        let mut e = layer_from(5, 5, |_, _| 0.0);
        e.values[(2, 2)] = 1.0;
        let t = tri(&e, TriMode::RootSumSquare);
        assert!((t.get(2, 2).unwrap() - 8f64.sqrt()).abs() < 1e-12);
        for &(dx, dy) in &NEIGHBOURS {
            let v = t.get((2 + dx) as usize, (2 + dy) as usize);
            if let Some(v) = v {
                assert!(v >= 1.0);
            }
        }
        assert!((t.get(1, 1).unwrap() - 1.0).abs() < 1e-12);
        let m = tri(&e, TriMode::MeanAbs);
        assert!((m.get(2, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!((m.get(1, 1).unwrap() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn flat_grass_has_no_hazard() {
        let e = layer_from(6, 6, |_, _| 0.0);
        let (_, s) = normals_and_slope(&e, 1.0);
        let t = tri(&e, TriMode::RootSumSquare);
        let g = Grid::new(6, 6, 1u8);
        let hz = fuse_hazards(&s, &t, &g, &HazardThresholds::default());
        // border cells have no slope and count as hazards
        for r in 1..5 {
            for c in 1..5 {
                assert_eq!(hz.fused[(c, r)], 0);
            }
        }
        assert_eq!(hz.fused[(0, 0)], 1);
    }

    #[test]
    fn non_grass_is_hazard() {
        let e = layer_from(6, 6, |_, _| 0.0);
        let (_, s) = normals_and_slope(&e, 1.0);
        let t = tri(&e, TriMode::RootSumSquare);
        let mut g = Grid::new(6, 6, 1u8);
        g[(3, 3)] = 0;
        let hz = fuse_hazards(&s, &t, &g, &HazardThresholds::default());
        assert_eq!(hz.fused[(3, 3)], 1);
        assert_eq!(hz.slope[(3, 3)], 0);
        assert_eq!(hz.fused[(2, 3)], 0);
    }

    #[test]
    fn parabolic_slope_boundary() {
        // z = a x^2 has slope atan(2 a x); the threshold is crossed at
        // x* = tan(max_slope) / (2 a)
        let a = 0.01;
        let th = HazardThresholds {
            max_slope: 0.105,
            max_tri: 1e9,
        };
        let e = layer_from(20, 5, |x, _| a * x * x);
        let (_, s) = normals_and_slope(&e, 1.0);
        let t = tri(&e, TriMode::RootSumSquare);
        let g = Grid::new(20, 5, 1u8);
        let hz = fuse_hazards(&s, &t, &g, &th);
        let x_star = th.max_slope.tan() / (2.0 * a);
        let first = (1..19).find(|&c| hz.slope[(c, 2)] == 1).unwrap();
        let expected = (x_star - 0.5).ceil() as usize;
        assert!((first as i64 - expected as i64).abs() <= 1, "{first} vs {expected}");
    }

    #[test]
    fn hazard_free_distance_is_infinite() {
        let d = hazard_distance(&Grid::new(4, 4, 0u8), 1.0);
        assert!(d.as_slice().iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn single_hazard_neighbours() {
        let mut m = Grid::new(5, 5, 0u8);
        m[(2, 2)] = 1;
        let d = hazard_distance(&m, 0.5);
        assert_eq!(d[(2, 2)], 0.0);
        assert!((d[(3, 2)] - 0.5).abs() < 1e-12);
        assert!((d[(3, 3)] - 0.5 * 2f64.sqrt()).abs() < 1e-12);
    }

    fn brute(m: &Grid<u8>, res: f64) -> Grid<f64> {
        let hz: Vec<(usize, usize)> = m.indexed().filter(|t| *t.2 != 0).map(|t| (t.0, t.1)).collect();
        Grid::from_fn(m.width(), m.height(), |c, r| {
            hz.iter()
                .map(|&(x, y)| (((x as f64 - c as f64).powi(2) + (y as f64 - r as f64).powi(2)).sqrt()) * res)
                .fold(f64::INFINITY, f64::min)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn distance_matches_brute_force(bits in prop::collection::vec(prop::bool::weighted(0.02), 64 * 64)) {
            let m = Grid::from_vec(64, 64, bits.iter().map(|&b| u8::from(b)).collect());
            let d = hazard_distance(&m, 1.0);
            let b = brute(&m, 1.0);
            for (c, r, &v) in d.indexed() {
                let e = b[(c, r)];
                prop_assert!(v == e || (v - e).abs() < 1e-12, "{v} {e}");
                prop_assert_eq!(v == 0.0, m[(c, r)] != 0);
            }
        }

        #[test]
        fn adding_hazard_never_increases_distance(
            bits in prop::collection::vec(prop::bool::weighted(0.03), 32 * 32),
            extra in (0usize..32, 0usize..32),
        ) {
            let m = Grid::from_vec(32, 32, bits.iter().map(|&b| u8::from(b)).collect());
            let mut m2 = m.clone();
            m2[extra] = 1;
            let (d1, d2) = (hazard_distance(&m, 1.0), hazard_distance(&m2, 1.0));
            for (a, b) in d1.as_slice().iter().zip(d2.as_slice()) {
                prop_assert!(b <= a);
            }
        }

        #[test]
        fn tri_translation_invariant(vals in prop::collection::vec(-10.0f64..10.0, 36), k in -100.0f64..100.0) {
            let e = Layer { values: Grid::from_vec(6, 6, vals.clone()), valid: Grid::new(6, 6, true) };
            let e2 = Layer { values: Grid::from_vec(6, 6, vals.iter().map(|v| v + k).collect()), valid: Grid::new(6, 6, true) };
            let (t1, t2) = (tri(&e, TriMode::RootSumSquare), tri(&e2, TriMode::RootSumSquare));
            for r in 1..5 { for c in 1..5 {
                prop_assert!((t1.get(c, r).unwrap() - t2.get(c, r).unwrap()).abs() < 1e-9);
            }}
        }

        #[test]
        fn slope_is_arccos_of_normal(vals in prop::collection::vec(-3.0f64..3.0, 49)) {
            let e = Layer { values: Grid::from_vec(7, 7, vals), valid: Grid::new(7, 7, true) };
            let (nz, s) = normals_and_slope(&e, 1.0);
            for (c, r, &v) in nz.valid.indexed() {
                prop_assert_eq!(v, s.valid[(c, r)]);
                if v {
                    let n = nz.values[(c, r)];
                    prop_assert!((0.0..=1.0).contains(&n));
                    prop_assert!((s.values[(c, r)] - n.acos()).abs() < 1e-12);
                }
            }
        }
    }
}
