//! Order-independent procedural noise: every value is a pure function of a
//! seed and integer coordinates, so terrain synthesis never depends on
//! iteration order.

#[inline]
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub(crate) fn hash3(seed: u64, a: i64, b: i64) -> u64 {
    let h = splitmix64(seed ^ (a as u64).wrapping_mul(0x1000_0000_01B3));
    splitmix64(h ^ (b as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
}

/// Uniform in `[0, 1)`.
#[inline]
pub(crate) fn uniform(seed: u64, a: i64, b: i64) -> f64 {
    (hash3(seed, a, b) >> 11) as f64 / (1u64 << 53) as f64
}

/// Standard normal via Box-Muller on two hashed uniforms.
#[inline]
pub(crate) fn normal(seed: u64, a: i64, b: i64) -> f64 {
    let u1 = uniform(seed, a, b).max(1e-300);
    let u2 = uniform(seed ^ 0xA5A5_A5A5_5A5A_5A5A, a, b);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Smooth value noise in `[-1, 1]` with lattice spacing `wavelength`.
pub(crate) fn value_noise(seed: u64, x: f64, y: f64, wavelength: f64) -> f64 {
    let fx = x / wavelength;
    let fy = y / wavelength;
    let (ix, iy) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - ix, fy - iy);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (sx, sy) = (s(tx), s(ty));
    let v = |dx: i64, dy: i64| 2.0 * uniform(seed, ix as i64 + dx, iy as i64 + dy) - 1.0;
    let a = v(0, 0) + (v(1, 0) - v(0, 0)) * sx;
    let b = v(0, 1) + (v(1, 1) - v(0, 1)) * sx;
    a + (b - a) * sy
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_samples_have_unit_moments() {
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|i| normal(7, i, 3)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn value_noise_is_bounded_and_continuous() {
        for i in 0..500 {
            let x = i as f64 * 0.37;
            let v = value_noise(3, x, 2.0 * x, 10.0);
            assert!((-1.0..=1.0).contains(&v));
            let w = value_noise(3, x + 1e-6, 2.0 * x, 10.0);
            assert!((v - w).abs() < 1e-5);
        }
    }
}
