use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;

/// Real spherical harmonics through degree 3.
pub const SH_COEFFS: usize = 16;

/// Evaluates the degree-3 real spherical-harmonic basis at a unit direction.
pub fn encode_direction<T: Real>(d: Vec3<T>) -> Result<[T; SH_COEFFS]> {
    let norm = d.norm();
    if !((norm - T::one()).abs() <= T::lit(1e-6)) {
        return Err(Error::InvalidDirection(norm.as_f64()));
    }
    Ok(encode_direction_unchecked(d))
}

#[inline]
pub fn encode_direction_unchecked<T: Real>(d: Vec3<T>) -> [T; SH_COEFFS] {
    let c = T::lit;
    let (x, y, z) = (d.x, d.y, d.z);
    let (xx, yy, zz) = (x * x, y * y, z * z);
    [
        c(0.28209479177387814),
        c(-0.48860251190291987) * y,
        c(0.48860251190291987) * z,
        c(-0.48860251190291987) * x,
        c(1.0925484305920792) * x * y,
        c(-1.0925484305920792) * y * z,
        c(0.94617469575755997) * zz - c(0.31539156525251999),
        c(-1.0925484305920792) * x * z,
        c(0.54627421529603959) * (xx - yy),
        c(0.59004358992664352) * y * (c(-3.0) * xx + yy),
        c(2.8906114426405538) * x * y * z,
        c(0.45704579946446572) * y * (c(1.0) - c(5.0) * zz),
        c(0.3731763325901154) * z * (c(5.0) * zz - c(3.0)),
        c(0.45704579946446572) * x * (c(1.0) - c(5.0) * zz),
        c(1.4453057213202769) * z * (xx - yy),
        c(0.59004358992664352) * x * (c(3.0) * yy - xx),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_band() {
        let e = encode_direction(Vec3::new(0.0f64, 0.6, 0.8)).unwrap();
        assert_eq!(e.len(), 16);
        assert!((e[0] - 1.0 / (2.0 * std::f64::consts::PI.sqrt())).abs() < 1e-15);
        assert!((e[0] - 0.2820948).abs() < 1e-7);
    }

    #[test]
    fn parity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let d = Vec3::new(
                rng.gen_range(-1.0f64..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalized();
            let a = encode_direction(d).unwrap();
            let b = encode_direction(-d).unwrap();
            for (k, (p, q)) in a.iter().zip(&b).enumerate() {
                let band = (k as f64).sqrt().floor() as usize;
                let expected = if band % 2 == 0 { *p } else { -*p };
                assert!((q - expected).abs() < 1e-14, "coefficient {k}");
            }
        }
    }

    #[test]
    fn orthonormal_under_quadrature() {
        // Monte Carlo estimate of ∫ Yᵢ Yⱼ dΩ ≈ δᵢⱼ.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mut gram = [[0.0f64; 16]; 16];
        for _ in 0..n {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = (1.0 - z * z).sqrt();
            let e = encode_direction_unchecked(Vec3::new(r * phi.cos(), r * phi.sin(), z));
            for i in 0..16 {
                for j in 0..16 {
                    gram[i][j] += e[i] * e[j];
                }
            }
        }
        let scale = 4.0 * std::f64::consts::PI / n as f64;
        for i in 0..16 {
            for j in 0..16 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] * scale - target).abs() < 0.05, "({i},{j})");
            }
        }
    }

    #[test]
    fn rejects_non_unit() {
        assert!(matches!(
            encode_direction(Vec3::new(0.0f64, 0.0, 2.0)),
            Err(Error::InvalidDirection(_))
        ));
    }
}
