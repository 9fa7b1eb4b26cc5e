//! Adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the odd Kronrod nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 48;

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kron += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]` until the Kronrod/Gauss error estimate of
/// every panel is below its share of `rel_tol * |integral| + abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    let (whole, _) = kronrod(&f, a, b);
    let tol = (rel_tol * whole.abs()).max(abs_tol);
    let floor = 1e-15 * whole.abs();
    let value = refine(&f, a, b, tol, floor, 0)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numeric(format!("quadrature over [{a}, {b}] produced {value}")))
    }
}

/// `floor` is a roundoff level below which a panel's error is ignored.
fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, floor: f64, depth: u32) -> Result<f64> {
    let (value, err) = kronrod(f, a, b);
    if err <= tol.max(floor) || err <= 1e-15 * value.abs() {
        return Ok(value);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Numeric(format!(
            "quadrature did not converge on [{a}, {b}]: error estimate {err:e} > {tol:e}"
        )));
    }
    let mid = 0.5 * (a + b);
    Ok(refine(f, a, mid, tol / 2.0, floor, depth + 1)? + refine(f, mid, b, tol / 2.0, floor, depth + 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        let g: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert_relative_eq!(k, 2.0, epsilon = 1e-14);
        assert_relative_eq!(g, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn known_integrals() {
        // Gauss 7-point is exact through degree 13.
        let v = integrate(|x| x.powi(13) + 3.0 * x * x, 0.0, 1.0, 1e-14, 0.0).unwrap();
        assert_relative_eq!(v, 1.0 / 14.0 + 1.0, max_relative = 1e-14);
        let v = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-13, 0.0).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-13);
        let v = integrate(|x| 1.0 / (1.0 + x * x), 0.0, 1000.0, 1e-12, 0.0).unwrap();
        assert_relative_eq!(v, 1000f64.atan(), max_relative = 1e-12);
        let v = integrate(f64::sqrt, 0.0, 1.0, 1e-10, 0.0).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, max_relative = 1e-10);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        assert!(integrate(|x| 1.0 / x, 0.0, 1.0, 1e-10, 0.0).is_err());
    }
}
