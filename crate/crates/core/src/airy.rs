//! Airy function of the first kind on the real line, by Maclaurin
//! series near the origin and saddle-point contour quadrature of the
//! integral representation farther out. The two methods overlap on
//! `[-6, 6]` and cross-validate there.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Ai(0) = 3^{-2/3} / Gamma(2/3)
pub const AIRY_AT_ZERO: f64 = 0.355_028_053_887_817_24;
/// Ai'(0) = -3^{-1/3} / Gamma(1/3)
pub const AIRY_PRIME_AT_ZERO: f64 = -0.258_819_403_792_806_8;
/// Range guard: beyond this the quadrature scales are not tuned.
pub const RANGE_GUARD: f64 = 30.0;

/// Maclaurin series `Ai(z) = Ai(0) f(z) + Ai'(0) g(z)`; accurate to
/// ~1e-12 on `[-6, 6]` where cancellation stays mild.
pub fn airy_ai_series(z: f64) -> f64 {
    let z3 = z * z * z;
    let mut f_term = 1.0; // z^{3k} prefactors of the f-series
    let mut g_term = z;
    let mut f_sum = f_term;
    let mut g_sum = g_term;
    for k in 0..60u32 {
        let k3 = 3.0 * k as f64;
        f_term *= z3 / ((k3 + 2.0) * (k3 + 3.0));
        g_term *= z3 / ((k3 + 3.0) * (k3 + 4.0));
        f_sum += f_term;
        g_sum += g_term;
        if f_term.abs() < 1e-18 * f_sum.abs().max(1e-30)
            && g_term.abs() < 1e-18 * g_sum.abs().max(1e-30)
        {
            break;
        }
    }
    AIRY_AT_ZERO * f_sum + AIRY_PRIME_AT_ZERO * g_sum
}

/// Trapezoid of `im(exp(phase(s e^{i dir}) + i dir))` over `s` in
/// `[lo, hi]`, doubled until stable: the generic one-sided ray integral
/// for conjugate-symmetric contours.
pub(crate) fn ray_integral<P>(phase: P, lo: f64, hi: f64, tol: f64) -> f64
where
    P: Fn(f64) -> Complex64,
{
    let mut n = 256usize;
    let mut prev = f64::NAN;
    loop {
        let h = (hi - lo) / n as f64;
        let mut acc = 0.5 * (phase(lo).exp().im + phase(hi).exp().im);
        for k in 1..n {
            acc += phase(lo + k as f64 * h).exp().im;
        }
        let val = acc * h;
        if (val - prev).abs() < tol * val.abs().max(0.01) || n >= (1 << 19) {
            return val;
        }
        prev = val;
        n *= 2;
    }
}

/// Contour evaluation of `Ai(z)` through the saddle(s) of
/// `w^3/3 - z w`: a vertical steepest-descent line through `sqrt(z)`
/// for `z > 1/2`, the two `45-degree` lines through `+-i sqrt(-z)`
/// joined at `-sqrt(-z)` for `z < -1/2`, and the plain `60-degree`
/// chevron through the origin in between.
pub fn airy_ai_contour(z: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};
    let phase = move |w: Complex64| w * w * w / 3.0 - z * w;
    if z > 0.5 {
        // w = sqrt(z) + i tau: phase = -(2/3) z^{3/2} - sqrt(z) tau^2 - i tau^3/3
        let rz = z.sqrt();
        let t_max = (45.0 / rz).sqrt() + 2.0;
        let mut n = 512usize;
        let mut prev = f64::NAN;
        loop {
            let h = 2.0 * t_max / n as f64;
            let mut acc = 0.0;
            for k in 0..=n {
                let tau = -t_max + k as f64 * h;
                let w = (-rz * tau * tau).exp() * (tau * tau * tau / 3.0).cos();
                acc += if k == 0 || k == n { 0.5 * w } else { w };
            }
            let val = acc * h * (-2.0 / 3.0 * z * rz).exp() / (2.0 * PI);
            if (val - prev).abs() < 1e-13 * val.abs().max(1e-300) || n >= (1 << 18) {
                return val;
            }
            prev = val;
            n *= 2;
        }
    } else if z < -0.5 {
        // join the steepest lines through the saddles +-i a at w = -a
        let a = (-z).sqrt();
        let dir = FRAC_PI_4;
        let e = Complex64::new(dir.cos(), dir.sin());
        let top = Complex64::new(0.0, a);
        let lo = -std::f64::consts::SQRT_2 * a;
        let hi = (45.0_f64 / a.max(0.3)).sqrt().max((135.0f64).cbrt()) + 3.0;
        let p = move |s: f64| phase(top + s * e) + Complex64::new(0.0, dir);
        ray_integral(p, lo, hi, 1e-15) / PI
    } else {
        // chevron through the origin along +-60 degrees
        let dir = FRAC_PI_3;
        let e = Complex64::new(dir.cos(), dir.sin());
        let hi = 7.0;
        let p = move |s: f64| phase(s * e) + Complex64::new(0.0, dir);
        ray_integral(p, 0.0, hi, 1e-15) / PI
    }
}

/// `Ai(z)` with automatic method choice and the `|z| <= 30` guard.
pub fn airy_ai(z: f64) -> Result<f64> {
    if !z.is_finite() || z.abs() > RANGE_GUARD {
        return Err(Error::OutOfRange(format!("airy argument {z}")));
    }
    Ok(if z.abs() <= 6.0 {
        airy_ai_series(z)
    } else {
        airy_ai_contour(z)
    })
}

/// First (largest) real zero of Ai, by bisection on the series.
pub fn airy_first_zero() -> f64 {
    let mut lo = -3.0f64;
    let mut hi = -2.0f64;
    debug_assert!(airy_ai_series(lo) < 0.0 && airy_ai_series(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if airy_ai_series(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_at_reference_points() {
        assert!((airy_ai_series(0.0) - 0.355_028_053_887_817_24).abs() < 1e-12);
        assert!((airy_ai_series(1.0) - 0.135_292_416_312_881_42).abs() < 1e-12);
        assert!((airy_ai_series(-1.0) - 0.535_560_883_292_352_6).abs() < 1e-11);
    }

    #[test]
    fn first_zero_location() {
        assert!((airy_first_zero() - (-2.338_107_410_459_767)).abs() < 1e-9);
        assert!(airy_ai(-2.338_107_410_459_767).unwrap().abs() < 1e-9);
    }

    #[test]
    fn series_and_contour_agree_on_overlap() {
        let mut z = -6.0;
        while z <= 6.0 {
            let s = airy_ai_series(z);
            let c = airy_ai_contour(z);
            assert!((s - c).abs() < 1e-10, "z = {z}: {s} vs {c}");
            z += 0.25;
        }
    }

    #[test]
    fn contour_far_out() {
        // reference values to 16 digits
        assert!((airy_ai_contour(10.0) - 1.104_753_255_289_868_6e-10).abs() < 1e-23);
        assert!((airy_ai_contour(-10.0) - 0.040_241_238_486_443_19).abs() < 1e-10);
    }

    #[test]
    fn range_guard() {
        assert!(airy_ai(31.0).is_err());
        assert!(airy_ai(f64::NAN).is_err());
    }
}
