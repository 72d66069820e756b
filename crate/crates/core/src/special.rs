//! Modified Bessel function of the second kind, K_nu.
//!
//! Half-integer orders reduce to elementary closed forms through
//! K_{1/2}(z) = sqrt(pi / 2z) e^{-z} and the upward recurrence
//! K_{nu+1}(z) = K_{nu-1}(z) + (2 nu / z) K_nu(z), which is stable for K.
//! Other orders are evaluated from the integral representation
//! K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt with the trapezoid
//! rule; the integrand is even and decays double-exponentially, so the
//! rule converges geometrically in the step size.

use crate::error::{Result, SolverError};
use crate::scalar::Real;

/// K_nu(z) for `nu >= 0`, `z > 0`.
pub fn bessel_k<F: Real>(nu: F, z: F) -> Result<F> {
    if !(z > F::zero()) || !z.is_finite() {
        return Err(SolverError::Domain(format!(
            "bessel_k requires z > 0, got {z}"
        )));
    }
    if nu < F::zero() || !nu.is_finite() {
        return Err(SolverError::Domain(format!(
            "bessel_k requires nu >= 0, got {nu}"
        )));
    }
    let two_nu = nu * F::two();
    let rounded = two_nu.round();
    if (two_nu - rounded).abs() < F::of(1e-12) && rounded.to_i64().map_or(false, |k| k % 2 == 1) {
        return Ok(half_integer_k(rounded.to_i64().unwrap(), z));
    }
    Ok(integral_k(nu, z))
}

/// K_{m/2}(z) for odd positive `m`, by recurrence from K_{±1/2}.
fn half_integer_k<F: Real>(m: i64, z: F) -> F {
    let base = (F::of(std::f64::consts::PI) / (F::two() * z)).sqrt() * (-z).exp();
    // K_{-1/2} = K_{1/2}
    let mut km1 = base;
    let mut k0 = base;
    let mut order = F::half();
    let steps = (m - 1) / 2;
    for _ in 0..steps {
        let k1 = km1 + (F::two() * order / z) * k0;
        km1 = k0;
        k0 = k1;
        order = order + F::one();
    }
    k0
}

fn integral_k<F: Real>(nu: F, z: F) -> F {
    // Work in log space per term to survive large nu t before the
    // exp(-z cosh t) decay takes over.
    let h = F::of(0.02);
    let mut sum = F::half() * (-z).exp(); // t = 0 term, cosh(0) = 1
    let mut t = h;
    let floor = F::of(-745.0); // below exp underflow for f64
    let mut peak = sum;
    loop {
        let log_term = -z * t.cosh() + ln_cosh(nu * t);
        let term = if log_term < floor {
            F::zero()
        } else {
            log_term.exp()
        };
        sum += term;
        if term > peak {
            peak = term;
        }
        if (term < peak * F::of(1e-18) && t > F::one()) || t > F::of(700.0) {
            break;
        }
        t = t + h;
    }
    sum * h
}

fn ln_cosh<F: Real>(x: F) -> F {
    let a = x.abs();
    a + (F::one() + (-F::two() * a).exp()).ln() - F::two().ln()
}

/// Modified Bessel function of the first kind, by its power series.
///
/// Only consumed as the increasing partner solution for Bessel models with
/// non-half-integer order; the series is fine for the argument ranges there.
pub fn bessel_i<F: Real>(nu: F, z: F) -> Result<F> {
    if !(z > F::zero()) || nu < F::zero() {
        return Err(SolverError::Domain(format!(
            "bessel_i requires z > 0 and nu >= 0, got nu={nu} z={z}"
        )));
    }
    let q = z * z / F::of(4.0);
    let mut term = (nu * (z * F::half()).ln() - ln_gamma(nu + F::one())).exp();
    let mut sum = term;
    for k in 0..500 {
        let kf = F::from_usize(k + 1).unwrap();
        term = term * q / (kf * (kf + nu));
        sum += term;
        if term < sum * F::of(1e-17) {
            break;
        }
    }
    Ok(sum)
}

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-14 for x > 0.
pub fn ln_gamma<F: Real>(x: F) -> F {
    const COEFFS: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let g = F::of(7.0);
    let x = x - F::one();
    let mut acc = F::of(0.999_999_999_999_809_93);
    for (i, &c) in COEFFS.iter().enumerate() {
        acc = acc + F::of(c) / (x + F::from_usize(i + 1).unwrap());
    }
    let t = x + g + F::half();
    let half_ln_two_pi = F::of(0.918_938_533_204_672_7);
    half_ln_two_pi + (x + F::half()) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_order_closed_form() {
        let expected = (std::f64::consts::PI / 2.0).sqrt() * (-1.0f64).exp();
        let got = bessel_k(0.5, 1.0).unwrap();
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
        assert!((got - 0.4610685).abs() < 1e-7);
    }

    #[test]
    fn three_halves_over_one_half_ratio() {
        let k12 = bessel_k(0.5f64, 2.0).unwrap();
        let k32 = bessel_k(1.5f64, 2.0).unwrap();
        assert!((k32 / k12 - 1.5).abs() < 1e-13);
    }

    #[test]
    fn recurrence_residual_small() {
        for &(nu, z) in &[(0.7f64, 0.9), (1.3, 2.5), (0.25, 4.0), (2.2, 1.7)] {
            let km = bessel_k(nu - 1.0 + 1.0, z).unwrap(); // K_nu
            let klo = bessel_k(nu - 1.0, z).unwrap_or_else(|_| {
                // nu - 1 < 0: K_{-a} = K_a
                bessel_k(1.0 - nu, z).unwrap()
            });
            let khi = bessel_k(nu + 1.0, z).unwrap();
            let resid = khi - klo - (2.0 * nu / z) * km;
            assert!(
                resid.abs() < 1e-9 * khi.max(1.0),
                "nu={nu} z={z} resid={resid}"
            );
        }
    }

    #[test]
    fn integral_matches_half_integer_route() {
        // 1.5 is half-integer; force the integral path via a nearby order
        // and compare against the recurrence value by continuity, then
        // check the exact order through both routes at machine-ish level.
        let exact = half_integer_k(3, 2.0f64);
        let quad = integral_k(1.5f64, 2.0);
        assert!((quad - exact).abs() / exact < 1e-10, "{quad} vs {exact}");
    }

    #[test]
    fn positive_and_decreasing_in_z() {
        let mut prev = f64::INFINITY;
        for i in 1..40 {
            let z = 0.2 * i as f64;
            let v = bessel_k(0.8f64, z).unwrap();
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn ln_gamma_factorials() {
        assert!((ln_gamma(5.0f64) - 24.0f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(1.0f64)).abs() < 1e-13);
        // Gamma(1/2) = sqrt(pi)
        assert!((ln_gamma(0.5f64) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn bessel_i_half_order_closed_form() {
        // I_{1/2}(z) = sqrt(2 / (pi z)) sinh z
        let z = 1.7f64;
        let expected = (2.0 / (std::f64::consts::PI * z)).sqrt() * z.sinh();
        let got = bessel_i(0.5f64, z).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn rejects_bad_domain() {
        assert!(bessel_k(0.5f64, 0.0).is_err());
        assert!(bessel_k(0.5f64, -1.0).is_err());
        assert!(bessel_k(-0.5f64, 1.0).is_err());
    }
}
