//! Bracketed scalar root finding.
//!
//! Plain bisection is enough everywhere in this crate: the threshold
//! equations are monotone on their brackets and we always know a sign
//! change in advance. Bisection is robust to the kinks introduced by the
//! capped attitude function, where derivative-based methods stall.

use crate::error::{Result, SolverError};
use crate::scalar::Real;

/// Find the root of `f` in `[lo, hi]` by bisection, down to interval width `tol`.
///
/// `f(lo)` and `f(hi)` must have opposite (or zero) signs.
pub fn bisect<F: Real>(f: impl Fn(F) -> F, lo: F, hi: F, tol: F) -> Result<F> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if !flo.is_finite() || !fhi.is_finite() {
        return Err(SolverError::Numeric(format!(
            "non-finite bracket values f({lo}) = {flo}, f({hi}) = {fhi}"
        )));
    }
    if flo == F::zero() {
        return Ok(lo);
    }
    if fhi == F::zero() {
        return Ok(hi);
    }
    if (flo > F::zero()) == (fhi > F::zero()) {
        return Err(SolverError::Argument(format!(
            "no sign change on bracket [{lo}, {hi}]"
        )));
    }
    // 200 halvings exhaust the mantissa of any practical scalar type.
    for _ in 0..200 {
        let mid = (lo + hi) * F::half();
        if hi - lo <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == F::zero() {
            return Ok(mid);
        }
        if (fm > F::zero()) == (flo > F::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * F::half())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2.0f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_bracket() {
        assert!(bisect(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn endpoint_root() {
        let r = bisect(|x: f64| x, 0.0, 1.0, 1e-12).unwrap();
        assert_eq!(r, 0.0);
    }
}
