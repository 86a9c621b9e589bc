//! Bracketing root finder and golden-section minimizer.

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Finds a root of `f` in `[lo, hi]` by bisection.
///
/// The endpoints must bracket a sign change (a zero at either endpoint counts).
/// Iteration stops once the bracket is narrower than `tol`, the midpoint is an
/// exact root, or the bracket cannot be split further in `T`'s precision.
pub fn bisect<T, F>(mut f: F, lo: T, hi: T, tol: T, max_iter: usize) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == T::zero() {
        return Ok(lo);
    }
    if f_hi == T::zero() {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(Error::BracketNoSignChange {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }

    let half = T::lit(0.5);
    for _ in 0..max_iter {
        let mid = lo + (hi - lo) * half;
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == T::zero() {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= tol {
        Ok(lo + (hi - lo) * half)
    } else {
        Err(Error::NoConvergence(max_iter))
    }
}

/// Minimizes a unimodal `f` on `[lo, hi]` by golden-section search.
/// Returns the abscissa and value of the best point evaluated.
pub fn golden_section_min<T, F>(mut f: F, lo: T, hi: T, tol: T, max_iter: usize) -> Result<(T, T)>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    // 1/phi
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);

    for _ in 0..max_iter {
        if b - a <= tol || c >= d {
            let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
            return Ok((x, fx));
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    if b - a <= tol {
        Ok(if fc <= fd { (c, fc) } else { (d, fd) })
    } else {
        Err(Error::NoConvergence(max_iter))
    }
}
