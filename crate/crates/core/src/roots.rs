//! Bracketing root finders.

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;

/// Brent's method on a bracket `[a, b]` with `f(a)` and `f(b)` of opposite sign.
///
/// Terminates when the bracket half-width is below `xtol` (plus a few ulps
/// of the current iterate) or `f` is exactly zero.
pub fn brent<F>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let fa = f(a)?;
    let fb = f(b)?;
    brent_with_values(f, a, fa, b, fb, xtol)
}

/// Same as [`brent`] when the endpoint values are already known.
pub fn brent_with_values<F>(
    mut f: F,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    xtol: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidBracket { a, b });
    }
    let mut c = b;
    let mut fc = fb;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, or secant when a == c
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b)?;
    }
    Err(Error::RootNotConverged(MAX_ITER))
}

/// Plain bisection, used where only the sign of `f` is trustworthy.
pub fn bisect<F>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidBracket { a, b });
    }
    for _ in 0..MAX_ITER {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= xtol || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_sqrt2() {
        let r = brent(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn brent_handles_flat_cubic() {
        let r = brent(|x| Ok((x - 1.0).powi(3)), 0.0, 3.0, 1e-12).unwrap();
        assert!((r - 1.0).abs() < 1e-4);
    }

    #[test]
    fn brent_rejects_bad_bracket() {
        let err = brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::InvalidBracket { .. }));
    }

    #[test]
    fn bisect_cos() {
        let r = bisect(|x: f64| Ok(x.cos()), 1.0, 2.0, 1e-13).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
