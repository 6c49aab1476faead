//! Adaptive Simpson quadrature with an absolute-error target.

use crate::error::Error;
use crate::Result;

const MAX_DEPTH: u32 = 60;

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Classic adaptive Simpson with the 1/15 Richardson error estimate. Returns
/// a numerical error if the integrand produces non-finite values or an
/// interval cannot reach its tolerance share within the depth limit.
pub fn adaptive_simpson(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Numerical {
            context: "adaptive_simpson",
            reason: format!("bad interval [{a}, {b}]"),
        });
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = eval(f, a)?;
    let fb = eval(f, b)?;
    let m = 0.5 * (a + b);
    let fm = eval(f, m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

fn eval(f: &mut impl FnMut(f64) -> f64, x: f64) -> Result<f64> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::Numerical {
            context: "adaptive_simpson",
            reason: format!("integrand returned {y} at x = {x}"),
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(f, lm)?;
    let frm = eval(f, rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || m <= a || m >= b {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numerical {
            context: "adaptive_simpson",
            reason: format!("failed to converge on [{a}, {b}] (residual {delta:e})"),
        });
    }
    let lv = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let rv = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(lv + rv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(&mut |x| 3.0 * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 8.0).abs() < 1e-11);
    }

    #[test]
    fn gaussian_integral() {
        // integral of exp(-x^2) over [0, 10] = sqrt(pi)/2.
        let v = adaptive_simpson(&mut |x: f64| (-x * x).exp(), 0.0, 10.0, 1e-10).unwrap();
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-9);
    }

    #[test]
    fn kinked_integrand() {
        // max(0, x - 1) over [0, 2] = 1/2; the kink forces subdivision.
        let v = adaptive_simpson(&mut |x: f64| (x - 1.0).max(0.0), 0.0, 2.0, 1e-10).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
    }

    #[test]
    fn nonfinite_integrand_is_an_error() {
        assert!(adaptive_simpson(&mut |x: f64| 1.0 / x, -1.0, 1.0, 1e-8).is_err());
    }
}
