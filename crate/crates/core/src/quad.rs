//! Adaptive Simpson quadrature on finite intervals.

use crate::{Error, Real, Result};

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature<T> {
    pub value: T,
    /// Sum of the local Richardson error estimates.
    pub error_estimate: T,
    pub evaluations: usize,
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Fails if any subinterval would have to be split deeper than `max_depth`
/// levels to reach its share of the tolerance, or if `f` returns a non-finite
/// value.
pub fn adaptive_simpson<T, F>(f: F, a: T, b: T, tol: T, max_depth: usize) -> Result<Quadrature<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(a, b, fa, fm, fb);
    let mut evaluations = 3;
    let mut error_estimate = T::zero();
    let value = recurse(
        &f,
        Segment { a, b, fa, fm, fb, whole },
        tol,
        max_depth,
        &mut evaluations,
        &mut error_estimate,
    )?;
    if !value.is_finite() {
        return Err(Error::Numerical("quadrature produced a non-finite value".into()));
    }
    Ok(Quadrature { value, error_estimate, evaluations })
}

struct Segment<T> {
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
}

fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

fn recurse<T, F>(
    f: &F,
    s: Segment<T>,
    tol: T,
    depth: usize,
    evaluations: &mut usize,
    error_estimate: &mut T,
) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    let two = T::lit(2.0);
    let m = (s.a + s.b) / two;
    let lm = (s.a + m) / two;
    let rm = (m + s.b) / two;
    let flm = f(lm);
    let frm = f(rm);
    *evaluations += 2;
    if !flm.is_finite() || !frm.is_finite() {
        return Err(Error::Numerical(format!(
            "integrand not finite near {:.6e}",
            lm.as_f64()
        )));
    }
    let left = simpson(s.a, m, s.fa, flm, s.fm);
    let right = simpson(m, s.b, s.fm, frm, s.fb);
    let delta = left + right - s.whole;
    if delta.abs() <= T::lit(15.0) * tol {
        *error_estimate = *error_estimate + delta.abs() / T::lit(15.0);
        return Ok(left + right + delta / T::lit(15.0));
    }
    if depth == 0 {
        return Err(Error::Numerical(format!(
            "adaptive Simpson exhausted its depth on [{:.6e}, {:.6e}] (local error {:.3e} > {:.3e})",
            s.a.as_f64(),
            s.b.as_f64(),
            (delta.abs() / T::lit(15.0)).as_f64(),
            tol.as_f64()
        )));
    }
    let half = tol / two;
    let l = recurse(
        f,
        Segment { a: s.a, b: m, fa: s.fa, fm: flm, fb: s.fm, whole: left },
        half,
        depth - 1,
        evaluations,
        error_estimate,
    )?;
    let r = recurse(
        f,
        Segment { a: m, b: s.b, fa: s.fm, fm: frm, fb: s.fb, whole: right },
        half,
        depth - 1,
        evaluations,
        error_estimate,
    )?;
    Ok(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = adaptive_simpson(|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12, 20).unwrap();
        assert!((q.value - 0.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_decay() {
        let q = adaptive_simpson(|x: f64| (-x).exp(), 0.0, 40.0, 1e-11, 40).unwrap();
        assert!((q.value - (1.0 - (-40.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn depth_exhaustion_is_reported() {
        let err = adaptive_simpson(|x: f64| (1.0 / x.max(1e-300)).sin(), 0.0, 1.0, 1e-14, 3);
        assert!(matches!(err, Err(Error::Numerical(_))));
    }
}
