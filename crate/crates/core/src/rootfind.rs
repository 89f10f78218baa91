//! Bisection on monotone predicates and functions.

/// Smallest `x` in `[lo, hi]` (to within `tol`) with `pred(x)` true, assuming
/// `pred` is monotone (false then true). Returns `None` if `pred(hi)` is false.
pub fn bisect_threshold(lo: f64, hi: f64, tol: f64, mut pred: impl FnMut(f64) -> bool) -> Option<f64> {
    if !pred(hi) {
        return None;
    }
    if pred(lo) {
        return Some(lo);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if pred(m) {
            b = m;
        } else {
            a = m;
        }
    }
    Some(b)
}

/// Root of a continuous function with a sign change on `[lo, hi]`.
pub fn bisect_root(lo: f64, hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
    let (fa, fb) = (f(lo), f(hi));
    if fa == 0.0 {
        return Some(lo);
    }
    if fb == 0.0 {
        return Some(hi);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return None;
    }
    let neg_low = fa < 0.0;
    let out = bisect_threshold(lo, hi, tol, |x| (f(x) >= 0.0) == neg_low)?;
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_finds_boundary() {
        let x = bisect_threshold(0.0, 10.0, 1e-12, |x| x >= 3.25).unwrap();
        assert!((x - 3.25).abs() < 1e-11);
        assert!(bisect_threshold(0.0, 1.0, 1e-12, |x| x > 2.0).is_none());
    }

    #[test]
    fn root_of_decreasing_function() {
        let r = bisect_root(0.0, 2.0, 1e-14, |x| 2.0 - x * x).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}
