//! Thin wrappers over `libm` so the numerics read the same with or without `std`.

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn ln1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn asin(x: f64) -> f64 {
    libm::asin(x)
}

/// `(t + d)^l - t^l` for `t >= 0`, `t + d >= 0`, without cancellation when `|d| << t`.
pub fn pow_diff(t: f64, d: f64, l: f64) -> f64 {
    if t == 0.0 {
        return powf(d.max(0.0), l);
    }
    let r = d / t;
    if r.abs() < 0.5 {
        powf(t, l) * expm1(l * ln1p(r))
    } else {
        powf((t + d).max(0.0), l) - powf(t, l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_diff_matches_naive_away_from_cancellation() {
        for &(t, d, l) in &[(1.0, 0.7, 0.75), (0.3, -0.2, 2.0), (0.0, 0.5, 0.6), (2.0, 3.0, 1.5)] {
            let naive = powf(t + d, l) - powf(t, l);
            assert!((pow_diff(t, d, l) - naive).abs() < 1e-14, "{t} {d} {l}");
        }
    }

    #[test]
    fn pow_diff_keeps_tiny_increments() {
        // (1 + 1e-20)^2 - 1 = 2e-20 to leading order
        let v = pow_diff(1.0, 1e-20, 2.0);
        assert!((v / 2e-20 - 1.0).abs() < 1e-12);
    }
}
