//! Piecewise-smooth interval maps with one-sided critical and singular points.

pub mod distance;
pub mod families;
pub mod hypotheses;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmath::{asin, cos, ln, pow_diff, powf, sin, sqrt};

pub use distance::{map_distance, MapDistanceReport};
pub use hypotheses::{check_h1, check_h2, check_h3, HypothesisReport, Verdict, Which};

/// Which one-sided neighbourhood of a boundary point is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn from_sign(s: f64) -> Side {
        if s < 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Critical,
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointSpec {
    pub location: f64,
    pub side: Side,
    pub order: f64,
    pub kind: PointKind,
    pub nondegeneracy_constant: f64,
    pub neighborhood_radius: f64,
}

impl CriticalPointSpec {
    pub fn new(location: f64, side: Side, order: f64, constant: f64, radius: f64) -> Self {
        let kind = if order >= 1.0 { PointKind::Critical } else { PointKind::Singular };
        CriticalPointSpec { location, side, order, kind, nondegeneracy_constant: constant, neighborhood_radius: radius }
    }

    pub fn is_critical(&self) -> bool {
        self.kind == PointKind::Critical
    }
}

/// Closed-form branch shapes used by the builtin families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `1 - a ((x - center) / scale)^2`; `right` selects the inverse branch.
    Quadratic { a: f64, center: f64, scale: f64, right: bool },
    /// `p + q t^ell` with `t = s (x - x0) >= 0`, `s = +-1`.
    Power { x0: f64, s: f64, q: f64, p: f64, ell: f64 },
    /// `g(t) = 1 - 2 |h|^ell_c`, `h = (t^ell_s - b) / w`, `w = b` on the inner
    /// piece and `1 - b` on the outer one. Mirrored pieces evaluate `-g(-x)`.
    CritSing { b: f64, ell_s: f64, ell_c: f64, outer: bool, mirror: bool },
    /// `sin(pi x)`.
    Sine,
    /// `slope x + offset`.
    Affine { slope: f64, offset: f64 },
}

impl Shape {
    fn crit_sing_parts(b: f64, ell_s: f64, outer: bool, t: f64) -> (f64, f64, f64) {
        let w = if outer { 1.0 - b } else { b };
        let u = powf(t, ell_s);
        let h = (u - b) / w;
        (w, u, h)
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Shape::Quadratic { a, center, scale, .. } => {
                let z = (x - center) / scale;
                1.0 - a * z * z
            }
            Shape::Power { x0, s, q, p, ell } => p + q * powf((s * (x - x0)).max(0.0), ell),
            Shape::CritSing { b, ell_s, ell_c, outer, mirror } => {
                let t = if mirror { -x } else { x }.max(0.0);
                let (_, _, h) = Self::crit_sing_parts(b, ell_s, outer, t);
                let g = 1.0 - 2.0 * powf(h.abs(), ell_c);
                if mirror {
                    -g
                } else {
                    g
                }
            }
            Shape::Sine => sin(PI * x),
            Shape::Affine { slope, offset } => slope * x + offset,
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            Shape::Quadratic { a, center, scale, .. } => -2.0 * a * (x - center) / (scale * scale),
            Shape::Power { x0, s, q, ell, .. } => {
                let t = (s * (x - x0)).max(0.0);
                q * ell * powf(t, ell - 1.0) * s
            }
            Shape::CritSing { b, ell_s, ell_c, outer, mirror } => {
                let t = if mirror { -x } else { x }.max(0.0);
                let (w, _, h) = Self::crit_sing_parts(b, ell_s, outer, t);
                let h1 = ell_s * powf(t, ell_s - 1.0) / w;
                -2.0 * ell_c * powf(h.abs(), ell_c - 1.0) * h.signum() * h1
            }
            Shape::Sine => PI * cos(PI * x),
            Shape::Affine { slope, .. } => slope,
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        match *self {
            Shape::Quadratic { a, scale, .. } => -2.0 * a / (scale * scale),
            Shape::Power { x0, s, q, ell, .. } => {
                let t = (s * (x - x0)).max(0.0);
                q * ell * (ell - 1.0) * powf(t, ell - 2.0)
            }
            Shape::CritSing { b, ell_s, ell_c, outer, mirror } => {
                let t = if mirror { -x } else { x }.max(0.0);
                let (w, _, h) = Self::crit_sing_parts(b, ell_s, outer, t);
                let hh = h.abs();
                let h1 = ell_s * powf(t, ell_s - 1.0) / w;
                let h2 = ell_s * (ell_s - 1.0) * powf(t, ell_s - 2.0) / w;
                let g2 = -2.0
                    * ell_c
                    * ((ell_c - 1.0) * powf(hh, ell_c - 2.0) * h1 * h1 + powf(hh, ell_c - 1.0) * h.signum() * h2);
                if mirror {
                    -g2
                } else {
                    g2
                }
            }
            Shape::Sine => -PI * PI * sin(PI * x),
            Shape::Affine { .. } => 0.0,
        }
    }

    /// `ln |f'(x)|`, computed from logs of the factors so that it stays finite
    /// where `|f'|` itself over- or underflows.
    pub fn log_abs_deriv(&self, x: f64) -> f64 {
        match *self {
            Shape::Quadratic { a, center, scale, .. } => ln(2.0 * a / (scale * scale)) + ln((x - center).abs()),
            Shape::Power { x0, s, q, ell, .. } => {
                let t = (s * (x - x0)).max(0.0);
                ln((q * ell).abs()) + (ell - 1.0) * ln(t)
            }
            Shape::CritSing { b, ell_s, ell_c, outer, mirror } => {
                let t = if mirror { -x } else { x }.max(0.0);
                let (w, _, h) = Self::crit_sing_parts(b, ell_s, outer, t);
                ln(2.0 * ell_c * ell_s / w) + (ell_c - 1.0) * ln(h.abs()) + (ell_s - 1.0) * ln(t)
            }
            Shape::Sine | Shape::Affine { .. } => ln(self.deriv(x).abs()),
        }
    }

    /// `f(x + e) - f(x)` without the cancellation of subtracting two values.
    pub fn increment(&self, x: f64, e: f64) -> f64 {
        match *self {
            Shape::Quadratic { a, center, scale, .. } => -(a / (scale * scale)) * e * (2.0 * (x - center) + e),
            Shape::Power { x0, s, q, ell, .. } => {
                let t = (s * (x - x0)).max(0.0);
                q * pow_diff(t, s * e, ell)
            }
            Shape::CritSing { b, ell_s, ell_c, outer, mirror } => {
                let (t, et) = if mirror { (-x, -e) } else { (x, e) };
                let t = t.max(0.0);
                let (w, _, h) = Self::crit_sing_parts(b, ell_s, outer, t);
                let dh = pow_diff(t, et, ell_s) / w;
                let h_new = h + dh;
                let dg = if h == 0.0 {
                    -2.0 * powf(dh.abs(), ell_c)
                } else if h.signum() == h_new.signum() {
                    -2.0 * pow_diff(h.abs(), h.signum() * dh, ell_c)
                } else {
                    -2.0 * (powf(h_new.abs(), ell_c) - powf(h.abs(), ell_c))
                };
                if mirror {
                    -dg
                } else {
                    dg
                }
            }
            Shape::Sine => 2.0 * cos(PI * (x + 0.5 * e)) * sin(0.5 * PI * e),
            Shape::Affine { slope, .. } => slope * e,
        }
    }

    /// Closed-form inverse; the caller clamps to the branch interval.
    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            Shape::Quadratic { a, center, scale, right } => {
                let t = scale * sqrt(((1.0 - y) / a).max(0.0));
                if right {
                    center + t
                } else {
                    center - t
                }
            }
            Shape::Power { x0, s, q, p, ell } => {
                let t = powf(((y - p) / q).max(0.0), 1.0 / ell);
                x0 + s * t
            }
            Shape::CritSing { b, ell_s, ell_c, outer, mirror } => {
                let g = if mirror { -y } else { y };
                let hh = powf(((1.0 - g) / 2.0).max(0.0), 1.0 / ell_c);
                let (w, h) = if outer { (1.0 - b, hh) } else { (b, -hh) };
                let u = (b + w * h).max(0.0);
                let t = powf(u, 1.0 / ell_s);
                if mirror {
                    -t
                } else {
                    t
                }
            }
            Shape::Sine => asin(y.clamp(-1.0, 1.0)) / PI,
            Shape::Affine { slope, offset } => (y - offset) / slope,
        }
    }
}

/// One monotone branch on the closed interval `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    /// `+1` increasing, `-1` decreasing.
    pub sign: i8,
    pub shape: Shape,
    img_lo: f64,
    img_hi: f64,
}

impl Branch {
    pub fn new(lo: f64, hi: f64, sign: i8, shape: Shape) -> Self {
        let (a, b) = (shape.value(lo), shape.value(hi));
        Branch { lo, hi, sign, shape, img_lo: a.min(b), img_hi: a.max(b) }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.shape.value(x)
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        self.shape.deriv(x)
    }

    #[inline]
    pub fn second_deriv(&self, x: f64) -> f64 {
        self.shape.second_deriv(x)
    }

    #[inline]
    pub fn log_abs_deriv(&self, x: f64) -> f64 {
        self.shape.log_abs_deriv(x)
    }

    #[inline]
    pub fn increment(&self, x: f64, e: f64) -> f64 {
        self.shape.increment(x, e)
    }

    /// Closure of the image `f([lo, hi])`.
    pub fn image(&self) -> (f64, f64) {
        (self.img_lo, self.img_hi)
    }

    /// Preimage of `y` on this branch, `None` if `y` is outside the image.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        let tol = 1e-13 * (self.img_hi - self.img_lo).max(1.0);
        if y < self.img_lo - tol || y > self.img_hi + tol {
            return None;
        }
        let x = self.shape.inverse(y.clamp(self.img_lo, self.img_hi));
        if x.is_nan() {
            return None;
        }
        Some(x.clamp(self.lo, self.hi))
    }

    /// Preimage of `y`, with `None` only when it is outside the image; the
    /// endpoints of the image map to the corresponding branch endpoints.
    pub fn inverse_clamped(&self, y: f64) -> f64 {
        self.shape.inverse(y.clamp(self.img_lo, self.img_hi)).clamp(self.lo, self.hi)
    }
}

/// A validated piecewise-monotone interval map.
#[derive(Debug, Clone)]
pub struct IntervalMap {
    domain: (f64, f64),
    branches: Vec<Branch>,
    critical: Vec<CriticalPointSpec>,
    locations: Vec<f64>,
    star_index: Option<usize>,
    family: String,
    params: Vec<(String, f64)>,
}

impl IntervalMap {
    /// Checks tiling, boundary placement, sampled monotonicity and invariance of
    /// the domain. Non-degeneracy is checked separately by the family builder.
    pub fn new(
        domain: (f64, f64),
        branches: Vec<Branch>,
        mut critical: Vec<CriticalPointSpec>,
        star_index: Option<usize>,
        family: impl Into<String>,
        params: Vec<(String, f64)>,
    ) -> Result<Self> {
        let (a, b) = domain;
        if !(a < b) || branches.is_empty() {
            return Err(Error::InvalidMap("empty domain or no branches".into()));
        }
        if branches[0].lo != a || branches[branches.len() - 1].hi != b {
            return Err(Error::InvalidMap("branches do not cover the domain".into()));
        }
        for w in branches.windows(2) {
            if w[0].hi != w[1].lo || !(w[0].lo < w[0].hi) {
                return Err(Error::InvalidMap(format!("branches do not tile at {}", w[0].hi)));
            }
        }
        let star_loc = star_index.map(|i| (critical[i].location, critical[i].side));
        critical.sort_by(|p, q| p.location.partial_cmp(&q.location).unwrap().then(p.side.cmp(&q.side)));
        let star_index =
            star_loc.map(|(loc, side)| critical.iter().position(|c| c.location == loc && c.side == side).unwrap());
        let mut locations: Vec<f64> = critical.iter().map(|c| c.location).collect();
        locations.dedup();
        let interior: Vec<f64> = branches[1..].iter().map(|br| br.lo).collect();
        let inner_locs: Vec<f64> = locations.iter().copied().filter(|&c| c > a && c < b).collect();
        if interior != inner_locs {
            return Err(Error::InvalidMap("interior branch boundaries must coincide with critical locations".into()));
        }
        let tol = 1e-12 * (b - a);
        for (k, br) in branches.iter().enumerate() {
            let n = 64;
            let mut prev = br.value(br.lo);
            if prev < a - tol || prev > b + tol {
                return Err(Error::InvalidMap(format!("branch {k} leaves the domain")));
            }
            for i in 1..=n {
                let x = br.lo + (br.hi - br.lo) * (i as f64) / (n as f64);
                let v = br.value(x);
                if v < a - tol || v > b + tol {
                    return Err(Error::InvalidMap(format!("branch {k} leaves the domain at {x}")));
                }
                if (v - prev) * f64::from(br.sign) <= 0.0 {
                    return Err(Error::InvalidMap(format!("branch {k} is not monotone near {x}")));
                }
                if i < n && br.deriv(x) * f64::from(br.sign) <= 0.0 {
                    return Err(Error::InvalidMap(format!("branch {k} derivative has wrong sign at {x}")));
                }
                prev = v;
            }
        }
        Ok(IntervalMap { domain, branches, critical, locations, star_index, family: family.into(), params })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn domain_len(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn critical_points(&self) -> &[CriticalPointSpec] {
        &self.critical
    }

    /// Distinct critical locations, sorted.
    pub fn critical_locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn star_index(&self) -> Option<usize> {
        self.star_index
    }

    pub fn star(&self) -> Option<&CriticalPointSpec> {
        self.star_index.map(|i| &self.critical[i])
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.domain.0 && x <= self.domain.1
    }

    /// Index of the branch governing `x`; a side hint is needed at interior boundaries.
    pub fn branch_index(&self, x: f64, side: Option<Side>) -> Result<usize> {
        if !self.contains(x) || x.is_nan() {
            return Err(Error::OutOfDomain(x));
        }
        let i = self.branches.partition_point(|br| br.lo <= x).saturating_sub(1);
        if i > 0 && x == self.branches[i].lo {
            return match side {
                Some(Side::Left) => Ok(i - 1),
                Some(Side::Right) => Ok(i),
                None => Err(Error::AmbiguousSide(x)),
            };
        }
        Ok(i)
    }

    /// Branch index for `x`, resolving boundaries to the right-hand branch.
    #[inline]
    pub fn branch_index_fast(&self, x: f64) -> usize {
        let mut i = 0;
        while i + 1 < self.branches.len() && self.branches[i + 1].lo <= x {
            i += 1;
        }
        i
    }

    /// One step of the map with the right-hand convention at boundaries.
    #[inline]
    pub fn step(&self, x: f64) -> f64 {
        self.branches[self.branch_index_fast(x)].value(x)
    }

    pub fn eval(&self, x: f64, side: Option<Side>) -> Result<f64> {
        let i = self.branch_index(x, side)?;
        Ok(self.branches[i].value(x))
    }

    pub fn derivative(&self, x: f64, side: Option<Side>) -> Result<f64> {
        let i = self.branch_index(x, side)?;
        Ok(self.branches[i].deriv(x))
    }

    pub fn second_derivative(&self, x: f64, side: Option<Side>) -> Result<f64> {
        let i = self.branch_index(x, side)?;
        Ok(self.branches[i].second_deriv(x))
    }

    pub fn log_abs_derivative(&self, x: f64, side: Option<Side>) -> Result<f64> {
        let i = self.branch_index(x, side)?;
        if let Some(spec) = self.spec_at(x, side) {
            if spec.order < 1.0 {
                return Err(Error::InfiniteDerivative(x));
            }
            if spec.order > 1.0 {
                return Err(Error::ZeroDerivative(x));
            }
        }
        Ok(self.branches[i].log_abs_deriv(x))
    }

    /// The spec governing the one-sided neighbourhood of `x` on the given side,
    /// if `x` is a critical location.
    pub fn spec_at(&self, x: f64, side: Option<Side>) -> Option<&CriticalPointSpec> {
        let (a, b) = self.domain;
        let side = match side {
            Some(s) => s,
            None if x == a => Side::Right,
            None if x == b => Side::Left,
            None => return self.critical.iter().find(|c| c.location == x),
        };
        self.critical.iter().find(|c| c.location == x && c.side == side)
    }

    /// Distance to the nearest critical location (`+inf` if there is none).
    pub fn critical_distance(&self, x: f64) -> f64 {
        self.locations.iter().fold(f64::INFINITY, |m, &c| m.min((x - c).abs()))
    }

    /// Membership in the closed `delta`-neighbourhood of the critical set.
    pub fn in_delta(&self, x: f64, delta: f64) -> bool {
        self.critical_distance(x) <= delta
    }

    /// Membership in the enlarged neighbourhood (one extra annulus, radius `e delta`).
    pub fn in_delta_hat(&self, x: f64, delta: f64) -> bool {
        self.critical_distance(x) < core::f64::consts::E * delta
    }
}

/// Constants of the expansion and recurrence hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesisSet {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub delta: f64,
    pub ell_hat: f64,
    pub ell_lo: f64,
}

impl Default for HypothesisSet {
    fn default() -> Self {
        HypothesisSet {
            lambda: 0.35,
            big_lambda: 0.5,
            kappa: 0.1,
            alpha: 0.01,
            delta: crate::fmath::exp(-3.0),
            ell_hat: 3.0,
            ell_lo: 0.25,
        }
    }
}

impl HypothesisSet {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lambda", self.lambda),
            ("Lambda", self.big_lambda),
            ("kappa", self.kappa),
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("ell_hat", self.ell_hat),
            ("ell_lo", self.ell_lo),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        let bound = self.lambda / (5.0 * self.ell_hat);
        if !(self.alpha < bound) {
            return Err(Error::AlphaConstraintViolated { alpha: self.alpha, bound });
        }
        crate::partition::r_delta(self.delta)?;
        Ok(())
    }

    /// Every critical order of `map` must lie in `(ell_lo, ell_hat)`.
    pub fn check_orders(&self, map: &IntervalMap) -> Result<()> {
        for (i, c) in map.critical_points().iter().enumerate() {
            if !(c.order > self.ell_lo && c.order < self.ell_hat) {
                return Err(Error::InvalidParameter(format!(
                    "order {} of critical spec {i} outside ({}, {})",
                    c.order, self.ell_lo, self.ell_hat
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::families::make_builtin_family;
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn chebyshev_values() {
        let f = make_builtin_family("chebyshev", &[]).unwrap();
        assert_eq!(f.eval(0.5, None).unwrap(), 0.5);
        assert!((f.log_abs_derivative(0.5, None).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(f.critical_distance(0.3), 0.3);
        assert_eq!(f.critical_distance(0.0), 0.0);
        assert_eq!(f.critical_points().len(), 2);
        assert!(matches!(f.log_abs_derivative(0.0, Some(Side::Right)), Err(Error::ZeroDerivative(_))));
    }

    #[test]
    fn lorenz_one_sided_values() {
        let f = make_builtin_family("lorenz_singular", &[("a", 2.0), ("ell", 0.75)]).unwrap();
        assert_eq!(f.eval(0.0, Some(Side::Right)).unwrap(), -1.0);
        assert_eq!(f.eval(0.0, Some(Side::Left)).unwrap(), 1.0);
        assert_eq!(f.eval(0.0, None), Err(Error::AmbiguousSide(0.0)));
        assert!(matches!(f.eval(1.5, None), Err(Error::OutOfDomain(_))));
        assert!((f.log_abs_derivative(1.0, None).unwrap() - 1.5f64.ln()).abs() < 1e-15);
        assert!(matches!(f.log_abs_derivative(0.0, Some(Side::Left)), Err(Error::InfiniteDerivative(_))));
    }

    #[test]
    fn lorenz_log_derivative_at_tiny_x() {
        let f = make_builtin_family("lorenz_singular", &[]).unwrap();
        let got = f.log_abs_derivative(1e-200, None).unwrap();
        // 0.25 * 200 ln 10 + ln 1.5, written out independently
        let want = 0.25 * 200.0 * core::f64::consts::LN_10 + 1.5f64.ln();
        assert!(rel(got, want) < 1e-14, "{got} vs {want}");
    }

    #[test]
    fn exp_log_derivative_matches_derivative() {
        for name in ["chebyshev", "lorenz_singular", "lorenz_crit_sing", "two_component"] {
            let f = make_builtin_family(name, &[]).unwrap();
            for br in f.branches() {
                for i in 1..50 {
                    let x = br.lo + (br.hi - br.lo) * (i as f64) / 50.0;
                    let d = br.deriv(x).abs();
                    if d > 1e-300 && d < 1e300 {
                        assert!(rel(br.log_abs_deriv(x).exp(), d) < 1e-12, "{name} {x}");
                    }
                }
            }
        }
    }

    #[test]
    fn increments_agree_with_differences() {
        for name in ["chebyshev", "lorenz_singular", "lorenz_crit_sing", "two_component"] {
            let f = make_builtin_family(name, &[]).unwrap();
            for br in f.branches() {
                for i in 1..20 {
                    let x = br.lo + (br.hi - br.lo) * (i as f64) / 20.0;
                    let e = 0.3 * (br.hi - br.lo) / 20.0;
                    let want = br.value(x + e) - br.value(x);
                    assert!((br.increment(x, e) - want).abs() < 1e-12, "{name} {x}");
                }
            }
        }
    }

    #[test]
    fn inverses_round_trip() {
        for name in ["chebyshev", "lorenz_singular", "lorenz_crit_sing", "two_component", "quadratic"] {
            let f = make_builtin_family(name, &[]).unwrap();
            for br in f.branches() {
                for i in 0..=40 {
                    let x = br.lo + (br.hi - br.lo) * (i as f64) / 40.0;
                    let y = br.value(x);
                    let back = br.inverse(y).unwrap();
                    assert!((br.value(back) - y).abs() < 1e-12, "{name} x={x}");
                }
            }
        }
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        for name in ["chebyshev", "lorenz_singular", "lorenz_crit_sing", "two_component"] {
            let f = make_builtin_family(name, &[]).unwrap();
            for br in f.branches() {
                for i in 1..10 {
                    let x = br.lo + (br.hi - br.lo) * (i as f64) / 10.0;
                    let h = 1e-5 * (br.hi - br.lo);
                    let fd = (br.deriv(x + h) - br.deriv(x - h)) / (2.0 * h);
                    let exact = br.second_deriv(x);
                    assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "{name} {x}: {fd} {exact}");
                }
            }
        }
    }

    #[test]
    fn crit_sing_distance_is_min_over_locations() {
        let f = make_builtin_family("lorenz_crit_sing", &[]).unwrap();
        let locs = f.critical_locations().to_vec();
        assert_eq!(locs.len(), 3);
        for i in 0..=200 {
            let x = -1.0 + 2.0 * (i as f64) / 200.0;
            let brute = locs.iter().map(|c| (x - c).abs()).fold(f64::INFINITY, f64::min);
            assert_eq!(f.critical_distance(x), brute);
        }
    }

    #[test]
    fn alpha_constraint() {
        let mut h = HypothesisSet::default();
        assert!(h.validate().is_ok());
        h.alpha = h.lambda;
        assert!(matches!(h.validate(), Err(Error::AlphaConstraintViolated { .. })));
    }

    #[test]
    fn rejects_non_tiling_branches() {
        let br = Branch::new(0.0, 0.5, 1, Shape::Affine { slope: 2.0, offset: 0.0 });
        assert!(IntervalMap::new((0.0, 1.0), alloc::vec![br], alloc::vec![], None, "x", alloc::vec![]).is_err());
    }
}
