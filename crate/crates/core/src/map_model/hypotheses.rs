//! Finite-horizon falsification checks for the expansion, recurrence and
//! density-of-preimages hypotheses.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HypothesisSet, IntervalMap, Side};
use crate::error::{Error, Result};
use crate::fmath::{exp, ln};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    H1,
    H2,
    H3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One step of a critical orbit: `distance` is the distance of `c_k` to the
/// critical set, `log_deriv` is `ln |(f^k)'(c_1)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitWitness {
    pub spec: usize,
    pub k: usize,
    pub distance: f64,
    pub log_deriv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub which: Which,
    pub horizon: usize,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_spec: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_est: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_est: Option<f64>,
    #[serde(rename = "Lambda_est", skip_serializing_if = "Option::is_none")]
    pub big_lambda_est: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub orbit: Vec<OrbitWitness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preimage_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admissible_samples: Option<usize>,
}

impl HypothesisReport {
    fn empty(which: Which, horizon: usize) -> Self {
        HypothesisReport {
            which,
            horizon,
            verdict: Verdict::Pass,
            witness_k: None,
            witness_spec: None,
            lambda_est: None,
            kappa_est: None,
            big_lambda_est: None,
            orbit: Vec::new(),
            max_gap: None,
            min_distance: None,
            preimage_count: None,
            admissible_samples: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Slow recurrence and exponential growth along every critical orbit
/// (`order >= 1`) up to `n`. Singular points are exempt.
pub fn check_h2(map: &IntervalMap, hyp: &HypothesisSet, n: usize) -> Result<HypothesisReport> {
    let mut rep = HypothesisReport::empty(Which::H2, n);
    let (a, b) = map.domain();
    let mut lambda_min = f64::INFINITY;
    let mut first_fail: Option<(usize, usize)> = None;
    for (si, spec) in map.critical_points().iter().enumerate() {
        if !spec.is_critical() {
            continue;
        }
        let bi = map.branch_index(spec.location, Some(spec.side))?;
        let mut x = map.branches()[bi].value(spec.location);
        let mut dir = spec.side.sign() * f64::from(map.branches()[bi].sign);
        let mut sum = 0.0;
        for k in 1..=n {
            if x < a - 1e-9 || x > b + 1e-9 || x.is_nan() {
                return Err(Error::OrbitEscapedDomain { k, value: x });
            }
            x = x.clamp(a, b);
            let dist = map.critical_distance(x);
            let bi = map.branch_index(x, Some(Side::from_sign(dir)))?;
            let br = &map.branches()[bi];
            sum += br.log_abs_deriv(x);
            let kf = k as f64;
            lambda_min = lambda_min.min(sum / kf);
            let recurrence_ok = dist >= hyp.delta * exp(-hyp.alpha * kf);
            let growth_ok = sum >= hyp.big_lambda * kf;
            if !(recurrence_ok && growth_ok) && first_fail.map_or(true, |(fk, _)| k < fk) {
                first_fail = Some((k, si));
            }
            rep.orbit.push(OrbitWitness { spec: si, k, distance: dist, log_deriv: sum });
            dir *= f64::from(br.sign);
            x = br.value(x);
        }
    }
    if lambda_min.is_finite() || lambda_min == f64::NEG_INFINITY {
        rep.big_lambda_est = Some(lambda_min);
    }
    if let Some((k, si)) = first_fail {
        rep.verdict = Verdict::Fail;
        rep.witness_k = Some(k);
        rep.witness_spec = Some(si);
    }
    Ok(rep)
}

/// Samples `sample_count` uniform starting points outside the critical
/// neighbourhood and follows each until it enters it (or `n_max` steps).
///
/// `lambda_est` is the minimum over samples of the average log-derivative over
/// the whole segment; `kappa_est` is the smallest constant compatible with both
/// growth bounds at every prefix of every segment, given `hyp.lambda`.
pub fn check_h1(
    map: &IntervalMap,
    hyp: &HypothesisSet,
    sample_count: usize,
    n_max: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    let mut rep = HypothesisReport::empty(Which::H1, n_max);
    let (a, b) = map.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ln_delta = ln(hyp.delta);
    let mut lambda_est = f64::INFINITY;
    let mut log_kappa = f64::INFINITY;
    let mut admissible = 0usize;
    for _ in 0..sample_count {
        let mut x = a + (b - a) * rng.random::<f64>();
        if map.in_delta(x, hyp.delta) {
            continue;
        }
        admissible += 1;
        let mut sum = 0.0;
        let mut len = 0;
        for n in 1..=n_max {
            let br = &map.branches()[map.branch_index_fast(x)];
            sum += br.log_abs_deriv(x);
            x = br.value(x);
            len = n;
            let entered = map.in_delta(x, hyp.delta);
            let slack = sum - hyp.lambda * n as f64;
            // entering the neighbourhood requires the stronger bound without delta
            log_kappa = log_kappa.min(if entered { slack } else { slack - ln_delta });
            if entered {
                break;
            }
        }
        lambda_est = lambda_est.min(sum / len as f64);
    }
    if admissible == 0 {
        return Err(Error::NoAdmissibleSegments);
    }
    let kappa_est = exp(log_kappa);
    rep.lambda_est = Some(lambda_est);
    rep.kappa_est = Some(kappa_est);
    rep.admissible_samples = Some(admissible);
    if !(lambda_est >= hyp.lambda && kappa_est >= hyp.kappa) {
        rep.verdict = Verdict::Fail;
    }
    Ok(rep)
}

/// All preimages of `c*` up to depth `t_max`, by branchwise inversion, sorted
/// and deduplicated. Returns `(points, min distance of depth >= 1 points to
/// the critical set)`.
pub fn star_preimages(map: &IntervalMap, t_max: usize) -> Result<(Vec<f64>, f64)> {
    let star =
        map.star().ok_or_else(|| Error::InvalidParameter(format!("family `{}` has no designated c*", map.family())))?;
    let mut level = vec![star.location];
    let mut all = level.clone();
    let mut min_dist = f64::INFINITY;
    for _ in 0..t_max {
        let mut next = Vec::with_capacity(level.len() * map.branches().len());
        for &y in &level {
            for (bi, br) in map.branches().iter().enumerate() {
                if let Some(x) = br.inverse(y) {
                    if (br.value(x) - y).abs() > 1e-9 {
                        return Err(Error::InversionFailure { branch: bi, y });
                    }
                    next.push(x);
                }
            }
        }
        next.sort_by(|p, q| p.partial_cmp(q).unwrap());
        next.dedup_by(|p, q| (*p - *q).abs() <= 1e-15);
        if next.len() > 50_000_000 {
            return Err(Error::InvalidParameter("preimage tree too large; lower t_max".into()));
        }
        for &x in &next {
            min_dist = min_dist.min(map.critical_distance(x));
        }
        all.extend_from_slice(&next);
        level = next;
    }
    all.sort_by(|p, q| p.partial_cmp(q).unwrap());
    all.dedup_by(|p, q| (*p - *q).abs() <= 1e-15);
    Ok((all, min_dist))
}

pub fn check_h3(map: &IntervalMap, t_max: usize, eps: f64) -> Result<HypothesisReport> {
    let mut rep = HypothesisReport::empty(Which::H3, t_max);
    let (pts, min_dist) = star_preimages(map, t_max)?;
    let (a, b) = map.domain();
    let mut gap = 0.0f64;
    let mut prev = a;
    for &x in pts.iter().chain(core::iter::once(&b)) {
        gap = gap.max(x - prev);
        prev = x;
    }
    rep.max_gap = Some(gap);
    rep.min_distance = Some(min_dist);
    rep.preimage_count = Some(pts.len());
    if !(gap < eps && min_dist > 1e-12) {
        rep.verdict = Verdict::Fail;
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::families::make_builtin_family;

    fn hyp(delta_k: f64) -> HypothesisSet {
        HypothesisSet { delta: exp(-delta_k), ..HypothesisSet::default() }
    }

    #[test]
    fn h2_chebyshev_orbit() {
        let f = make_builtin_family("chebyshev", &[]).unwrap();
        for n in [1, 7, 100, 10_000] {
            let rep = check_h2(&f, &hyp(1.0), n).unwrap();
            assert!(rep.passed());
            assert!((rep.big_lambda_est.unwrap() - 4f64.ln()).abs() < 1e-9);
            assert!(rep.orbit.iter().all(|w| w.distance == 1.0));
        }
    }

    #[test]
    fn h2_vacuous_for_singular_only() {
        let f = make_builtin_family("lorenz_singular", &[]).unwrap();
        let rep = check_h2(&f, &hyp(3.0), 100).unwrap();
        assert!(rep.passed());
        assert!(rep.orbit.is_empty());
    }

    #[test]
    fn h2_fails_when_critical_value_lands_near_zero() {
        // c_1 = 1, c_2 = 1 - a = -1e-4
        let f = make_builtin_family("quadratic", &[("a", 1.0001)]).unwrap();
        let rep = check_h2(&f, &hyp(3.0), 50).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
        assert_eq!(rep.witness_k, Some(2));
    }

    #[test]
    fn h1_lorenz_expansion() {
        let f = make_builtin_family("lorenz_singular", &[]).unwrap();
        let rep = check_h1(&f, &hyp(3.0), 2000, 200, 7).unwrap();
        assert!(rep.lambda_est.unwrap() >= 1.5f64.ln() - 0.01);
    }

    #[test]
    fn h1_chebyshev_positive() {
        let f = make_builtin_family("chebyshev", &[]).unwrap();
        let rep = check_h1(&f, &hyp(2.0), 2000, 500, 11).unwrap();
        assert!(rep.lambda_est.unwrap() > 0.0);
    }

    #[test]
    fn h1_identity_fails() {
        let f = make_builtin_family("identity", &[]).unwrap();
        let rep = check_h1(&f, &hyp(3.0), 100, 50, 1).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
        assert!(rep.lambda_est.unwrap() <= 0.0);
    }

    #[test]
    fn h3_depth_zero() {
        let f = make_builtin_family("lorenz_singular", &[]).unwrap();
        let rep = check_h3(&f, 0, 0.5).unwrap();
        assert_eq!(rep.preimage_count, Some(1));
        assert_eq!(rep.max_gap, Some(1.0));
    }

    #[test]
    fn h3_lorenz_dense() {
        let f = make_builtin_family("lorenz_singular", &[]).unwrap();
        let rep = check_h3(&f, 12, 0.01).unwrap();
        assert!(rep.preimage_count.unwrap() < (1 << 13));
        assert!(rep.max_gap.unwrap() < 0.01);
        assert!(rep.passed());
    }

    #[test]
    fn h3_fails_when_critical_point_maps_to_star() {
        // f(0) = 1 and f(1) = 0 = c* for a = 1
        let f = make_builtin_family("quadratic", &[("a", 1.0)]).unwrap();
        let rep = check_h3(&f, 6, 1.0).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
        assert_eq!(rep.min_distance, Some(0.0));
    }
}
