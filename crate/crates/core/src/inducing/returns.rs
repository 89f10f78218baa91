//! Preimages of the base interval and the choice of a return inside an
//! escaped interval.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Region, ReturnFinderParams, ReturnRule, Sidedness};
use crate::error::{Error, Result};
use crate::map_model::IntervalMap;

#[derive(Debug, Clone, Copy)]
struct Cand {
    lo: f64,
    hi: f64,
    /// Preimage of the base point inside `[lo, hi]`.
    pt: f64,
    parent: u32,
    branch: u8,
}

/// A chosen return: `f^t0` maps `[left, right]` onto the base interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnHit {
    pub left: f64,
    pub right: f64,
    pub t0: u32,
    pub route: Vec<u8>,
}

/// All pullbacks of the base interval up to depth `t_star`, sorted by left
/// endpoint within each depth.
#[derive(Debug, Clone)]
pub struct ReturnCandidates {
    params: ReturnFinderParams,
    base: (f64, f64),
    depths: Vec<Vec<Cand>>,
    /// Per depth, a max segment tree over widths (indices).
    trees: Vec<Vec<u32>>,
    /// Pullbacks rejected because the base-side interval was not inside a
    /// branch image.
    pub crossing: u64,
    /// `true` if `max_candidates` stopped the enumeration early.
    pub capped: bool,
}

/// The base interval for the configured sidedness around the base point.
pub fn base_interval(map: &IntervalMap, params: &ReturnFinderParams) -> Result<(f64, f64)> {
    let star = map.star().ok_or_else(|| Error::InvalidMap("no base critical point".into()))?.location;
    let d = params.delta_star;
    if !(d > 0.0) {
        return Err(Error::InvalidParameter("delta_star must be positive".into()));
    }
    let (lo, hi) = match params.sidedness {
        Sidedness::TwoSided => (star - d, star + d),
        Sidedness::Left => (star - d, star),
        Sidedness::Right => (star, star + d),
    };
    let (a, b) = map.domain();
    if lo < a || hi > b {
        return Err(Error::InvalidParameter("base interval leaves the domain".into()));
    }
    if map.critical_locations().iter().any(|&c| c != star && lo < c && c < hi) {
        return Err(Error::InvalidParameter("base interval contains another critical point".into()));
    }
    Ok((lo, hi))
}

impl ReturnCandidates {
    pub fn build(map: &IntervalMap, params: &ReturnFinderParams) -> Result<Self> {
        let base = base_interval(map, params)?;
        let star = map.star().unwrap().location;
        let mut depths = vec![vec![Cand { lo: base.0, hi: base.1, pt: star, parent: 0, branch: 0 }]];
        let mut crossing = 0u64;
        let mut total = 1usize;
        let mut capped = false;
        'outer: for _ in 0..params.t_star {
            let prev = depths.last().unwrap();
            let mut next = Vec::with_capacity(prev.len() * map.branches().len());
            for (pi, c) in prev.iter().enumerate() {
                for (bi, br) in map.branches().iter().enumerate() {
                    let (ilo, ihi) = br.image();
                    if c.hi <= ilo || c.lo >= ihi {
                        continue;
                    }
                    let (Some(a), Some(b)) = (br.inverse(c.lo), br.inverse(c.hi)) else {
                        crossing += 1;
                        continue;
                    };
                    let pt = br.inverse_clamped(c.pt);
                    if total >= params.max_candidates {
                        capped = true;
                        break 'outer;
                    }
                    total += 1;
                    next.push(Cand { lo: a.min(b), hi: a.max(b), pt, parent: pi as u32, branch: bi as u8 });
                }
            }
            if next.is_empty() {
                break;
            }
            next.sort_by(|p, q| p.lo.partial_cmp(&q.lo).unwrap());
            depths.push(next);
        }
        if capped && !depths.is_empty() {
            // a partially enumerated depth would bias the choice; drop it
            if depths.len() > 1 {
                depths.pop();
            }
        }
        let trees = depths.iter().map(|d| max_tree(d)).collect();
        Ok(ReturnCandidates { params: *params, base, depths, trees, crossing, capped })
    }

    pub fn base(&self) -> (f64, f64) {
        self.base
    }

    pub fn max_depth(&self) -> u32 {
        self.depths.len() as u32 - 1
    }

    pub fn count(&self) -> usize {
        self.depths.iter().map(Vec::len).sum()
    }

    fn route(&self, depth: usize, mut idx: usize) -> Vec<u8> {
        let mut route = Vec::with_capacity(depth);
        for t in (1..=depth).rev() {
            let c = &self.depths[t][idx];
            route.push(c.branch);
            idx = c.parent as usize;
        }
        route
    }

    /// Index range at `depth` of candidates inside `[lo, hi]`.
    fn admissible(&self, depth: usize, lo: f64, hi: f64) -> (usize, usize) {
        let d = &self.depths[depth];
        let i0 = d.partition_point(|c| c.lo < lo);
        let i1 = d.partition_point(|c| c.hi <= hi);
        (i0, i1.max(i0))
    }

    /// Chooses a return inside `omega` (escaped interval of length at least
    /// `delta`), with depth at least `min_depth`.
    pub fn find(&self, omega: (f64, f64), delta: f64, min_depth: u32) -> Result<ReturnHit> {
        let (lo, hi) = omega;
        let len = hi - lo;
        let g = match self.params.region {
            Region::SideGaps => delta / 3.0,
            Region::CentralThird => len / 3.0,
        };
        let (alo, ahi) = (lo + g, hi - g);
        let mid = 0.5 * (lo + hi);
        let mut best: Option<(usize, usize)> = None;
        let mut best_key = f64::INFINITY;
        for depth in min_depth as usize..self.depths.len() {
            let (i0, i1) = self.admissible(depth, alo, ahi);
            if i0 >= i1 {
                continue;
            }
            let d = &self.depths[depth];
            let (idx, key) = match self.params.rule {
                ReturnRule::Largest => {
                    let i = range_max(&self.trees[depth], d, i0, i1);
                    (i, -(d[i].hi - d[i].lo))
                }
                ReturnRule::Centermost | ReturnRule::Shallowest => {
                    let k = i0 + d[i0..i1].partition_point(|c| c.pt < mid);
                    let mut pick = (usize::MAX, f64::INFINITY);
                    for i in [k.wrapping_sub(1), k] {
                        if i >= i0 && i < i1 {
                            let dist = (d[i].pt - mid).abs();
                            if dist < pick.1 {
                                pick = (i, dist);
                            }
                        }
                    }
                    pick
                }
            };
            if key < best_key {
                best_key = key;
                best = Some((depth, idx));
            }
            if self.params.rule == ReturnRule::Shallowest {
                break;
            }
        }
        let Some((depth, idx)) = best else {
            return Err(Error::NoReturnWithinHorizon { t_star: self.max_depth() as usize });
        };
        let c = &self.depths[depth][idx];
        Ok(ReturnHit { left: c.lo, right: c.hi, t0: depth as u32, route: self.route(depth, idx) })
    }
}

fn max_tree(d: &[Cand]) -> Vec<u32> {
    let n = d.len().next_power_of_two();
    let mut t = vec![u32::MAX; 2 * n];
    for (i, _) in d.iter().enumerate() {
        t[n + i] = i as u32;
    }
    let w = |i: u32| {
        if i == u32::MAX {
            f64::NEG_INFINITY
        } else {
            d[i as usize].hi - d[i as usize].lo
        }
    };
    for k in (1..n).rev() {
        let (a, b) = (t[2 * k], t[2 * k + 1]);
        // ties keep the left child
        t[k] = if w(b) > w(a) { b } else { a };
    }
    t
}

fn range_max(t: &[u32], d: &[Cand], i0: usize, i1: usize) -> usize {
    let n = t.len() / 2;
    let w = |i: u32| {
        if i == u32::MAX {
            f64::NEG_INFINITY
        } else {
            d[i as usize].hi - d[i as usize].lo
        }
    };
    let (mut l, mut r) = (i0 + n, i1 + n);
    let mut best = u32::MAX;
    let better = |cand: u32, best: u32| {
        let (wc, wb) = (w(cand), w(best));
        wc > wb || (wc == wb && cand < best)
    };
    while l < r {
        if l & 1 == 1 {
            if better(t[l], best) {
                best = t[l];
            }
            l += 1;
        }
        if r & 1 == 1 {
            r -= 1;
            if better(t[r], best) {
                best = t[r];
            }
        }
        l >>= 1;
        r >>= 1;
    }
    best as usize
}

/// Finds a return inside `omega` for a single query; see
/// [`ReturnCandidates::find`] to reuse the enumeration.
pub fn find_return(map: &IntervalMap, params: &ReturnFinderParams, omega: (f64, f64), delta: f64) -> Result<ReturnHit> {
    ReturnCandidates::build(map, params)?.find(omega, delta, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::families::make_builtin_family;

    /// Every pullback of `(lo, hi)` up to `depth`, found by recursion on the
    /// branch inverses: `(left, right, depth, preimage of the base point, route)`.
    fn enumerate(
        map: &IntervalMap,
        iv: (f64, f64, f64),
        depth: u32,
        max_depth: u32,
        route: &mut Vec<u8>,
        out: &mut Vec<(f64, f64, u32, f64, Vec<u8>)>,
    ) {
        out.push((iv.0, iv.1, depth, iv.2, route.iter().rev().copied().collect()));
        if depth == max_depth {
            return;
        }
        for (bi, br) in map.branches().iter().enumerate() {
            let (Some(a), Some(b)) = (br.inverse(iv.0), br.inverse(iv.1)) else { continue };
            route.push(bi as u8);
            enumerate(map, (a.min(b), a.max(b), br.inverse_clamped(iv.2)), depth + 1, max_depth, route, out);
            route.pop();
        }
    }

    fn push(map: &IntervalMap, route: &[u8], mut x: f64) -> f64 {
        for &b in route {
            x = map.branches()[b as usize].value(x);
        }
        x
    }

    fn params(rule: ReturnRule) -> ReturnFinderParams {
        ReturnFinderParams { t_star: 8, rule, ..ReturnFinderParams::default() }
    }

    #[test]
    fn largest_matches_exhaustive_search() {
        let map = make_builtin_family("lorenz_singular", &[]).unwrap();
        let p = params(ReturnRule::Largest);
        let base = base_interval(&map, &p).unwrap();
        let mut all = Vec::new();
        enumerate(&map, (base.0, base.1, 0.0), 0, p.t_star, &mut Vec::new(), &mut all);
        let cands = ReturnCandidates::build(&map, &p).unwrap();
        assert_eq!(cands.count(), all.len());
        let delta = 0.05;
        for k in 0..40 {
            let lo = -0.95 + 0.045 * k as f64;
            let omega = (lo, lo + 0.06);
            let (alo, ahi) = (omega.0 + delta / 3.0, omega.1 - delta / 3.0);
            let best = all
                .iter()
                .filter(|c| c.2 >= 1 && c.0 >= alo && c.1 <= ahi)
                .map(|c| c.1 - c.0)
                .fold(f64::NEG_INFINITY, f64::max);
            match cands.find(omega, delta, 1) {
                Ok(hit) => {
                    assert_eq!(hit.right - hit.left, best, "omega {omega:?}");
                    assert_eq!(hit.route.len(), hit.t0 as usize);
                    let (ya, yb) = (push(&map, &hit.route, hit.left), push(&map, &hit.route, hit.right));
                    let tol = 1e-9 * (base.1 - base.0);
                    assert!((ya.min(yb) - base.0).abs() <= tol && (ya.max(yb) - base.1).abs() <= tol);
                }
                Err(_) => assert_eq!(best, f64::NEG_INFINITY),
            }
        }
    }

    #[test]
    fn shallowest_takes_the_first_depth_with_a_fit() {
        let map = make_builtin_family("lorenz_singular", &[]).unwrap();
        let p = params(ReturnRule::Shallowest);
        let base = base_interval(&map, &p).unwrap();
        let mut all = Vec::new();
        enumerate(&map, (base.0, base.1, 0.0), 0, p.t_star, &mut Vec::new(), &mut all);
        let cands = ReturnCandidates::build(&map, &p).unwrap();
        let delta = 0.05;
        for k in 0..20 {
            let lo = -0.9 + 0.09 * k as f64;
            let omega = (lo, lo + 0.07);
            let (alo, ahi) = (omega.0 + delta / 3.0, omega.1 - delta / 3.0);
            let fits: Vec<_> = all.iter().filter(|c| c.2 >= 1 && c.0 >= alo && c.1 <= ahi).collect();
            let Ok(hit) = cands.find(omega, delta, 1) else {
                assert!(fits.is_empty());
                continue;
            };
            let depth = fits.iter().map(|c| c.2).min().unwrap();
            assert_eq!(hit.t0, depth);
            let mid = 0.5 * (omega.0 + omega.1);
            let closest = fits.iter().filter(|c| c.2 == depth).map(|c| (c.3 - mid).abs()).fold(f64::INFINITY, f64::min);
            let chosen = fits.iter().find(|c| c.2 == depth && c.0 == hit.left).unwrap();
            assert_eq!((chosen.3 - mid).abs(), closest);
            assert_eq!(chosen.4, hit.route);
        }
    }

    #[test]
    fn base_interval_itself_at_depth_zero() {
        let map = make_builtin_family("lorenz_singular", &[]).unwrap();
        let p = ReturnFinderParams { delta_star: 0.01, ..ReturnFinderParams::default() };
        let hit = find_return(&map, &p, (-0.2, 0.2), 0.05).unwrap();
        // the base interval is the widest preimage of itself
        assert_eq!((hit.left, hit.right, hit.t0), (-0.01, 0.01, 0));
        assert!(hit.route.is_empty());
    }

    #[test]
    fn sidedness_and_errors() {
        let map = make_builtin_family("lorenz_singular", &[]).unwrap();
        let mut p = ReturnFinderParams { delta_star: 0.1, ..ReturnFinderParams::default() };
        assert_eq!(base_interval(&map, &p).unwrap(), (-0.1, 0.1));
        p.sidedness = Sidedness::Left;
        assert_eq!(base_interval(&map, &p).unwrap(), (-0.1, 0.0));
        p.sidedness = Sidedness::Right;
        assert_eq!(base_interval(&map, &p).unwrap(), (0.0, 0.1));
        p.delta_star = 2.0;
        assert!(base_interval(&map, &p).is_err());
        let id = make_builtin_family("identity", &[]).unwrap();
        assert!(base_interval(&id, &ReturnFinderParams::default()).is_err());
        // nothing fits inside an interval narrower than the side gaps
        let p = ReturnFinderParams::default();
        assert!(matches!(find_return(&map, &p, (0.5, 0.52), 0.05), Err(Error::NoReturnWithinHorizon { .. })));
    }
}
