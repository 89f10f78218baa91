//! The full-branch induced map onto the base interval.

use alloc::vec::Vec;

use super::escape::{cut, pullback, Engine, Piece};
use super::returns::ReturnCandidates;
use super::{
    DomainMode, EventKind, InducedBranch, InducedMap, InducedStats, InducingParams, ItineraryEvent, ResidualPiece,
    ResidualReason, ReturnFinderParams,
};
use crate::error::Result;
use crate::fmath::ceil;
use crate::map_model::IntervalMap;
use crate::partition::{BindingTable, CriticalPartition};
use crate::sum::sum;

/// Relative tolerance for matching branch images against the base interval.
const ENDPOINT_TOL: f64 = 1e-8;

/// Builds the induced map by alternating escape partitions and returns.
pub fn build_induced_map(
    map: &IntervalMap,
    partition: &CriticalPartition,
    binding: &BindingTable,
    rparams: &ReturnFinderParams,
    params: &InducingParams,
) -> Result<InducedMap> {
    let cands = ReturnCandidates::build(map, rparams)?;
    let base = cands.base();
    let star = map.star().unwrap().location;
    let w_min = params.w_min.unwrap_or(1e-14 * map.domain_len());
    let delta = partition.delta;

    let mut stack = Vec::new();
    let domain_mass = match params.domain_mode {
        DomainMode::DeltaStar => {
            stack.push(Piece::new(base.0, base.1));
            base.1 - base.0
        }
        DomainMode::FullInterval => {
            let (a, b) = map.domain();
            let mut cuts = Vec::with_capacity(map.critical_locations().len() + 2);
            cuts.push(a);
            cuts.extend(map.critical_locations().iter().copied().filter(|&c| c > a && c < b));
            cuts.push(b);
            for w in cuts.windows(2) {
                let n = ceil((w[1] - w[0]) / delta).max(1.0) as usize;
                let h = (w[1] - w[0]) / n as f64;
                for k in 0..n {
                    let lo = if k == 0 { w[0] } else { w[0] + k as f64 * h };
                    let hi = if k + 1 == n { w[1] } else { w[0] + (k + 1) as f64 * h };
                    stack.push(Piece::new(lo, hi));
                }
            }
            map.domain_len()
        }
    };

    let mut eng = Engine {
        map,
        partition,
        binding,
        n_max: params.n_max,
        w_min,
        depth_rule: params.depth_rule,
        lump: true,
        lump_fraction: params.lump_fraction,
        residual: Vec::new(),
        stats: InducedStats { xi_est: f64::INFINITY, ..Default::default() },
        stop: false,
        order: params.order,
    };
    let mut branches: Vec<InducedBranch> = Vec::new();
    let mut budget_exhausted = false;
    let tol = ENDPOINT_TOL * (base.1 - base.0);

    eng.run(stack, &mut |eng, p, stack| {
        if branches.len() >= params.branch_cap {
            budget_exhausted = true;
            eng.stop = true;
            eng.residual.push(ResidualPiece {
                left: p.olo,
                right: p.ohi,
                reason: ResidualReason::BudgetExhausted,
                time: p.time,
            });
            return;
        }
        let min_depth = u32::from(p.time == 0);
        let hit = match cands.find((p.ilo, p.ihi), delta, min_depth) {
            Ok(h) => h,
            Err(_) => {
                eng.residual.push(ResidualPiece {
                    left: p.olo,
                    right: p.ohi,
                    reason: ResidualReason::NoReturn,
                    time: p.time,
                });
                return;
            }
        };
        let xi = (hit.right - hit.left) / (p.ihi - p.ilo);
        if xi < eng.stats.xi_est {
            eng.stats.xi_est = xi;
        }
        let mut kids = cut(map, &p, &[hit.left, hit.right]);
        let mut right = kids.pop().unwrap();
        let mid = kids.pop().unwrap();
        let mut left = kids.pop().unwrap();

        let e = p.time;
        let t = e + hit.t0;
        let mut route = mid.route.clone();
        route.extend_from_slice(&hit.route);
        let reversed = route.iter().filter(|&&b| map.branches()[b as usize].sign < 0).count() % 2 == 1;
        let mut itinerary = mid.events.clone();
        itinerary.push(ItineraryEvent { time: t, kind: EventKind::ReturnToStar { t0: hit.t0 } });
        let branch = InducedBranch {
            left: mid.olo,
            right: mid.ohi,
            return_time: t,
            escape_time: e,
            t0: hit.t0,
            route,
            itinerary,
            escapes: mid.escapes,
            reversed,
            min_deriv: f64::NAN,
            distortion: f64::NAN,
        };
        if mid.ohi - mid.olo < w_min {
            eng.residual.push(ResidualPiece {
                left: mid.olo,
                right: mid.ohi,
                reason: ResidualReason::TooNarrow,
                time: t,
            });
        } else if verify(map, &branch, base, tol) {
            branches.push(branch);
        } else {
            eng.stats.unverified += 1;
            eng.residual.push(ResidualPiece {
                left: mid.olo,
                right: mid.ohi,
                reason: ResidualReason::Unverified,
                time: t,
            });
        }
        right.just_escaped = true;
        left.just_escaped = true;
        stack.push(right);
        stack.push(left);
    });

    branches.sort_by(|a, b| a.left.partial_cmp(&b.left).unwrap().then(a.return_time.cmp(&b.return_time)));
    let mut residual = eng.residual;
    residual.sort_by(|a, b| a.left.partial_cmp(&b.left).unwrap().then(a.time.cmp(&b.time)));
    let covered_mass = sum(branches.iter().map(InducedBranch::width));
    let residual_mass = sum(residual.iter().map(|r| r.right - r.left));
    let mut stats = eng.stats;
    if !stats.xi_est.is_finite() {
        stats.xi_est = 0.0;
    }
    Ok(InducedMap {
        delta_star: base,
        star,
        domain_mode: params.domain_mode,
        domain_mass,
        branches,
        residual,
        residual_mass,
        covered_mass,
        budget_exhausted,
        stats,
    })
}

/// Checks that the branch maps onto the base interval: the image of the base
/// endpoints pulled back along the route must reproduce the stored endpoints,
/// and the route's last `t0` steps must carry the pulled-back interval onto the
/// base interval.
fn verify(map: &IntervalMap, b: &InducedBranch, base: (f64, f64), tol: f64) -> bool {
    let (ta, tb) = if b.reversed { (base.1, base.0) } else { (base.0, base.1) };
    let xa = pullback(map, &b.route, ta);
    let xb = pullback(map, &b.route, tb);
    let slack = |x: f64| 1e-8 * b.width() + 8.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE);
    if (xa - b.left).abs() > slack(xa) || (xb - b.right).abs() > slack(xb) {
        return false;
    }
    // forward along the return leg
    let k = b.route.len() - b.t0 as usize;
    let tail = &b.route[k..];
    let (mut ya, mut yb) = (pullback(map, tail, base.0), pullback(map, tail, base.1));
    for &i in tail {
        let br = &map.branches()[i as usize];
        ya = br.value(ya);
        yb = br.value(yb);
    }
    let (ylo, yhi) = (ya.min(yb), ya.max(yb));
    (ylo - base.0).abs() <= tol && (yhi - base.1).abs() <= tol
}
