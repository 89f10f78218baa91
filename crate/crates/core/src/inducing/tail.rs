//! Return-time tail `|{T > n}|` and its exponential fit.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{EventKind, InducedMap};
use crate::error::{Error, Result};
use crate::fmath::{exp, ln};

/// Fitting only uses `n` where the resolved tail holds at least this many
/// median branches' worth of mass.
pub const FIT_FLOOR_BRANCHES: f64 = 30.0;

/// Fitting stops once the unresolved part of `|{T > n}|` exceeds this share of
/// its certain part.
pub const BRACKET_TOL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    /// `counts[n] = |{T > n}|` for `n = 0..=n_max`, residual included.
    pub counts: Vec<f64>,
    /// Same without the residual.
    pub resolved: Vec<f64>,
    /// Certain part of `|{T > n}|`: resolved mass plus residual pieces that
    /// were still travelling at time `n`. The fit uses these values.
    pub lower: Vec<f64>,
    pub residual_mass: f64,
    /// `strata[s][n]`: mass of `{T > n}` with exactly `s` escapes before `n`.
    pub strata: Vec<Vec<f64>>,
    pub c: f64,
    pub gamma: f64,
    pub r_squared: f64,
    /// Inclusive range of `n` used by the fit.
    pub fit_window: (u32, u32),
    pub gamma_positive: bool,
}

/// Least squares of `ln y = ln C - gamma n`; returns `(C, gamma, R^2)`.
pub fn fit_exponential_tail(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).map(|&(n, y)| (n, ln(y))).collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData { usable: pts.len() });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((exp(icpt), -slope, r2))
}

/// Tail counts of the induced map up to `n_max`, with the exponential fit.
///
/// The fit skips the initial plateau (before half of the mass has returned)
/// and stops once the resolved tail drops below [`FIT_FLOOR_BRANCHES`] median
/// branch masses or the residual with unknown return time exceeds
/// [`BRACKET_TOL`] of the certain tail.
pub fn tail_statistics(induced: &InducedMap, n_max: u32, stratify: bool) -> Result<TailStats> {
    if induced.branches.is_empty() {
        return Err(Error::EmptyInducedMap);
    }
    let n = n_max as usize + 1;
    // mass returning at each time, added from the end for accuracy
    let mut at = vec![0.0f64; n + 1];
    for b in &induced.branches {
        at[(b.return_time as usize).min(n)] += b.width();
    }
    let mut resolved = vec![0.0f64; n];
    let mut acc = at[n];
    for k in (0..n).rev() {
        resolved[k] = acc;
        acc += at[k];
    }
    let residual_mass = induced.residual_mass;
    let counts: Vec<f64> = resolved.iter().map(|r| r + residual_mass).collect();
    let mut alive = vec![0.0f64; n + 1];
    for r in &induced.residual {
        alive[(r.time as usize).min(n)] += r.right - r.left;
    }
    // a piece abandoned at time t has not returned by then, so T > k for k <= t
    let mut lower = resolved.clone();
    let mut acc = alive[n];
    for k in (0..n).rev() {
        acc += alive[k];
        lower[k] += acc;
    }

    let mut strata: Vec<Vec<f64>> = Vec::new();
    if stratify {
        for b in &induced.branches {
            let mut escapes_before = 0usize;
            let mut events = b.itinerary.iter().filter(|e| e.kind == EventKind::Escape).peekable();
            for k in 0..n.min(b.return_time as usize) {
                while events.peek().is_some_and(|e| (e.time as usize) < k) {
                    events.next();
                    escapes_before += 1;
                }
                if strata.len() <= escapes_before {
                    strata.resize(escapes_before + 1, vec![0.0; n]);
                }
                strata[escapes_before][k] += b.width();
            }
        }
    }

    let mut widths: Vec<f64> = induced.branches.iter().map(|b| b.width()).collect();
    widths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = widths[widths.len() / 2];
    let floor = FIT_FLOOR_BRANCHES * median;
    let start = lower.iter().position(|&r| r <= 0.5 * lower[0]).unwrap_or(n) as u32;
    let pts: Vec<(f64, f64)> = (start as usize..n)
        .take_while(|&k| resolved[k] >= floor && counts[k] - lower[k] <= BRACKET_TOL * lower[k])
        .map(|k| (k as f64, lower[k]))
        .collect();
    let end = start + pts.len().saturating_sub(1) as u32;
    let (c, gamma, r_squared) = fit_exponential_tail(&pts)?;
    Ok(TailStats {
        counts,
        resolved,
        lower,
        residual_mass,
        strata,
        c,
        gamma,
        r_squared,
        fit_window: (start, end),
        gamma_positive: gamma > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inducing::{DomainMode, InducedBranch, InducedStats, ItineraryEvent};

    fn synthetic(levels: u32, ratio: f64) -> InducedMap {
        // branch k has return time k and mass (1 - ratio) ratio^(k-1), so
        // |{T > n}| = ratio^n
        let mut branches = Vec::new();
        let mut left = 0.0;
        for k in 1..=levels {
            let w = (1.0 - ratio) * ratio.powi(k as i32 - 1);
            // split into several equal branches so the median is small
            let parts = 64;
            for _ in 0..parts {
                let width = w / parts as f64;
                branches.push(InducedBranch {
                    left,
                    right: left + width,
                    return_time: k,
                    escape_time: k,
                    t0: 0,
                    route: vec![0; k as usize],
                    itinerary: vec![
                        ItineraryEvent { time: k / 2, kind: EventKind::Escape },
                        ItineraryEvent { time: k, kind: EventKind::ReturnToStar { t0: 0 } },
                    ],
                    escapes: 1,
                    reversed: false,
                    min_deriv: f64::NAN,
                    distortion: f64::NAN,
                });
                left += width;
            }
        }
        InducedMap {
            delta_star: (0.0, 1.0),
            star: 0.0,
            domain_mode: DomainMode::DeltaStar,
            domain_mass: 1.0,
            covered_mass: left,
            branches,
            residual: Vec::new(),
            residual_mass: 1.0 - left,
            budget_exhausted: false,
            stats: InducedStats::default(),
        }
    }

    #[test]
    fn geometric_tail_recovers_ln2() {
        let m = synthetic(40, 0.5);
        let t = tail_statistics(&m, 60, true).unwrap();
        assert!((t.gamma - core::f64::consts::LN_2).abs() < 0.05, "gamma {}", t.gamma);
        assert!(t.r_squared >= 0.999);
        assert!(t.gamma_positive);
        for w in t.counts.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(t.counts[0] <= 1.0 + 1e-12);
    }

    #[test]
    fn strata_sum_to_resolved() {
        let m = synthetic(20, 0.6);
        let t = tail_statistics(&m, 30, true).unwrap();
        for k in 0..=30 {
            let s: f64 = t.strata.iter().map(|v| v[k]).sum();
            assert!((s - t.resolved[k]).abs() <= 1e-12, "n = {k}");
        }
        // at n = 1 nobody has escaped yet (escape at k / 2 >= 1 only for k >= 2)
        assert!(t.strata[0][0] > 0.0);
    }

    #[test]
    fn too_few_points() {
        let m = synthetic(3, 0.5);
        assert!(matches!(tail_statistics(&m, 10, false), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn exact_line_fit() {
        let pts: Vec<(f64, f64)> = (0..10).map(|n| (n as f64, 3.0 * exp(-0.4 * n as f64))).collect();
        let (c, g, r2) = fit_exponential_tail(&pts).unwrap();
        assert!((c - 3.0).abs() < 1e-12 && (g - 0.4).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn abandoned_pieces_count_until_their_stop_time() {
        use crate::inducing::{ResidualPiece, ResidualReason};
        let mut m = synthetic(30, 0.5);
        let extra = 1e-4;
        m.residual.push(ResidualPiece {
            left: 1.0,
            right: 1.0 + extra,
            reason: ResidualReason::BudgetExhausted,
            time: 4,
        });
        m.residual_mass += extra;
        m.domain_mass += extra;
        let t = tail_statistics(&m, 40, false).unwrap();
        for k in 0..=40 {
            let want = t.resolved[k] + if k <= 4 { extra } else { 0.0 };
            assert!((t.lower[k] - want).abs() < 1e-15, "n = {k}");
            assert!(t.lower[k] <= t.counts[k]);
        }
        // the fit cannot use n where the unknown part dominates
        let (a, b) = t.fit_window;
        for k in a..=b {
            assert!(t.counts[k as usize] - t.lower[k as usize] <= BRACKET_TOL * t.lower[k as usize]);
        }
    }
}
