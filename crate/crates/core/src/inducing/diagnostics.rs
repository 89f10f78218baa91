//! Sampled expansion and distortion of the induced branches.
//!
//! Points are sampled in the base interval and pulled back along each branch
//! route, so the orbit is exact up to rounding of the inverse branches. Small
//! differences are pulled back as increments rather than recomputed from two
//! nearby points.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{InducedBranch, InducedMap};
use crate::fmath::{exp, expm1};
use crate::map_model::{Branch, IntervalMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    /// Minimum over branches and sampled neighbouring pairs of
    /// `|f^T(x) - f^T(y)| / |x - y|`.
    pub sigma_est: f64,
    /// Minimum sampled `|(f^T)'|`.
    pub min_deriv: f64,
    pub per_branch_sigma: Vec<f64>,
    pub per_branch_min_deriv: Vec<f64>,
    pub samples_per_branch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// `max |(f^T)'(x) / (f^T)'(y) - 1| / |f^T(x) - f^T(y)|` over sampled pairs.
    pub d_hat: f64,
    pub per_branch: Vec<f64>,
    /// Largest ratio of the sampled log-distortion of a branch to the sum of
    /// `|omega_j| / dist(omega_j, critical set)` along its orbit.
    pub bd3_ratio_max: f64,
    /// Orbit intervals touching the critical set, left out of that sum.
    pub bd3_skipped_terms: u64,
    pub pair_samples: usize,
    pub skipped_pairs: u64,
}

/// `e` with `f(x + e) - f(x) = dy` on the branch.
fn pull_increment(br: &Branch, x: f64, dy: f64) -> f64 {
    let naive = br.inverse_clamped(br.value(x) + dy) - x;
    let d0 = br.deriv(x);
    let mut e = if d0.is_finite() && d0 != 0.0 && (naive == 0.0 || (dy / d0 - naive).abs() < naive.abs()) {
        dy / d0
    } else {
        naive
    };
    let resid = |e: f64| (br.increment(x, e) - dy).abs();
    let mut best = (resid(naive), naive);
    for _ in 0..12 {
        let r = br.increment(x, e) - dy;
        if r.abs() < best.0 {
            best = (r.abs(), e);
        }
        let d = br.deriv((x + e).clamp(br.lo, br.hi));
        if !(d.is_finite() && d != 0.0) {
            break;
        }
        let step = r / d;
        let next = (x + (e - step)).clamp(br.lo, br.hi) - x;
        if next == e {
            break;
        }
        e = next;
    }
    if resid(e) < best.0 {
        e
    } else {
        best.1
    }
}

/// A point pulled back along a route: origin point, origin increment matching
/// `du` at the far end, and `ln |(f^T)'|` at the origin point.
struct Pulled {
    x: f64,
    dx: f64,
    log_deriv: f64,
}

fn pull(map: &IntervalMap, route: &[u8], u: f64, du: f64, mut stage: impl FnMut(f64, f64)) -> Pulled {
    let brs = map.branches();
    let (mut y, mut dy) = (u, du);
    let mut log_deriv = 0.0;
    for &b in route.iter().rev() {
        let br = &brs[b as usize];
        let x = br.inverse_clamped(y);
        let dx = if dy == 0.0 { 0.0 } else { pull_increment(br, x, dy) };
        log_deriv += br.log_abs_deriv(x);
        stage(x, dx);
        y = x;
        dy = dx;
    }
    Pulled { x: y, dx: dy, log_deriv }
}

fn sample_points(base: (f64, f64), n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = n.max(2);
    let mut u: Vec<f64> = (0..n - 2).map(|_| base.0 + (base.1 - base.0) * rng.random::<f64>()).collect();
    u.push(base.0);
    u.push(base.1);
    u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    u.dedup();
    u
}

fn branch_rng(seed: u64, rank: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rank as u64);
    rng
}

/// `(sigma, min |(f^T)'|)` for one branch from `n` samples.
fn branch_expansion(
    map: &IntervalMap,
    b: &InducedBranch,
    base: (f64, f64),
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let u = sample_points(base, n, rng);
    let mut sigma = f64::INFINITY;
    let mut min_log = f64::INFINITY;
    for (k, &uk) in u.iter().enumerate() {
        let du = u.get(k + 1).map_or(0.0, |&v| v - uk);
        let p = pull(map, &b.route, uk, du, |_, _| {});
        min_log = min_log.min(p.log_deriv);
        if du != 0.0 && p.dx != 0.0 {
            sigma = sigma.min((du / p.dx).abs());
        }
    }
    (sigma, exp(min_log))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchExpansion {
    pub sigma: f64,
    pub min_deriv: f64,
}

/// Expansion of the branch of rank `rank`, sampled from stream `rank` of the
/// generator keyed by `seed`.
pub fn branch_expansion_at(
    map: &IntervalMap,
    base: (f64, f64),
    b: &InducedBranch,
    samples: usize,
    seed: u64,
    rank: usize,
) -> BranchExpansion {
    let mut rng = branch_rng(seed, rank);
    let (sigma, min_deriv) = branch_expansion(map, b, base, samples, &mut rng);
    BranchExpansion { sigma, min_deriv }
}

pub fn expansion_report(per: &[BranchExpansion], samples_per_branch: usize) -> ExpansionReport {
    let per_branch_sigma: Vec<f64> = per.iter().map(|e| e.sigma).collect();
    let per_branch_min_deriv: Vec<f64> = per.iter().map(|e| e.min_deriv).collect();
    ExpansionReport {
        sigma_est: per_branch_sigma.iter().copied().fold(f64::INFINITY, f64::min),
        min_deriv: per_branch_min_deriv.iter().copied().fold(f64::INFINITY, f64::min),
        per_branch_sigma,
        per_branch_min_deriv,
        samples_per_branch,
    }
}

pub fn expansion_diagnostic(
    map: &IntervalMap,
    induced: &InducedMap,
    samples_per_branch: usize,
    seed: u64,
) -> ExpansionReport {
    let base = induced.delta_star;
    let per: Vec<BranchExpansion> = induced
        .branches
        .iter()
        .enumerate()
        .map(|(rank, b)| branch_expansion_at(map, base, b, samples_per_branch, seed, rank))
        .collect();
    expansion_report(&per, samples_per_branch)
}

/// `(d_hat, log-distortion, bd3 sum, skipped terms, skipped pairs)` for one
/// branch.
fn branch_distortion(
    map: &IntervalMap,
    b: &InducedBranch,
    base: (f64, f64),
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64, f64, u64, u64) {
    let u = sample_points(base, n, rng);
    let logs: Vec<f64> = u.iter().map(|&uk| pull(map, &b.route, uk, 0.0, |_, _| {}).log_deriv).collect();
    let mut d_hat = 0.0f64;
    let mut skipped = 0u64;
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            let gap = u[j] - u[i];
            if !(gap > 0.0) {
                skipped += 1;
                continue;
            }
            d_hat = d_hat.max(expm1(logs[i] - logs[j]).abs() / gap);
        }
    }
    let lmax = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lmin = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut bd3 = 0.0;
    let mut bd3_skipped = 0u64;
    pull(map, &b.route, base.0, base.1 - base.0, |x, dx| {
        let dist = map.critical_distance(x).min(map.critical_distance(x + dx));
        if dist > 0.0 {
            bd3 += dx.abs() / dist;
        } else {
            bd3_skipped += 1;
        }
    });
    (d_hat, lmax - lmin, bd3, bd3_skipped, skipped)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchDistortion {
    pub d_hat: f64,
    /// Spread of the sampled `ln |(f^T)'|`.
    pub log_distortion: f64,
    pub bd3_sum: f64,
    pub bd3_skipped_terms: u64,
    pub skipped_pairs: u64,
}

/// Distortion of the branch of rank `rank`; its samples come from a stream
/// independent of [`branch_expansion_at`].
pub fn branch_distortion_at(
    map: &IntervalMap,
    base: (f64, f64),
    b: &InducedBranch,
    pair_samples: usize,
    seed: u64,
    rank: usize,
) -> BranchDistortion {
    let mut rng = branch_rng(seed ^ 0x5eed_d157, rank);
    let (d_hat, log_distortion, bd3_sum, bd3_skipped_terms, skipped_pairs) =
        branch_distortion(map, b, base, pair_samples, &mut rng);
    BranchDistortion { d_hat, log_distortion, bd3_sum, bd3_skipped_terms, skipped_pairs }
}

pub fn distortion_report(per: &[BranchDistortion], pair_samples: usize) -> DistortionReport {
    let mut ratio_max = 0.0f64;
    for d in per {
        if d.bd3_sum > 0.0 {
            ratio_max = ratio_max.max(d.log_distortion / d.bd3_sum);
        }
    }
    let per_branch: Vec<f64> = per.iter().map(|d| d.d_hat).collect();
    DistortionReport {
        d_hat: per_branch.iter().copied().fold(0.0, f64::max),
        per_branch,
        bd3_ratio_max: ratio_max,
        bd3_skipped_terms: per.iter().map(|d| d.bd3_skipped_terms).sum(),
        pair_samples,
        skipped_pairs: per.iter().map(|d| d.skipped_pairs).sum(),
    }
}

pub fn distortion_diagnostic(
    map: &IntervalMap,
    induced: &InducedMap,
    pair_samples: usize,
    seed: u64,
) -> DistortionReport {
    let base = induced.delta_star;
    let per: Vec<BranchDistortion> = induced
        .branches
        .iter()
        .enumerate()
        .map(|(rank, b)| branch_distortion_at(map, base, b, pair_samples, seed, rank))
        .collect();
    distortion_report(&per, pair_samples)
}

/// Fills `min_deriv` (sampled, `samples` points) and `distortion` (`d_hat` of
/// the branch) on every branch, with the same streams as the two reports.
pub fn annotate_branches(map: &IntervalMap, induced: &mut InducedMap, samples: usize, seed: u64) {
    let base = induced.delta_star;
    for (rank, b) in induced.branches.iter_mut().enumerate() {
        b.min_deriv = branch_expansion_at(map, base, b, samples, seed, rank).min_deriv;
        b.distortion = branch_distortion_at(map, base, b, samples, seed, rank).d_hat;
    }
}

/// `ln |(f^T)'|` at the preimages of `us` along the branch route, with the
/// preimages themselves.
pub fn branch_log_derivatives(map: &IntervalMap, b: &InducedBranch, us: &[f64]) -> Vec<(f64, f64)> {
    us.iter()
        .map(|&u| {
            let p = pull(map, &b.route, u, 0.0, |_, _| {});
            (p.x, p.log_deriv)
        })
        .collect()
}
