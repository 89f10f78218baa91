use alloc::vec;
use alloc::vec::Vec;

use super::{normalise, uniform_bin, uniform_edges, DensityEstimate, DensityMeta, Method};
use crate::error::{Error, Result};
use crate::inducing::InducedMap;
use crate::map_model::IntervalMap;

/// Residual share above which the estimate is marked approximate.
pub const APPROXIMATE_ABOVE: f64 = 0.05;
/// Residual share above which no estimate is returned.
pub const REJECT_ABOVE: f64 = 0.20;

/// Pushes Lebesgue measure on each branch forward along its first `T` steps
/// and bins the sum. Each image `f^j(w)` is an interval obtained by pulling the
/// base interval back along the tail of the route; when it straddles bins the
/// split is exact, by pulling the bin edges back to the branch.
///
/// Residual pieces are followed from their midpoint until they land back in
/// the base interval, each step carrying the piece's width. Without this the
/// long orbits that never resolved are missing from the tower.
pub fn tower_density(map: &IntervalMap, induced: &InducedMap, bins: usize) -> Result<DensityEstimate> {
    tower_density_with(map, induced, bins, &TowerParams::default())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerParams {
    /// Follow residual pieces forward until they come back to the base
    /// interval, for at most this many steps; `0` drops them.
    pub follow_residual: u32,
}

impl Default for TowerParams {
    fn default() -> Self {
        TowerParams { follow_residual: 100_000 }
    }
}

pub fn tower_density_with(
    map: &IntervalMap,
    induced: &InducedMap,
    bins: usize,
    params: &TowerParams,
) -> Result<DensityEstimate> {
    if bins < 2 {
        return Err(Error::InvalidParameter("tower needs at least 2 bins".into()));
    }
    if induced.branches.is_empty() {
        return Err(Error::EmptyInducedMap);
    }
    let fraction = if induced.domain_mass > 0.0 { induced.residual_mass / induced.domain_mass } else { 1.0 };
    if fraction > REJECT_ABOVE {
        return Err(Error::ResidualTooLarge { fraction });
    }
    let dom = map.domain();
    let edges = uniform_edges(dom, bins);
    let brs = map.branches();
    let mut acc: Vec<crate::sum::NeumaierSum> = vec![crate::sum::NeumaierSum::new(); bins];
    let mut expected = crate::sum::NeumaierSum::new();
    let mut closure = crate::sum::NeumaierSum::new();
    let mut images: Vec<(f64, f64)> = Vec::new();
    let mut flips: Vec<bool> = Vec::new();
    let (b0, b1) = induced.delta_star;
    for b in &induced.branches {
        let t = b.route.len();
        let w = b.width();
        expected.add(t as f64 * w);
        // images[j] = f^j(w) as an (unordered) pair of endpoint images of
        // (left, right); flips[j] = f^j reverses orientation
        images.clear();
        images.resize(t + 1, (0.0, 0.0));
        flips.clear();
        flips.resize(t + 1, false);
        for j in 0..t {
            flips[j + 1] = flips[j] ^ (brs[b.route[j] as usize].sign < 0);
        }
        images[t] = if flips[t] { (b1, b0) } else { (b0, b1) };
        for j in (0..t).rev() {
            let br = &brs[b.route[j] as usize];
            let (ya, yb) = images[j + 1];
            images[j] = (br.inverse_clamped(ya), br.inverse_clamped(yb));
        }
        images[0] = (b.left, b.right);
        for j in 0..t {
            let (ya, yb) = images[j];
            let (lo, hi) = (ya.min(yb), ya.max(yb));
            let (klo, khi) = (uniform_bin(dom, bins, lo), uniform_bin(dom, bins, hi));
            if klo == khi {
                acc[klo].add(w);
                continue;
            }
            // origin of each interior edge, walking in image order
            let mut prev = if flips[j] { b.right } else { b.left };
            for k in klo..khi {
                let e = edges[k + 1];
                let mut x = crate::inducing::pullback(map, &b.route[..j], e).clamp(b.left, b.right);
                x = if flips[j] { x.min(prev) } else { x.max(prev) };
                acc[k].add((x - prev).abs());
                prev = x;
            }
            let end = if flips[j] { b.left } else { b.right };
            acc[khi].add((end - prev).abs());
        }
    }
    if params.follow_residual > 0 {
        for r in &induced.residual {
            let w = r.right - r.left;
            let mut x = 0.5 * (r.left + r.right);
            let mut j = 0u32;
            loop {
                acc[uniform_bin(dom, bins, x)].add(w);
                closure.add(w);
                x = map.step(x);
                j += 1;
                if j >= params.follow_residual || (j > r.time && x > b0 && x < b1) {
                    break;
                }
            }
        }
    }
    let mut masses: Vec<f64> = acc.iter().map(|a| a.value()).collect();
    let raw = normalise(&mut masses);
    let closure = closure.value();
    debug_assert!((raw - closure - expected.value()).abs() <= 1e-9 * raw.max(1.0));
    Ok(DensityEstimate {
        edges,
        masses,
        method: Method::Tower,
        meta: DensityMeta {
            size: induced.branches.len() as u64,
            residual_fraction: fraction,
            approximate: fraction > APPROXIMATE_ABOVE,
            raw_mass: raw - closure,
            closure_mass: closure,
            ..Default::default()
        },
    })
}
