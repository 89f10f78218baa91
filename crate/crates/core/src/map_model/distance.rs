//! The metric on map space: closeness of critical locations, of critical
//! orders, and C^2 closeness away from the critical points.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::IntervalMap;
use crate::error::{Error, Result};
use crate::fmath::{exp, ln};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceTerms {
    pub critical_location: f64,
    pub critical_order: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapDistanceReport {
    pub value: f64,
    pub achieved_eta: f64,
    pub per_term: DistanceTerms,
    pub grid_resolution: usize,
}

struct C2Sampler<'a> {
    f: &'a IntervalMap,
    g: &'a IntervalMap,
    pairs: Vec<(f64, f64)>,
    grid: Vec<(f64, f64)>,
}

fn c2_gap(f: &IntervalMap, g: &IntervalMap, x: f64) -> f64 {
    let (bf, bg) = (&f.branches()[f.branch_index_fast(x)], &g.branches()[g.branch_index_fast(x)]);
    let d0 = (bf.value(x) - bg.value(x)).abs();
    let d1 = (bf.deriv(x) - bg.deriv(x)).abs();
    let d2 = (bf.second_deriv(x) - bg.second_deriv(x)).abs();
    let m = d0.max(d1).max(d2);
    if m.is_nan() {
        f64::INFINITY
    } else {
        m
    }
}

impl<'a> C2Sampler<'a> {
    fn new(f: &'a IntervalMap, g: &'a IntervalMap, grid_n: usize) -> Self {
        let (a, b) = f.domain();
        let pairs =
            f.critical_points().iter().zip(g.critical_points()).map(|(p, q)| (p.location, q.location)).collect();
        let grid = (0..grid_n)
            .map(|k| {
                let x = a + (b - a) * k as f64 / (grid_n - 1) as f64;
                (x, c2_gap(f, g, x))
            })
            .collect();
        C2Sampler { f, g, pairs, grid }
    }

    /// Open exclusion intervals for a given eta.
    fn excluded(&self, eta: f64) -> Vec<(f64, f64)> {
        self.pairs
            .iter()
            .filter_map(|&(cf, cg)| {
                let lo = cf.max(cg) - 2.0 * eta;
                let hi = cf.min(cg) + 2.0 * eta;
                (lo < hi).then_some((lo, hi))
            })
            .collect()
    }

    fn sup(&self, eta: f64) -> f64 {
        let ex = self.excluded(eta);
        let inside = |x: f64| ex.iter().any(|&(lo, hi)| x > lo && x < hi);
        let mut m = 0.0f64;
        for &(x, v) in &self.grid {
            if !inside(x) {
                m = m.max(v);
            }
        }
        for &(lo, hi) in &ex {
            for x in [lo, hi] {
                if self.f.contains(x) && !inside(x) {
                    m = m.max(c2_gap(self.f, self.g, x));
                }
            }
        }
        m
    }
}

/// `d(f, g)`: infimum of the `eta` for which all three closeness conditions
/// hold, with the C^2 distance on `I_eta` sampled on `grid_n` points plus the
/// boundary points of the excluded neighbourhoods. Critical points are matched
/// by their index in the sorted order.
pub fn map_distance(f: &IntervalMap, g: &IntervalMap, grid_n: usize) -> Result<MapDistanceReport> {
    let (nf, ng) = (f.critical_points().len(), g.critical_points().len());
    if nf != ng {
        return Err(Error::IncompatibleCriticalStructure { left: nf, right: ng });
    }
    if f.domain() != g.domain() {
        return Err(Error::InvalidParameter("maps live on different domains".into()));
    }
    if grid_n < 64 {
        return Err(Error::InvalidParameter("grid_n must be at least 64".into()));
    }
    let (mut dc, mut dl) = (0.0f64, 0.0f64);
    for (p, q) in f.critical_points().iter().zip(g.critical_points()) {
        dc = dc.max((p.location - q.location).abs());
        dl = dl.max((p.order - q.order).abs());
    }
    let sampler = C2Sampler::new(f, g, grid_n);
    let ok = |eta: f64| dc < eta && dl < eta && sampler.sup(eta) < eta;
    let hi = 0.5 * f.domain_len();
    let floor = 1e-15 * f.domain_len();
    if !ok(hi) {
        return Err(Error::NoFiniteEta);
    }
    let terms = |eta: f64| DistanceTerms { critical_location: dc, critical_order: dl, c2: sampler.sup(eta) };
    if ok(floor) {
        return Ok(MapDistanceReport {
            value: 0.0,
            achieved_eta: floor,
            per_term: terms(floor),
            grid_resolution: grid_n,
        });
    }
    let (mut lo, mut up) = (ln(floor), ln(hi));
    while up - lo > 1e-11 {
        let mid = 0.5 * (lo + up);
        if ok(exp(mid)) {
            up = mid;
        } else {
            lo = mid;
        }
    }
    let eta = exp(up);
    Ok(MapDistanceReport { value: eta, achieved_eta: eta, per_term: terms(eta), grid_resolution: grid_n })
}
