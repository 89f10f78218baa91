//! Critical partition of the neighbourhood of each one-sided critical point, and
//! binding periods.
//!
//! For a right-sided point `c` the annuli are `I_r = [c + e^-r, c + e^-(r-1))`;
//! left-sided points mirror them. `I_r` with `r > r_delta` is cut into `r^2`
//! equal cells numbered `j = 1..=r^2` moving away from `c`; the extreme annulus
//! `I_{r_delta}` stays whole and carries `j = 0`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmath::{ceil, exp, floor, ln, round};
use crate::map_model::{HypothesisSet, IntervalMap, Side};

/// `ln(1/delta)`, which must be a positive integer.
pub fn r_delta(delta: f64) -> Result<u32> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DeltaNotAdmissible(delta));
    }
    let k = -ln(delta);
    let kr = round(k);
    if kr < 1.0 || (k - kr).abs() > 1e-12 * kr.max(1.0) {
        return Err(Error::DeltaNotAdmissible(delta));
    }
    Ok(kr as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub r: u32,
    /// 0 for the extreme annulus.
    pub j: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub spec: usize,
    pub r: u32,
    pub j: u32,
    pub left: f64,
    pub right: f64,
    pub hat_left: f64,
    pub hat_right: f64,
}

/// Geometry of the annuli around one one-sided critical point, in offsets
/// `d = |x - c|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annuli {
    pub location: f64,
    pub side: Side,
    pub r_delta: u32,
    pub r_max: u32,
}

impl Annuli {
    /// `(inner, outer)` offsets of a cell; shared boundaries are bit-identical.
    pub fn offsets(&self, id: CellId) -> (f64, f64) {
        let r = id.r;
        let inner_r = exp(-(r as f64));
        let outer_r = exp(-(r as f64 - 1.0));
        if id.j == 0 {
            return (inner_r, outer_r);
        }
        let n = r * r;
        let len = (outer_r - inner_r) / n as f64;
        let inner = inner_r + (id.j - 1) as f64 * len;
        let outer = if id.j == n { outer_r } else { inner_r + id.j as f64 * len };
        (inner, outer)
    }

    /// Offset-space interval in domain coordinates, sorted.
    pub fn to_coords(&self, inner: f64, outer: f64) -> (f64, f64) {
        match self.side {
            Side::Right => (self.location + inner, self.location + outer),
            Side::Left => (self.location - outer, self.location - inner),
        }
    }

    pub fn offset_of(&self, x: f64) -> f64 {
        match self.side {
            Side::Right => x - self.location,
            Side::Left => self.location - x,
        }
    }

    pub fn point_at(&self, d: f64) -> f64 {
        self.location + self.side.sign() * d
    }

    /// Outer radius of the enlarged neighbourhood, `e * delta`.
    pub fn hat_radius(&self) -> f64 {
        exp(-(self.r_delta as f64 - 1.0))
    }

    pub fn delta(&self) -> f64 {
        exp(-(self.r_delta as f64))
    }

    /// Innermost materialised offset, `e^-r_max`.
    pub fn floor(&self) -> f64 {
        exp(-(self.r_max as f64))
    }

    /// Cell containing offset `d`, using `[inner, outer)` (or `(inner, outer]`
    /// when `upper` is set, i.e. for the upper end of an interval). `None`
    /// outside `[e^-r_max, e delta)`.
    pub fn locate(&self, d: f64, upper: bool) -> Option<CellId> {
        let (lo, hi) = (self.floor(), self.hat_radius());
        let outside = if upper { d <= lo || d > hi } else { d < lo || d >= hi };
        if outside || d.is_nan() {
            return None;
        }
        let mut r = (ceil(-ln(d)) as i64).clamp(self.r_delta as i64, self.r_max as i64) as u32;
        let contains = |inner: f64, outer: f64| {
            if upper {
                d > inner && d <= outer
            } else {
                d >= inner && d < outer
            }
        };
        loop {
            let (inner, outer) = self.offsets(CellId { r, j: 0 });
            let below = if upper { d <= inner } else { d < inner };
            let above = if upper { d > outer } else { d >= outer };
            if below && r < self.r_max {
                r += 1;
            } else if above && r > self.r_delta {
                r -= 1;
            } else {
                break;
            }
        }
        if r == self.r_delta {
            return Some(CellId { r, j: 0 });
        }
        let n = r * r;
        let (inner_r, outer_r) = self.offsets(CellId { r, j: 0 });
        let len = (outer_r - inner_r) / n as f64;
        let mut j = (floor((d - inner_r) / len) as i64 + 1).clamp(1, n as i64) as u32;
        loop {
            let (inner, outer) = self.offsets(CellId { r, j });
            if contains(inner, outer) {
                break;
            }
            let below = if upper { d <= inner } else { d < inner };
            if below && j > 1 {
                j -= 1;
            } else if !below && j < n {
                j += 1;
            } else {
                break;
            }
        }
        Some(CellId { r, j })
    }

    /// Position counted from the outside: the extreme cell is 0, the outermost
    /// cell of `I_{r_delta + 1}` is 1, and so on inward.
    pub fn rank(&self, id: CellId) -> u64 {
        if id.j == 0 {
            return 0;
        }
        let before: u64 = (self.r_delta + 1..id.r).map(|r| (r as u64) * (r as u64)).sum();
        before + (id.r as u64 * id.r as u64 - id.j as u64) + 1
    }

    /// Next cell inward (towards `c`); may go below `r_max`.
    pub fn inward(&self, id: CellId) -> CellId {
        if id.j == 0 {
            let r = self.r_delta + 1;
            CellId { r, j: r * r }
        } else if id.j > 1 {
            CellId { r: id.r, j: id.j - 1 }
        } else {
            let r = id.r + 1;
            CellId { r, j: r * r }
        }
    }

    /// Next cell outward; `None` past the extreme cell.
    pub fn outward(&self, id: CellId) -> Option<CellId> {
        if id.j == 0 {
            None
        } else if id.j < id.r * id.r {
            Some(CellId { r: id.r, j: id.j + 1 })
        } else if id.r == self.r_delta + 1 {
            Some(CellId { r: self.r_delta, j: 0 })
        } else {
            Some(CellId { r: id.r - 1, j: 1 })
        }
    }

    /// Offsets of the cell together with its two neighbours.
    pub fn hat_offsets(&self, id: CellId) -> (f64, f64) {
        let (inner, _) = self.offsets(self.inward(id));
        let outer = match self.outward(id) {
            Some(o) => self.offsets(o).1,
            None => self.offsets(id).1,
        };
        (inner, outer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecPartition {
    pub spec: usize,
    pub annuli: Annuli,
    pub cells: Vec<Cell>,
    pub truncated_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPartition {
    pub delta: f64,
    pub r_delta: u32,
    pub r_max: u32,
    pub specs: Vec<SpecPartition>,
}

impl CriticalPartition {
    pub fn annuli(&self, spec: usize) -> &Annuli {
        &self.specs[spec].annuli
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.specs.iter().flat_map(|s| s.cells.iter())
    }

    pub fn cell_count(&self) -> usize {
        self.specs.iter().map(|s| s.cells.len()).sum()
    }
}

/// Materialises the cells for every spec down to depth `r_max`, ordered by
/// `(spec, r, j)`.
pub fn build_critical_partition(map: &IntervalMap, hyp: &HypothesisSet, r_max: u32) -> Result<CriticalPartition> {
    let rd = r_delta(hyp.delta)?;
    if r_max <= rd + 1 {
        return Err(Error::InvalidParameter("r_max must exceed r_delta + 1".into()));
    }
    let (a, b) = map.domain();
    let reach = exp(-(rd as f64 - 1.0));
    let specs = map.critical_points();
    for (i, s) in specs.iter().enumerate() {
        let (lo, hi) = match s.side {
            Side::Right => (s.location, s.location + reach),
            Side::Left => (s.location - reach, s.location),
        };
        if lo < a || hi > b {
            return Err(Error::OverlappingCriticalNeighborhoods(i, i));
        }
        for (k, t) in specs.iter().enumerate().skip(i + 1) {
            let (lo2, hi2) = match t.side {
                Side::Right => (t.location, t.location + reach),
                Side::Left => (t.location - reach, t.location),
            };
            if lo.max(lo2) < hi.min(hi2) {
                return Err(Error::OverlappingCriticalNeighborhoods(i, k));
            }
        }
    }
    let parts = specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let annuli = Annuli { location: s.location, side: s.side, r_delta: rd, r_max };
            let mut cells = Vec::new();
            let mut push = |id: CellId| {
                let (inner, outer) = annuli.offsets(id);
                let (hi_in, hi_out) = annuli.hat_offsets(id);
                let (left, right) = annuli.to_coords(inner, outer);
                let (hat_left, hat_right) = annuli.to_coords(hi_in, hi_out);
                cells.push(Cell { spec: i, r: id.r, j: id.j, left, right, hat_left, hat_right });
            };
            push(CellId { r: rd, j: 0 });
            for r in rd + 1..=r_max {
                for j in 1..=r * r {
                    push(CellId { r, j });
                }
            }
            SpecPartition { spec: i, annuli, cells, truncated_mass: annuli.floor() }
        })
        .collect();
    Ok(CriticalPartition { delta: hyp.delta, r_delta: rd, r_max, specs: parts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingEntry {
    pub spec: usize,
    pub r: u32,
    pub p: u32,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingTable {
    pub k_max: u32,
    pub sample_n: usize,
    pub r_delta: u32,
    pub r_max: u32,
    pub entries: Vec<BindingEntry>,
}

impl BindingTable {
    /// `p(r)` for a spec; depths outside the stored range are clamped.
    pub fn p(&self, spec: usize, r: u32) -> u32 {
        let per = (self.r_max - self.r_delta) as usize;
        let r = r.clamp(self.r_delta + 1, self.r_max);
        self.entries[spec * per + (r - self.r_delta - 1) as usize].p
    }
}

/// Forward orbit of the one-sided critical value together with the side from
/// which nearby points approach each orbit point.
pub(crate) fn critical_orbit(map: &IntervalMap, spec: usize, len: usize) -> Vec<(f64, Side)> {
    let s = &map.critical_points()[spec];
    let (a, b) = map.domain();
    let mut out = Vec::with_capacity(len);
    let bi = map.branch_index(s.location, Some(s.side)).unwrap();
    let br = &map.branches()[bi];
    let mut x = br.value(s.location);
    let mut dir = s.side.sign() * f64::from(br.sign);
    for _ in 0..len {
        x = x.clamp(a, b);
        let side = Side::from_sign(dir);
        out.push((x, side));
        let br = &map.branches()[map.branch_index(x, Some(side)).unwrap()];
        dir *= f64::from(br.sign);
        x = br.value(x);
    }
    out
}

/// `f(c + e) - f(c)` where `c` is approached from `side`, computed as an
/// increment when `c + e` lies on the same branch.
fn deviation_step(map: &IntervalMap, c: f64, side: Side, e: f64) -> f64 {
    let bc = map.branch_index(c, Some(side)).unwrap();
    let (a, b) = map.domain();
    let x = (c + e).clamp(a, b);
    let bx = if x == c {
        map.branch_index(c, Some(Side::from_sign(e))).unwrap()
    } else {
        map.branch_index(x, Some(Side::from_sign(e))).unwrap()
    };
    let br = &map.branches()[bc];
    if bc == bx {
        br.increment(c, e)
    } else {
        map.branches()[bx].value(x) - br.value(c)
    }
}

/// Largest `k <= k_max` such that every sampled point of the union of `I_r` and
/// its neighbouring annuli shadows the critical orbit:
/// `|f^{j+1}(x) - f^{j+1}(c)| <= delta e^{-2 alpha j}` for all `j <= k`.
/// Returns `(p, truncated)`. The annuli follow from `r` alone, so the
/// partition is not consulted.
pub fn binding_period(
    map: &IntervalMap,
    _partition: &CriticalPartition,
    spec: usize,
    r: u32,
    hyp: &HypothesisSet,
    k_max: u32,
    sample_n: usize,
) -> (u32, bool) {
    let s = &map.critical_points()[spec];
    if !s.is_critical() {
        return (0, false);
    }
    let orbit = critical_orbit(map, spec, k_max as usize + 2);
    binding_with_orbit(map, spec, r, hyp, k_max, sample_n, &orbit)
}

#[allow(clippy::too_many_arguments)]
fn binding_with_orbit(
    map: &IntervalMap,
    spec: usize,
    r: u32,
    hyp: &HypothesisSet,
    k_max: u32,
    sample_n: usize,
    orbit: &[(f64, Side)],
) -> (u32, bool) {
    let s = &map.critical_points()[spec];
    let bc = map.branch_index(s.location, Some(s.side)).unwrap();
    let (d_in, d_out) = (exp(-(r as f64 + 1.0)), exp(-(r as f64 - 2.0)));
    let n = sample_n.max(3);
    let mut p = k_max;
    for i in 0..n {
        let d = d_in + (d_out - d_in) * i as f64 / (n - 1) as f64;
        let mut e = map.branches()[bc].increment(s.location, s.side.sign() * d);
        let mut survived = k_max;
        for j in 0..=k_max {
            if !(e.abs() <= hyp.delta * exp(-2.0 * hyp.alpha * j as f64)) {
                survived = j.saturating_sub(1);
                break;
            }
            if j == k_max {
                break;
            }
            let (c, side) = orbit[j as usize];
            e = deviation_step(map, c, side, e);
        }
        p = p.min(survived);
        if p == 0 {
            break;
        }
    }
    (p, p == k_max)
}

/// Binding periods for every spec and every depth `r_delta < r <= r_max`.
pub fn binding_table(
    map: &IntervalMap,
    partition: &CriticalPartition,
    hyp: &HypothesisSet,
    k_max: u32,
    sample_n: usize,
) -> BindingTable {
    let mut entries = Vec::new();
    for (spec, s) in map.critical_points().iter().enumerate() {
        let orbit = if s.is_critical() { critical_orbit(map, spec, k_max as usize + 2) } else { Vec::new() };
        for r in partition.r_delta + 1..=partition.r_max {
            let (p, truncated) = if s.is_critical() {
                binding_with_orbit(map, spec, r, hyp, k_max, sample_n, &orbit)
            } else {
                (0, false)
            };
            entries.push(BindingEntry { spec, r, p, truncated });
        }
    }
    BindingTable { k_max, sample_n, r_delta: partition.r_delta, r_max: partition.r_max, entries }
}
