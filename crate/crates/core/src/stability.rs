//! Stability experiments: density continuity along a parameter, tail
//! uniformity in a neighbourhood, level-set overlap of return times, and
//! agreement of densities from separated seed clouds.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inducing::{base_interval, tail_statistics, InducePipeline, InducedMap};
use crate::map_model::distance::map_distance;
use crate::map_model::families::make_builtin_family;
use crate::map_model::IntervalMap;
use crate::measure::{
    birkhoff_density, birkhoff_density_from, l1_distance, tower_density_with, ulam_density, DensityEstimate,
    TowerParams,
};

/// A one-parameter slice through a builtin family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyAxis {
    pub family: String,
    /// Parameter being varied.
    pub param: String,
    /// Values for the other parameters; unspecified ones take their defaults.
    #[serde(default)]
    pub fixed: Vec<(String, f64)>,
}

impl FamilyAxis {
    pub fn new(family: &str, param: &str) -> Self {
        FamilyAxis { family: family.to_string(), param: param.to_string(), fixed: Vec::new() }
    }

    pub fn map_at(&self, a: f64) -> Result<IntervalMap> {
        let mut p: Vec<(&str, f64)> = self.fixed.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        p.push((self.param.as_str(), a));
        make_builtin_family(&self.family, &p).map_err(|e| e.at(a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityMethod {
    Ulam { cells: usize },
    Birkhoff { n_iter: u64, burn_in: u64, n_seeds: usize, bins: usize, seed: u64 },
    Tower { bins: usize, pipeline: InducePipeline },
}

impl Default for DensityMethod {
    fn default() -> Self {
        DensityMethod::Ulam { cells: 512 }
    }
}

impl DensityMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            DensityMethod::Ulam { .. } => "ulam",
            DensityMethod::Birkhoff { .. } => "birkhoff",
            DensityMethod::Tower { .. } => "tower",
        }
    }

    pub fn estimate(&self, map: &IntervalMap) -> Result<DensityEstimate> {
        match *self {
            DensityMethod::Ulam { cells } => ulam_density(map, cells),
            DensityMethod::Birkhoff { n_iter, burn_in, n_seeds, bins, seed } => {
                birkhoff_density(map, n_iter, burn_in, n_seeds, bins, seed)
            }
            DensityMethod::Tower { bins, pipeline } => {
                let ind = pipeline.run(map)?;
                tower_density_with(map, &ind.induced, bins, &TowerParams::default())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveBudgets {
    pub density: DensityMethod,
    pub distance_grid: usize,
    /// Fit the return-time tail at every point.
    pub tail: Option<InducePipeline>,
    /// Birkhoff estimate compared against the main one at the extreme offsets.
    pub cross_check: Option<DensityMethod>,
}

impl Default for CurveBudgets {
    fn default() -> Self {
        CurveBudgets { density: DensityMethod::default(), distance_grid: 4096, tail: None, cross_check: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub a: f64,
    pub offset: f64,
    pub d: f64,
    pub l1: f64,
    pub gamma_fit: Option<f64>,
    pub c_fit: Option<f64>,
    pub method: String,
    /// L1 between the main estimate and the cross-check estimate at `a`.
    pub cross_check_l1: Option<f64>,
}

/// The reference map and density at `a0`.
pub struct Reference {
    pub a0: f64,
    pub map: IntervalMap,
    pub density: DensityEstimate,
}

pub fn stability_reference(axis: &FamilyAxis, a0: f64, budgets: &CurveBudgets) -> Result<Reference> {
    let map = axis.map_at(a0)?;
    let density = budgets.density.estimate(&map).map_err(|e| e.at(a0))?;
    Ok(Reference { a0, map, density })
}

/// One row of a stability curve. `extreme` turns on the cross-check.
pub fn stability_row(
    axis: &FamilyAxis,
    reference: &Reference,
    offset: f64,
    budgets: &CurveBudgets,
    extreme: bool,
) -> Result<StabilityRow> {
    let a = reference.a0 + offset;
    let map = axis.map_at(a)?;
    let wrap = |e: Error| e.at(a);
    let d = if offset == 0.0 {
        0.0
    } else {
        map_distance(&map, &reference.map, budgets.distance_grid).map_err(wrap)?.value
    };
    let density = budgets.density.estimate(&map).map_err(wrap)?;
    let l1 = l1_distance(&density, &reference.density).map_err(wrap)?;
    let (gamma_fit, c_fit) = match &budgets.tail {
        Some(p) => {
            let ind = p.run(&map).map_err(wrap)?;
            let t = tail_statistics(&ind.induced, p.inducing.n_max, false).map_err(wrap)?;
            (Some(t.gamma), Some(t.c))
        }
        None => (None, None),
    };
    let cross_check_l1 = match (&budgets.cross_check, extreme) {
        (Some(m), true) => Some(l1_distance(&m.estimate(&map).map_err(wrap)?, &density).map_err(wrap)?),
        _ => None,
    };
    Ok(StabilityRow { a, offset, d, l1, gamma_fit, c_fit, method: budgets.density.tag().to_string(), cross_check_l1 })
}

/// Sorts offsets by magnitude, negative before positive at equal magnitude.
pub fn sort_offsets(offsets: &mut [f64]) {
    offsets.sort_by(|x, y| x.abs().total_cmp(&y.abs()).then(x.total_cmp(y)));
}

/// Rows for every offset, sorted by `|offset|`.
pub fn stability_curve(
    axis: &FamilyAxis,
    a0: f64,
    offsets: &[f64],
    budgets: &CurveBudgets,
) -> Result<Vec<StabilityRow>> {
    let reference = stability_reference(axis, a0, budgets)?;
    let mut offs = offsets.to_vec();
    sort_offsets(&mut offs);
    let top = offs.iter().fold(0.0f64, |m, o| m.max(o.abs()));
    offs.iter().map(|&o| stability_row(axis, &reference, o, budgets, o.abs() == top)).collect()
}

/// `0` and `±2^-k eps` for `k` in `k_lo..=k_hi`.
pub fn dyadic_offsets(eps: f64, k_lo: i32, k_hi: i32) -> Vec<f64> {
    let mut v = vec![0.0];
    for k in k_lo..=k_hi {
        let o = eps * libm::exp2(-k as f64);
        v.push(-o);
        v.push(o);
    }
    sort_offsets(&mut v);
    v
}

/// Median L1 at each nonzero `|offset|`, from the largest scale down.
pub fn scale_medians(rows: &[StabilityRow]) -> Vec<(f64, f64)> {
    let mut scales: Vec<f64> = rows.iter().map(|r| r.offset.abs()).filter(|&s| s > 0.0).collect();
    scales.sort_by(|a, b| b.total_cmp(a));
    scales.dedup();
    scales
        .into_iter()
        .map(|s| {
            let mut l: Vec<f64> = rows.iter().filter(|r| r.offset.abs() == s).map(|r| r.l1).collect();
            (s, median(&mut l))
        })
        .collect()
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / libm::sqrt(sxx * syy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub a: f64,
    pub c_fit: f64,
    pub gamma_fit: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailScan {
    pub rows: Vec<TailRow>,
    pub min_gamma: f64,
    pub max_c: f64,
    /// `(max gamma - min gamma) / mean gamma`.
    pub gamma_rel_spread: f64,
}

/// `n` equally spaced points of `[a0 - radius, a0 + radius]`.
pub fn scan_points(a0: f64, radius: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a0 + radius * (2.0 * k as f64 / (n - 1) as f64 - 1.0)).collect()
}

pub fn tail_point(axis: &FamilyAxis, a: f64, pipeline: &InducePipeline) -> Result<TailRow> {
    let map = axis.map_at(a)?;
    let ind = pipeline.run(&map).map_err(|e| e.at(a))?;
    let t = tail_statistics(&ind.induced, pipeline.inducing.n_max, false).map_err(|e| e.at(a))?;
    Ok(TailRow { a, c_fit: t.c, gamma_fit: t.gamma, r_squared: t.r_squared })
}

pub fn summarize_tail_scan(rows: Vec<TailRow>) -> TailScan {
    let g: Vec<f64> = rows.iter().map(|r| r.gamma_fit).collect();
    let min_gamma = g.iter().copied().fold(f64::INFINITY, f64::min);
    let max_gamma = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    let max_c = rows.iter().map(|r| r.c_fit).fold(f64::NEG_INFINITY, f64::max);
    let gamma_rel_spread = if max_gamma == min_gamma { 0.0 } else { (max_gamma - min_gamma) / mean.abs() };
    TailScan { rows, min_gamma, max_c, gamma_rel_spread }
}

pub fn tail_uniformity_scan(
    axis: &FamilyAxis,
    a0: f64,
    radius: f64,
    n_points: usize,
    pipeline: &InducePipeline,
) -> Result<TailScan> {
    if n_points < 3 || !(radius >= 0.0) {
        return Err(Error::InvalidParameter("tail scan needs n_points >= 3 and radius >= 0".into()));
    }
    let rows = scan_points(a0, radius, n_points)
        .into_iter()
        .map(|a| tail_point(axis, a, pipeline))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_tail_scan(rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub j: u32,
    pub sym_diff_mass: f64,
    pub d: f64,
    pub mass_f: f64,
    pub mass_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub rows: Vec<OverlapRow>,
    /// Affine identification `x -> scale x + shift` taking the second base
    /// interval onto the first.
    pub scale: f64,
    pub shift: f64,
    pub residual_f: f64,
    pub residual_g: f64,
    /// Mass of `{T_f > n}` not listed in the rows, i.e. levels above `n`.
    pub beyond_f: f64,
    pub beyond_g: f64,
}

impl OverlapReport {
    pub fn total(&self) -> f64 {
        crate::sum::sum(self.rows.iter().map(|r| r.sym_diff_mass))
    }
}

fn level_sets(ind: &InducedMap, n: u32, scale: f64, shift: f64) -> Vec<Vec<(f64, f64)>> {
    let mut sets = vec![Vec::new(); n as usize + 1];
    for b in &ind.branches {
        if b.return_time >= 1 && b.return_time <= n {
            let (l, r) = (scale * b.left + shift, scale * b.right + shift);
            sets[b.return_time as usize].push((l.min(r), l.max(r)));
        }
    }
    for s in sets.iter_mut() {
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    sets
}

fn union_len(v: &[(f64, f64)]) -> f64 {
    crate::sum::sum(v.iter().map(|p| p.1 - p.0))
}

/// Length of the intersection of two sorted lists of disjoint intervals.
fn intersection_len(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = crate::sum::NeumaierSum::new();
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            acc.add(hi - lo);
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    acc.value()
}

/// Symmetric-difference mass of `{T_f = j}` and `{T_g = j}` for `j = 1..=n`,
/// after identifying the base interval of `g` with that of `f` by the
/// increasing affine map.
pub fn level_set_overlap(f: &InducedMap, g: &InducedMap, n: u32, d: f64) -> Result<OverlapReport> {
    let (fa, fb) = f.delta_star;
    let (ga, gb) = g.delta_star;
    let inter = (fb.min(gb) - fa.max(ga)).max(0.0);
    let sym_diff = (fb - fa) + (gb - ga) - 2.0 * inter;
    let half = 0.5 * (fb - fa).min(gb - ga);
    if sym_diff > half {
        return Err(Error::DomainAlignmentFailed { sym_diff, half });
    }
    let scale = (fb - fa) / (gb - ga);
    let shift = fa - scale * ga;
    let sf = level_sets(f, n, 1.0, 0.0);
    let sg = level_sets(g, n, scale, shift);
    let rows = (1..=n as usize)
        .map(|j| {
            let (mf, mg) = (union_len(&sf[j]), union_len(&sg[j]));
            let both = intersection_len(&sf[j], &sg[j]);
            OverlapRow { j: j as u32, sym_diff_mass: (mf + mg - 2.0 * both).max(0.0), d, mass_f: mf, mass_g: mg }
        })
        .collect();
    let beyond = |ind: &InducedMap, s: f64| {
        s * crate::sum::sum(ind.branches.iter().filter(|b| b.return_time > n).map(|b| b.width()))
    };
    Ok(OverlapReport {
        rows,
        scale,
        shift,
        residual_f: f.residual_mass,
        residual_g: scale * g.residual_mass,
        beyond_f: beyond(f, 1.0),
        beyond_g: beyond(g, scale),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniquenessBudgets {
    pub n_clouds: usize,
    /// Orbit points per cloud, shared out between its orbits.
    pub n_iter: u64,
    pub orbits_per_cloud: usize,
    pub burn_in: u64,
    pub bins: usize,
    pub seed: u64,
    pub threshold: f64,
    /// Points sampled for the entry check and the horizon they get.
    pub entry_samples: usize,
    pub horizon: u32,
    pub delta_star: f64,
}

impl Default for UniquenessBudgets {
    fn default() -> Self {
        UniquenessBudgets {
            n_clouds: 5,
            n_iter: 10_000_000,
            orbits_per_cloud: 10,
            burn_in: 1000,
            bins: 200,
            seed: 0,
            threshold: 0.05,
            entry_samples: 10_000,
            horizon: 200,
            delta_star: crate::fmath::exp(-5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub pairwise_l1: Vec<Vec<f64>>,
    pub max_l1: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Share of sampled points entering the base interval within the horizon;
    /// `None` for maps without a distinguished critical point.
    pub entry_fraction: Option<f64>,
}

/// Cloud `k` of `n` starts its orbits in the `k`-th of `n` equal slices of
/// the domain, so an invariant set confined to part of the domain shows up as
/// disagreement between clouds.
pub fn cloud_slice(map: &IntervalMap, k: usize, n: usize) -> (f64, f64) {
    let (a, b) = map.domain();
    let h = (b - a) / n as f64;
    (a + k as f64 * h, if k + 1 == n { b } else { a + (k + 1) as f64 * h })
}

pub fn cloud_density(map: &IntervalMap, k: usize, budgets: &UniquenessBudgets) -> Result<DensityEstimate> {
    let per = (budgets.n_iter / budgets.orbits_per_cloud.max(1) as u64).max(1);
    birkhoff_density_from(
        map,
        cloud_slice(map, k, budgets.n_clouds),
        per,
        budgets.burn_in,
        budgets.orbits_per_cloud,
        budgets.bins,
        budgets.seed.wrapping_add(k as u64),
    )
}

/// Share of `samples` equally spaced points whose orbit enters the base
/// interval within `horizon` steps.
pub fn entry_fraction(map: &IntervalMap, budgets: &UniquenessBudgets) -> Option<f64> {
    map.star()?;
    let rp = crate::inducing::ReturnFinderParams { delta_star: budgets.delta_star, ..Default::default() };
    let (lo, hi) = base_interval(map, &rp).ok()?;
    let (a, b) = map.domain();
    let n = budgets.entry_samples.max(1);
    let mut hit = 0usize;
    for i in 0..n {
        let mut x = a + (b - a) * (i as f64 + 0.5) / n as f64;
        for _ in 0..=budgets.horizon {
            if x > lo && x < hi {
                hit += 1;
                break;
            }
            x = map.step(x);
        }
    }
    Some(hit as f64 / n as f64)
}

pub fn uniqueness_from_clouds(
    clouds: &[DensityEstimate],
    threshold: f64,
    entry_fraction: Option<f64>,
) -> Result<UniquenessReport> {
    let n = clouds.len();
    let mut m = vec![vec![0.0; n]; n];
    let mut max_l1 = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let l = l1_distance(&clouds[i], &clouds[j])?;
            m[i][j] = l;
            m[j][i] = l;
            max_l1 = max_l1.max(l);
        }
    }
    Ok(UniquenessReport { pairwise_l1: m, max_l1, threshold, passed: max_l1 <= threshold, entry_fraction })
}

pub fn uniqueness_check(map: &IntervalMap, budgets: &UniquenessBudgets) -> Result<UniquenessReport> {
    if budgets.n_clouds < 3 {
        return Err(Error::InvalidParameter("uniqueness needs at least 3 clouds".into()));
    }
    let clouds = (0..budgets.n_clouds).map(|k| cloud_density(map, k, budgets)).collect::<Result<Vec<_>>>()?;
    uniqueness_from_clouds(&clouds, budgets.threshold, entry_fraction(map, budgets))
}
