use alloc::vec;
use alloc::vec::Vec;

use super::{uniform_edges, DensityEstimate, DensityMeta, Method};
use crate::error::{Error, Result};
use crate::map_model::IntervalMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlamParams {
    /// Stop once the L1 change of one step falls to this level.
    pub tol: f64,
    pub max_iter: u64,
}

impl Default for UlamParams {
    fn default() -> Self {
        UlamParams { tol: 1e-12, max_iter: 200_000 }
    }
}

/// Sparse row-stochastic Ulam matrix on `cells` equal cells: entry `(i, j)` is
/// the share of cell `i` that the map sends into cell `j`, computed from the
/// branch inverses.
pub fn transition_rows(map: &IntervalMap, cells: usize) -> Vec<Vec<(u32, f64)>> {
    let dom = map.domain();
    let edges = uniform_edges(dom, cells);
    let h = (dom.1 - dom.0) / cells as f64;
    let cell_of = |y: f64| -> usize {
        let t = crate::fmath::floor((y - dom.0) / h);
        if t <= 0.0 {
            0
        } else {
            (t as usize).min(cells - 1)
        }
    };
    let mut rows = Vec::with_capacity(cells);
    for i in 0..cells {
        let (a, b) = (edges[i], edges[i + 1]);
        let mut row: Vec<(u32, f64)> = Vec::new();
        for br in map.branches() {
            let (lo, hi) = (a.max(br.lo), b.min(br.hi));
            if hi <= lo {
                continue;
            }
            let (ya, yb) = (br.value(lo), br.value(hi));
            let (ylo, yhi) = (ya.min(yb), ya.max(yb));
            let (jlo, jhi) = (cell_of(ylo), cell_of(yhi));
            for j in jlo..=jhi {
                let (u, v) = (edges[j].max(ylo), edges[j + 1].min(yhi));
                let w = if jlo == jhi {
                    hi - lo
                } else if v > u {
                    let xu = br.inverse_clamped(u).clamp(lo, hi);
                    let xv = br.inverse_clamped(v).clamp(lo, hi);
                    (xv - xu).abs()
                } else {
                    0.0
                };
                if w > 0.0 {
                    match row.iter_mut().find(|e| e.0 == j as u32) {
                        Some(e) => e.1 += w,
                        None => row.push((j as u32, w)),
                    }
                }
            }
        }
        let s = crate::sum::sum(row.iter().map(|e| e.1));
        for e in row.iter_mut() {
            e.1 /= s;
        }
        row.sort_by_key(|e| e.0);
        rows.push(row);
    }
    rows
}

/// Invariant density of the Ulam matrix by power iteration from the uniform
/// vector.
pub fn ulam_density(map: &IntervalMap, cells: usize) -> Result<DensityEstimate> {
    ulam_density_with(map, cells, &UlamParams::default())
}

pub fn ulam_density_with(map: &IntervalMap, cells: usize, params: &UlamParams) -> Result<DensityEstimate> {
    if cells < 2 {
        return Err(Error::InvalidParameter("ulam needs at least 2 cells".into()));
    }
    let rows = transition_rows(map, cells);
    let mut v = vec![1.0 / cells as f64; cells];
    let mut next = vec![0.0; cells];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    // a half-lazy step removes any periodic part without moving the fixed point
    let mut lazy = false;
    while iterations < params.max_iter {
        iterations += 1;
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in rows.iter().enumerate() {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for &(j, p) in row {
                next[j as usize] += vi * p;
            }
        }
        if lazy {
            for (n, &x) in next.iter_mut().zip(&v) {
                *n = 0.5 * (*n + x);
            }
        }
        let s = crate::sum::sum(next.iter().copied());
        next.iter_mut().for_each(|x| *x /= s);
        let r = crate::sum::sum(next.iter().zip(&v).map(|(a, b)| (a - b).abs()));
        core::mem::swap(&mut v, &mut next);
        if r <= params.tol {
            residual = r;
            break;
        }
        if iterations == 2000 && r > 1e-6 {
            lazy = true;
        }
        residual = r;
    }
    if residual > params.tol {
        return Err(Error::PowerIterationStalled { residual });
    }
    Ok(DensityEstimate {
        edges: uniform_edges(map.domain(), cells),
        masses: v,
        method: Method::Ulam,
        meta: DensityMeta { size: cells as u64, iterations, raw_mass: 1.0, ..Default::default() },
    })
}

/// L1 size of one Ulam step applied to `p` (re-binned onto the cells) minus
/// `p` itself.
pub fn invariance_residual(map: &IntervalMap, p: &DensityEstimate, cells: usize) -> Result<f64> {
    if cells < 2 {
        return Err(Error::InvalidParameter("ulam needs at least 2 cells".into()));
    }
    if p.domain() != map.domain() {
        return Err(Error::DomainMismatch);
    }
    let rows = transition_rows(map, cells);
    let edges = uniform_edges(map.domain(), cells);
    let v: Vec<f64> = (0..cells).map(|i| p.mass_of(edges[i], edges[i + 1])).collect();
    let mut next = vec![0.0; cells];
    for (i, row) in rows.iter().enumerate() {
        for &(j, w) in row {
            next[j as usize] += v[i] * w;
        }
    }
    Ok(crate::sum::sum(next.iter().zip(&v).map(|(a, b)| (a - b).abs())))
}
