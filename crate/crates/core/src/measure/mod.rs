//! Invariant density estimates and their L1 distances.

mod birkhoff;
mod tower;
mod ulam;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use birkhoff::{birkhoff_density, birkhoff_density_from, BirkhoffJob, SeedHistogram};
pub use tower::{tower_density, tower_density_with, TowerParams};
pub use ulam::{invariance_residual, transition_rows, ulam_density, ulam_density_with, UlamParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Birkhoff,
    Ulam,
    Tower,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DensityMeta {
    /// Orbit points, matrix size or branch count, depending on the method.
    pub size: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Orbits restarted after landing exactly on a critical or fixed point.
    pub restarts: u64,
    /// Residual share of the inducing domain left out of a tower estimate.
    pub residual_fraction: f64,
    /// Set when the estimate is known to be approximate.
    pub approximate: bool,
    /// Total mass before normalisation, without `closure_mass`.
    pub raw_mass: f64,
    /// Mass added by following residual pieces of a tower estimate.
    pub closure_mass: f64,
    /// Power iteration steps or similar.
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
    pub method: Method,
    pub meta: DensityMeta,
}

impl DensityEstimate {
    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.edges[0], self.edges[self.edges.len() - 1])
    }

    /// Density value on bin `k`.
    pub fn density(&self, k: usize) -> f64 {
        self.masses[k] / (self.edges[k + 1] - self.edges[k])
    }

    /// Mass of `[a, b]`, assuming the density is constant on each bin.
    pub fn mass_of(&self, a: f64, b: f64) -> f64 {
        let mut m = 0.0;
        for k in 0..self.bins() {
            let (l, r) = (self.edges[k].max(a), self.edges[k + 1].min(b));
            if r > l {
                m += self.density(k) * (r - l);
            }
        }
        m
    }
}

/// `bins + 1` equally spaced edges whose ends are exactly the domain ends.
pub fn uniform_edges(domain: (f64, f64), bins: usize) -> Vec<f64> {
    let (a, b) = domain;
    let h = (b - a) / bins as f64;
    (0..=bins).map(|k| if k == bins { b } else { a + k as f64 * h }).collect()
}

/// Bin of `x` on uniform edges, clamped to the grid.
#[inline]
pub(crate) fn uniform_bin(domain: (f64, f64), bins: usize, x: f64) -> usize {
    let t = (x - domain.0) / (domain.1 - domain.0) * bins as f64;
    if t <= 0.0 {
        0
    } else {
        (t as usize).min(bins - 1)
    }
}

/// Normalises masses to sum to one (compensated).
pub(crate) fn normalise(masses: &mut [f64]) -> f64 {
    let total = crate::sum::sum(masses.iter().copied());
    if total > 0.0 {
        for m in masses.iter_mut() {
            *m /= total;
        }
    }
    total
}

/// L1 distance between two piecewise-constant densities on the common
/// refinement of their grids.
pub fn l1_distance(p: &DensityEstimate, q: &DensityEstimate) -> Result<f64> {
    let (pa, pb) = p.domain();
    let (qa, qb) = q.domain();
    let tol = 1e-12 * (pb - pa).abs().max(1.0);
    if (pa - qa).abs() > tol || (pb - qb).abs() > tol {
        return Err(Error::DomainMismatch);
    }
    let (mut i, mut j) = (0usize, 0usize);
    let mut x = pa;
    let mut acc = crate::sum::NeumaierSum::new();
    while i < p.bins() && j < q.bins() {
        let r = p.edges[i + 1].min(q.edges[j + 1]);
        if r > x {
            acc.add((p.density(i) - q.density(j)).abs() * (r - x));
            x = r;
        }
        if p.edges[i + 1] <= r {
            i += 1;
        }
        if q.edges[j + 1] <= r {
            j += 1;
        }
    }
    Ok(acc.value())
}
