use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{normalise, uniform_bin, uniform_edges, DensityEstimate, DensityMeta, Method};
use crate::error::{Error, Result};
use crate::map_model::IntervalMap;

/// Restarts allowed per seed before the orbit is declared degenerate.
const MAX_RESTARTS: u64 = 1000;

/// Histogram of `n_iter` orbit points per seed after `burn_in` steps, averaged
/// over `n_seeds` uniformly drawn initial points. Seed `k` uses stream `k` of
/// the generator keyed by `seed`.
pub fn birkhoff_density(
    map: &IntervalMap,
    n_iter: u64,
    burn_in: u64,
    n_seeds: usize,
    bins: usize,
    seed: u64,
) -> Result<DensityEstimate> {
    birkhoff_density_from(map, map.domain(), n_iter, burn_in, n_seeds, bins, seed)
}

/// As [`birkhoff_density`], with initial points drawn from `start` instead of
/// the whole domain.
pub fn birkhoff_density_from(
    map: &IntervalMap,
    start: (f64, f64),
    n_iter: u64,
    burn_in: u64,
    n_seeds: usize,
    bins: usize,
    seed: u64,
) -> Result<DensityEstimate> {
    let job = BirkhoffJob { start, n_iter, burn_in, n_seeds, bins, seed };
    job.validate(map)?;
    let hists: Vec<SeedHistogram> = (0..n_seeds).map(|k| job.seed_histogram(map, k)).collect();
    job.finish(map, &hists)
}

/// A Birkhoff run split into independent per-seed pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirkhoffJob {
    pub start: (f64, f64),
    pub n_iter: u64,
    pub burn_in: u64,
    pub n_seeds: usize,
    pub bins: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedHistogram {
    pub counts: Vec<u64>,
    pub restarts: u64,
    pub degenerate: bool,
}

impl BirkhoffJob {
    pub fn validate(&self, map: &IntervalMap) -> Result<()> {
        let (a, b) = self.start;
        if self.bins < 2 || self.n_seeds == 0 || self.n_iter == 0 || !(a < b) || !map.contains(a) || !map.contains(b) {
            return Err(Error::InvalidParameter(
                "birkhoff needs bins >= 2, seeds >= 1, n_iter >= 1 and a start interval inside the domain".into(),
            ));
        }
        Ok(())
    }

    /// Orbit of seed `k`, drawn from stream `k` of the generator keyed by
    /// `seed`.
    pub fn seed_histogram(&self, map: &IntervalMap, k: usize) -> SeedHistogram {
        let dom = map.domain();
        let start = self.start;
        let mut counts = vec![0u64; self.bins];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        let draw = |rng: &mut ChaCha8Rng| start.0 + (start.1 - start.0) * rng.random::<f64>();
        let mut x = draw(&mut rng);
        let mut restarts = 0u64;
        let mut done = 0u64;
        let mut step = 0u64;
        let crit = map.critical_locations();
        while done < self.n_iter {
            let y = map.step(x);
            // exact hits of a critical point or a fixed point freeze floating
            // point orbits
            if y == x || crit.contains(&y) || !y.is_finite() {
                restarts += 1;
                if restarts > MAX_RESTARTS {
                    return SeedHistogram { counts, restarts, degenerate: true };
                }
                x = draw(&mut rng);
                continue;
            }
            x = y;
            step += 1;
            if step > self.burn_in {
                counts[uniform_bin(dom, self.bins, x)] += 1;
                done += 1;
            }
        }
        SeedHistogram { counts, restarts, degenerate: false }
    }

    /// Merges per-seed histograms given in seed order.
    pub fn finish(&self, map: &IntervalMap, hists: &[SeedHistogram]) -> Result<DensityEstimate> {
        if hists.iter().all(|h| h.degenerate) {
            return Err(Error::AllOrbitsDegenerate);
        }
        let mut counts = vec![0u64; self.bins];
        for h in hists {
            for (c, x) in counts.iter_mut().zip(&h.counts) {
                *c += x;
            }
        }
        let mut masses: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let raw = normalise(&mut masses);
        Ok(DensityEstimate {
            edges: uniform_edges(map.domain(), self.bins),
            masses,
            method: Method::Birkhoff,
            meta: DensityMeta {
                size: raw as u64,
                burn_in: self.burn_in,
                seed: self.seed,
                restarts: hists.iter().map(|h| h.restarts).sum(),
                raw_mass: raw,
                approximate: hists.iter().any(|h| h.degenerate),
                ..Default::default()
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::families::make_builtin_family;

    #[test]
    fn masses_sum_to_one_and_are_reproducible() {
        let m = make_builtin_family("chebyshev", &[]).unwrap();
        let a = birkhoff_density(&m, 20_000, 100, 2, 32, 9).unwrap();
        let b = birkhoff_density(&m, 20_000, 100, 2, 32, 9).unwrap();
        assert_eq!(a, b);
        let s: f64 = a.masses.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(a.meta.size, 40_000);
    }

    #[test]
    fn identity_is_degenerate() {
        let m = make_builtin_family("identity", &[]).unwrap();
        assert_eq!(birkhoff_density(&m, 1000, 0, 3, 16, 1), Err(Error::AllOrbitsDegenerate));
    }

    #[test]
    fn chebyshev_orbit_follows_the_arcsine_law() {
        let m = make_builtin_family("chebyshev", &[]).unwrap();
        let d = birkhoff_density(&m, 1_000_000, 1000, 1, 50, 2).unwrap();
        let l1: f64 = (0..50)
            .map(|k| {
                let (a, b) = (d.edges[k], d.edges[k + 1]);
                let exact = (crate::fmath::asin(b) - crate::fmath::asin(a)) / core::f64::consts::PI;
                (d.masses[k] - exact).abs()
            })
            .sum();
        assert!(l1 < 0.02, "{l1}");
    }

    #[test]
    fn chebyshev_estimate_is_nearly_invariant() {
        // on coarser grids the exact arcsine masses themselves miss by more
        let m = make_builtin_family("chebyshev", &[]).unwrap();
        let d = birkhoff_density(&m, 4_000_000, 1000, 1, 512, 2).unwrap();
        let r = crate::measure::invariance_residual(&m, &d, 512).unwrap();
        assert!(r <= 0.05, "{r}");
    }

    #[test]
    fn seeds_are_independent_streams() {
        let m = make_builtin_family("lorenz_singular", &[]).unwrap();
        let job = BirkhoffJob { start: m.domain(), n_iter: 5000, burn_in: 10, n_seeds: 3, bins: 20, seed: 4 };
        let h: Vec<_> = (0..3).map(|k| job.seed_histogram(&m, k)).collect();
        assert_ne!(h[0].counts, h[1].counts);
        // order of evaluation does not matter
        let rev: Vec<_> = (0..3).rev().map(|k| job.seed_histogram(&m, k)).rev().collect();
        assert_eq!(job.finish(&m, &h).unwrap(), job.finish(&m, &rev).unwrap());
    }
}
