//! Registry of builtin families.
//!
//! | family             | domain  | parameters (box, default)                                   |
//! |--------------------|---------|-------------------------------------------------------------|
//! | `chebyshev`        | [-1, 1] | none                                                        |
//! | `quadratic`        | [-1, 1] | a in [0.5, 2] (2), center in [-0.25, 0.25] (0)              |
//! | `lorenz_singular`  | [-1, 1] | a in [1.5, 2] (2), ell in [0.5, 0.95] (0.75)                |
//! | `lorenz_crit_sing` | [-1, 1] | b in [0.2, 0.8] (0.5), ell_s in [0.3, 0.95] (0.6), ell_c in [1.5, 3] (2) |
//! | `two_component`    | [-1, 1] | none                                                        |
//! | `identity`         | [-1, 1] | none                                                        |

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{Branch, CriticalPointSpec, IntervalMap, Shape, Side};
use crate::error::{Error, Result};
use crate::fmath::{ln, powf};

pub const FAMILIES: &[&str] =
    &["chebyshev", "quadratic", "lorenz_singular", "lorenz_crit_sing", "two_component", "identity"];

struct ParamBox {
    name: &'static str,
    lo: f64,
    hi: f64,
    default: f64,
}

const fn pb(name: &'static str, lo: f64, hi: f64, default: f64) -> ParamBox {
    ParamBox { name, lo, hi, default }
}

fn param_boxes(name: &str) -> Option<&'static [ParamBox]> {
    const QUAD: &[ParamBox] = &[pb("a", 0.5, 2.0, 2.0), pb("center", -0.25, 0.25, 0.0)];
    const LORENZ: &[ParamBox] = &[pb("a", 1.5, 2.0, 2.0), pb("ell", 0.5, 0.95, 0.75)];
    const CRIT_SING: &[ParamBox] = &[pb("b", 0.2, 0.8, 0.5), pb("ell_s", 0.3, 0.95, 0.6), pb("ell_c", 1.5, 3.0, 2.0)];
    match name {
        "chebyshev" | "two_component" | "identity" => Some(&[]),
        "quadratic" => Some(QUAD),
        "lorenz_singular" => Some(LORENZ),
        "lorenz_crit_sing" => Some(CRIT_SING),
        _ => None,
    }
}

fn resolve_params(name: &str, given: &[(&str, f64)]) -> Result<Vec<(String, f64)>> {
    let boxes = param_boxes(name).ok_or_else(|| Error::UnknownFamily(name.to_string()))?;
    for (k, _) in given {
        if !boxes.iter().any(|b| b.name == *k) {
            return Err(Error::UnknownParam(k.to_string()));
        }
    }
    boxes
        .iter()
        .map(|b| {
            let v = given.iter().rev().find(|(k, _)| *k == b.name).map_or(b.default, |&(_, v)| v);
            if !(v >= b.lo && v <= b.hi) {
                return Err(Error::ParamOutOfRange { name: b.name.to_string(), value: v, lo: b.lo, hi: b.hi });
            }
            Ok((b.name.to_string(), v))
        })
        .collect()
}

fn get(params: &[(String, f64)], k: &str) -> f64 {
    params.iter().find(|(n, _)| n == k).map(|&(_, v)| v).unwrap()
}

/// Builds a registered family and certifies the non-degeneracy sandwich of each
/// critical spec on a 1024-point one-sided grid.
pub fn make_builtin_family(name: &str, params: &[(&str, f64)]) -> Result<IntervalMap> {
    let p = resolve_params(name, params)?;
    let (map, c_max) = match name {
        "chebyshev" => (quadratic_map("chebyshev", 2.0, 0.0, p)?, 16.0),
        "quadratic" => {
            let (a, c) = (get(&p, "a"), get(&p, "center"));
            (quadratic_map("quadratic", a, c, p)?, 16.0)
        }
        "lorenz_singular" => {
            let (a, ell) = (get(&p, "a"), get(&p, "ell"));
            (lorenz_singular(a, ell, p)?, 16.0)
        }
        "lorenz_crit_sing" => {
            let (b, ls, lc) = (get(&p, "b"), get(&p, "ell_s"), get(&p, "ell_c"));
            (lorenz_crit_sing(b, ls, lc, p)?, 1000.0)
        }
        "two_component" => (two_component()?, 16.0),
        "identity" => {
            let br = Branch::new(-1.0, 1.0, 1, Shape::Affine { slope: 1.0, offset: 0.0 });
            (IntervalMap::new((-1.0, 1.0), vec![br], vec![], None, "identity", p)?, 1.0)
        }
        _ => return Err(Error::UnknownFamily(name.to_string())),
    };
    let mut map = map;
    for i in 0..map.critical.len() {
        let (needed, x) = nondegeneracy_needed(&map, i, 1024);
        if !(needed <= c_max) {
            return Err(Error::NondegeneracyCheckFailed { spec: i, x, needed, allowed: c_max });
        }
        map.critical[i].nondegeneracy_constant = c_max;
    }
    Ok(map)
}

/// Smallest constant `C` for which the three ratio bounds hold on a geometric
/// one-sided grid of `n` points, together with the worst grid point.
pub fn nondegeneracy_needed(map: &IntervalMap, spec: usize, n: usize) -> (f64, f64) {
    let s = &map.critical[spec];
    let br = &map.branches[map.branch_index(s.location, Some(s.side)).unwrap()];
    let l = s.order;
    let (mut worst, mut worst_x) = (0.0f64, s.location);
    for i in 0..n {
        let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 1.0 };
        let d = s.neighborhood_radius * powf(1e-8, 1.0 - frac);
        let x = s.location + s.side.sign() * d;
        let ld = ln(d);
        let r0 = ln(br.increment(s.location, s.side.sign() * d).abs()) - l * ld;
        let r1 = br.log_abs_deriv(x) - (l - 1.0) * ld;
        let r2 = ln(br.second_deriv(x).abs()) - (l - 2.0) * ld;
        for r in [r0, r1, r2] {
            let r = if r.is_nan() { f64::INFINITY } else { r.abs() };
            if r > worst {
                worst = r;
                worst_x = x;
            }
        }
    }
    (crate::fmath::exp(worst), worst_x)
}

fn quadratic_map(tag: &str, a: f64, center: f64, params: Vec<(String, f64)>) -> Result<IntervalMap> {
    let scale = 1.0 + center.abs();
    let left = Branch::new(-1.0, center, 1, Shape::Quadratic { a, center, scale, right: false });
    let right = Branch::new(center, 1.0, -1, Shape::Quadratic { a, center, scale, right: true });
    let r = 0.5 * (1.0 - center.abs());
    let specs = vec![
        CriticalPointSpec::new(center, Side::Left, 2.0, 1.0, r),
        CriticalPointSpec::new(center, Side::Right, 2.0, 1.0, r),
    ];
    IntervalMap::new((-1.0, 1.0), vec![left, right], specs, Some(1), tag, params)
}

fn lorenz_singular(a: f64, ell: f64, params: Vec<(String, f64)>) -> Result<IntervalMap> {
    let left = Branch::new(-1.0, 0.0, 1, Shape::Power { x0: 0.0, s: -1.0, q: -a, p: 1.0, ell });
    let right = Branch::new(0.0, 1.0, 1, Shape::Power { x0: 0.0, s: 1.0, q: a, p: -1.0, ell });
    let specs = vec![
        CriticalPointSpec::new(0.0, Side::Left, ell, 1.0, 0.5),
        CriticalPointSpec::new(0.0, Side::Right, ell, 1.0, 0.5),
    ];
    IntervalMap::new((-1.0, 1.0), vec![left, right], specs, Some(1), "lorenz_singular", params)
}

/// Critical point of order `ell_c` at `+-q`, `q = b^(1/ell_s)`, singularity of
/// order `ell_s` at 0; odd symmetry `f(-x) = -f(x)`.
fn lorenz_crit_sing(b: f64, ell_s: f64, ell_c: f64, params: Vec<(String, f64)>) -> Result<IntervalMap> {
    let q = powf(b, 1.0 / ell_s);
    let cs = |outer, mirror| Shape::CritSing { b, ell_s, ell_c, outer, mirror };
    let branches = vec![
        Branch::new(-1.0, -q, -1, cs(true, true)),
        Branch::new(-q, 0.0, 1, cs(false, true)),
        Branch::new(0.0, q, 1, cs(false, false)),
        Branch::new(q, 1.0, -1, cs(true, false)),
    ];
    let r = 0.5 * q.min(1.0 - q);
    let mut specs = Vec::new();
    for loc in [-q, 0.0, q] {
        let order = if loc == 0.0 { ell_s } else { ell_c };
        for side in [Side::Left, Side::Right] {
            specs.push(CriticalPointSpec::new(loc, side, order, 1.0, r));
        }
    }
    IntervalMap::new((-1.0, 1.0), branches, specs, Some(3), "lorenz_crit_sing", params)
}

/// Two invariant halves `[-1, 0]` and `[0, 1]`: the middle branch is
/// `sin(pi x)` and the outer branches are `+-(|2x| - 1)^(3/4)`. Singular points
/// of order 3/4 face outwards at `+-1/2`; the inner sides are quadratic.
fn two_component() -> Result<IntervalMap> {
    let l = 0.75;
    let k = powf(2.0, l);
    let branches = vec![
        Branch::new(-1.0, -0.5, 1, Shape::Power { x0: -0.5, s: -1.0, q: -k, p: 0.0, ell: l }),
        Branch::new(-0.5, 0.5, 1, Shape::Sine),
        Branch::new(0.5, 1.0, 1, Shape::Power { x0: 0.5, s: 1.0, q: k, p: 0.0, ell: l }),
    ];
    let specs = vec![
        CriticalPointSpec::new(-0.5, Side::Left, l, 1.0, 0.25),
        CriticalPointSpec::new(-0.5, Side::Right, 2.0, 1.0, 0.25),
        CriticalPointSpec::new(0.5, Side::Left, 2.0, 1.0, 0.25),
        CriticalPointSpec::new(0.5, Side::Right, l, 1.0, 0.25),
    ];
    IntervalMap::new((-1.0, 1.0), branches, specs, Some(3), "two_component", Vec::new())
}

/// `x -> m x mod 1` on `[0, 1]` with `m` full affine branches. Not a member of
/// the map class (its break points have order 1); used as a test fixture.
pub fn affine_full(m: usize) -> IntervalMap {
    let mf = m as f64;
    let branches = (0..m)
        .map(|k| {
            let (lo, hi) = (k as f64 / mf, (k + 1) as f64 / mf);
            Branch::new(lo, hi, 1, Shape::Affine { slope: mf, offset: -(k as f64) })
        })
        .collect();
    let mut specs = Vec::new();
    for k in 1..m {
        for side in [Side::Left, Side::Right] {
            specs.push(CriticalPointSpec::new(k as f64 / mf, side, 1.0, 1.0, 0.5 / mf));
        }
    }
    IntervalMap::new((0.0, 1.0), branches, specs, None, format!("affine_full_{m}"), Vec::new())
        .expect("affine fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_family_builds_with_defaults() {
        for name in FAMILIES {
            let f = make_builtin_family(name, &[]).unwrap();
            assert_eq!(f.family(), *name);
        }
    }

    #[test]
    fn registry_errors() {
        assert!(matches!(make_builtin_family("tent", &[]), Err(Error::UnknownFamily(_))));
        assert!(matches!(make_builtin_family("lorenz_singular", &[("a", 2.5)]), Err(Error::ParamOutOfRange { .. })));
        assert!(matches!(make_builtin_family("chebyshev", &[("a", 2.0)]), Err(Error::UnknownParam(_))));
    }

    #[test]
    fn sandwich_holds_with_stored_constant() {
        for name in FAMILIES {
            let f = make_builtin_family(name, &[]).unwrap();
            for (i, c) in f.critical_points().iter().enumerate() {
                let (needed, _) = nondegeneracy_needed(&f, i, 1024);
                assert!(needed <= c.nondegeneracy_constant, "{name} spec {i}: {needed}");
            }
        }
    }

    #[test]
    fn sandwich_brute_force_for_lorenz() {
        // |f'(x)| = (3/2)|x|^(-1/4) exactly, so the derivative ratio is 3/2.
        let f = make_builtin_family("lorenz_singular", &[]).unwrap();
        for i in 1..1024 {
            let x = 0.5 * i as f64 / 1024.0;
            let r = f.derivative(x, None).unwrap() / x.powf(-0.25);
            assert!((r - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn chebyshev_shape() {
        let f = make_builtin_family("chebyshev", &[]).unwrap();
        assert_eq!(f.branches().len(), 2);
        assert_eq!(f.branches()[0].sign, 1);
        assert_eq!(f.branches()[1].sign, -1);
        for c in f.critical_points() {
            assert_eq!((c.location, c.order), (0.0, 2.0));
        }
        for i in 0..=100 {
            let x = -1.0 + 0.02 * i as f64;
            assert!((f.step(x) - (1.0 - 2.0 * x * x)).abs() < 1e-15);
        }
    }

    #[test]
    fn lorenz_minimum_derivative_at_endpoints() {
        let f = make_builtin_family("lorenz_singular", &[]).unwrap();
        let min = (1..=1000).map(|i| f.derivative(i as f64 / 1000.0, None).unwrap()).fold(f64::INFINITY, f64::min);
        assert!((min - 1.5).abs() < 1e-12);
    }

    #[test]
    fn crit_sing_structure() {
        let f = make_builtin_family("lorenz_crit_sing", &[]).unwrap();
        let q = 0.5f64.powf(1.0 / 0.6);
        assert_eq!(f.branches().len(), 4);
        assert_eq!(f.critical_points().len(), 6);
        assert!((f.eval(q, Some(Side::Right)).unwrap() - 1.0).abs() < 1e-15);
        assert!((f.eval(0.0, Some(Side::Right)).unwrap() + 1.0).abs() < 1e-15);
        assert!((f.eval(0.0, Some(Side::Left)).unwrap() - 1.0).abs() < 1e-15);
        assert!((f.eval(1.0, None).unwrap() + 1.0).abs() < 1e-15);
        // odd symmetry
        for i in 1..100 {
            let x = i as f64 / 100.0;
            if (x - q).abs() > 1e-9 {
                assert!((f.step(x) + f.step(-x)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn two_component_halves_are_invariant() {
        let f = make_builtin_family("two_component", &[]).unwrap();
        for i in 0..=400 {
            let x = -1.0 + 2.0 * i as f64 / 400.0;
            let y = f.step(x);
            assert!(x == 0.0 || (x > 0.0) == (y >= 0.0), "{x} -> {y}");
        }
    }

    #[test]
    fn affine_fixture() {
        let f = affine_full(3);
        assert!((f.step(0.5) - 0.5).abs() < 1e-15);
        assert!((f.step(0.2) - 0.6).abs() < 1e-15);
    }
}
