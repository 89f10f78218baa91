//! One function per subcommand. Each writes its artifacts and returns a short
//! human summary.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use inducer_core::inducing::{
    branch_distortion_at, branch_expansion_at, distortion_report, expansion_report, tail_statistics, InducedMap,
    Induction, ResidualReason, TailStats,
};
use inducer_core::map_model::{check_h1, check_h2, check_h3, map_distance, HypothesisReport, IntervalMap};
use inducer_core::measure::{
    invariance_residual, tower_density_with, ulam_density, DensityEstimate, SeedHistogram, TowerParams,
};
use inducer_core::partition::{binding_table, build_critical_partition};
use inducer_core::stability::{
    cloud_density, entry_fraction, level_set_overlap, scale_medians, sort_offsets, spearman, stability_reference,
    stability_row, summarize_tail_scan, tail_point, uniqueness_from_clouds, CurveBudgets, DensityMethod, Reference,
    StabilityRow,
};

use crate::config::{family_map, MethodName, RunConfig};
use crate::output::{fmt_f64, fmt_opt, Artifacts};

/// A domain error together with where it came from.
#[derive(Debug)]
pub struct CmdError {
    pub module: &'static str,
    pub op: &'static str,
    pub kind: CmdErrorKind,
}

#[derive(Debug)]
pub enum CmdErrorKind {
    Domain(inducer_core::Error),
    Io(std::io::Error),
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CmdErrorKind::Domain(e) => write!(f, "{}::{}: {e}", self.module, self.op),
            CmdErrorKind::Io(e) => write!(f, "{}::{}: i/o error: {e}", self.module, self.op),
        }
    }
}

impl std::error::Error for CmdError {}

fn at(module: &'static str, op: &'static str) -> impl Fn(inducer_core::Error) -> CmdError {
    move |e| CmdError { module, op, kind: CmdErrorKind::Domain(e) }
}

fn io(e: std::io::Error) -> CmdError {
    CmdError { module: "cli-frontend", op: "write_artifacts", kind: CmdErrorKind::Io(e) }
}

pub type CmdResult = Result<String, CmdError>;

fn base_map(cfg: &RunConfig) -> Result<IntervalMap, CmdError> {
    cfg.map().map_err(at("map-model", "make_builtin_family"))
}

#[derive(Serialize)]
struct HypothesesOut<'a> {
    family: &'a str,
    params: &'a std::collections::BTreeMap<String, f64>,
    h1: HypothesisReport,
    h2: HypothesisReport,
    h3: Option<HypothesisReport>,
}

pub fn hypotheses(cfg: &RunConfig, out: &mut Artifacts) -> CmdResult {
    let map = base_map(cfg)?;
    let c = &cfg.checks;
    let h1 =
        check_h1(&map, &cfg.hypotheses, c.h1_samples, c.h1_horizon, cfg.seed).map_err(at("map-model", "check_h1"))?;
    let h2 = check_h2(&map, &cfg.hypotheses, c.h2_horizon).map_err(at("map-model", "check_h2"))?;
    let h3 = match map.star() {
        Some(_) => Some(check_h3(&map, c.h3_depth, c.h3_eps).map_err(at("map-model", "check_h3"))?),
        None => None,
    };
    let summary = format!(
        "H1 {:?}  H2 {:?}  H3 {}",
        h1.verdict,
        h2.verdict,
        h3.as_ref().map_or("n/a".to_string(), |h| format!("{:?}", h.verdict))
    );
    out.write_json("hypotheses.json", &HypothesesOut { family: &cfg.family, params: &cfg.params, h1, h2, h3 })
        .map_err(io)?;
    Ok(summary)
}

pub fn partition(cfg: &RunConfig, out: &mut Artifacts) -> CmdResult {
    let map = base_map(cfg)?;
    let p = &cfg.partition;
    let part = build_critical_partition(&map, &cfg.hypotheses, p.r_max)
        .map_err(at("partition-engine", "build_critical_partition"))?;
    let bind = binding_table(&map, &part, &cfg.hypotheses, p.binding_k_max, p.binding_samples);
    out.write_csv(
        "partition.csv",
        &["spec_index", "r", "j", "left", "right"],
        part.cells()
            .map(|c| vec![c.spec.to_string(), c.r.to_string(), c.j.to_string(), fmt_f64(c.left), fmt_f64(c.right)]),
    )
    .map_err(io)?;
    out.write_csv(
        "binding.csv",
        &["spec_index", "r", "p", "truncated"],
        bind.entries
            .iter()
            .map(|e| vec![e.spec.to_string(), e.r.to_string(), e.p.to_string(), e.truncated.to_string()]),
    )
    .map_err(io)?;
    #[derive(Serialize)]
    struct Both<'a> {
        partition: &'a inducer_core::partition::CriticalPartition,
        binding: &'a inducer_core::partition::BindingTable,
    }
    out.write_json("partition.json", &Both { partition: &part, binding: &bind }).map_err(io)?;
    let truncated = bind.entries.iter().filter(|e| e.truncated).count();
    Ok(format!("{} cells, {} binding entries ({} truncated)", part.cell_count(), bind.entries.len(), truncated))
}

fn induce_map(cfg: &RunConfig, map: &IntervalMap) -> Result<Induction, CmdError> {
    cfg.pipeline().run(map).map_err(at("inducing-scheme", "build_induced_map"))
}

#[derive(Serialize)]
struct InducedSummary {
    delta_star: (f64, f64),
    domain_mass: f64,
    branches: usize,
    covered_mass: f64,
    covered_fraction: f64,
    residual_mass: f64,
    residual_by_reason: Vec<(ResidualReason, f64)>,
    conservation_error: f64,
    budget_exhausted: bool,
    max_return_time: u32,
    mean_return_time: f64,
    sigma_est: f64,
    min_deriv: f64,
    d_hat: f64,
    bd3_ratio_max: f64,
    stats: inducer_core::inducing::InducedStats,
}

/// Per-branch `min_deriv` and `distortion`, plus the two reports, computed in
/// parallel with the same streams as the sequential diagnostics.
fn diagnose(cfg: &RunConfig, map: &IntervalMap, induced: &mut InducedMap) -> (f64, f64, f64, f64) {
    let base = induced.delta_star;
    let d = cfg.diagnostics;
    let seed = cfg.seed;
    let per: Vec<_> = induced
        .branches
        .par_iter()
        .enumerate()
        .map(|(rank, b)| {
            (
                branch_expansion_at(map, base, b, d.samples, seed, rank),
                branch_distortion_at(map, base, b, d.pair_samples, seed, rank),
            )
        })
        .collect();
    for (b, (e, dd)) in induced.branches.iter_mut().zip(&per) {
        b.min_deriv = e.min_deriv;
        b.distortion = dd.d_hat;
    }
    let exp: Vec<_> = per.iter().map(|p| p.0).collect();
    let dis: Vec<_> = per.iter().map(|p| p.1).collect();
    let er = expansion_report(&exp, d.samples);
    let dr = distortion_report(&dis, d.pair_samples);
    (er.sigma_est, er.min_deriv, dr.d_hat, dr.bd3_ratio_max)
}

fn write_tail(out: &mut Artifacts, t: &TailStats) -> std::io::Result<()> {
    let mut rows = Vec::new();
    for (n, &m) in t.counts.iter().enumerate() {
        if t.strata.is_empty() {
            rows.push(vec![n.to_string(), fmt_f64(m), String::new(), String::new()]);
        }
        for (s, st) in t.strata.iter().enumerate() {
            if st[n] > 0.0 {
                rows.push(vec![n.to_string(), fmt_f64(m), s.to_string(), fmt_f64(st[n])]);
            }
        }
    }
    out.write_csv("tail.csv", &["n", "mass_T_gt_n", "stratum_s", "stratum_mass"], rows)
}

#[derive(Serialize)]
struct TailFit {
    c: f64,
    gamma: f64,
    r_squared: f64,
    fit_window: (u32, u32),
    gamma_positive: bool,
    residual_mass: f64,
}

fn tail_fit(t: &TailStats) -> TailFit {
    TailFit {
        c: t.c,
        gamma: t.gamma,
        r_squared: t.r_squared,
        fit_window: t.fit_window,
        gamma_positive: t.gamma_positive,
        residual_mass: t.residual_mass,
    }
}

pub fn induce(cfg: &RunConfig, out: &mut Artifacts) -> CmdResult {
    let map = base_map(cfg)?;
    let mut ind = induce_map(cfg, &map)?;
    let induced = &mut ind.induced;
    let (sigma_est, min_deriv, d_hat, bd3_ratio_max) = diagnose(cfg, &map, induced);
    out.write_csv(
        "induced.csv",
        &["branch_id", "left", "right", "T", "E", "t0", "min_deriv", "distortion_stat"],
        induced.branches.iter().enumerate().map(|(i, b)| {
            vec![
                i.to_string(),
                fmt_f64(b.left),
                fmt_f64(b.right),
                b.return_time.to_string(),
                b.escape_time.to_string(),
                b.t0.to_string(),
                fmt_f64(b.min_deriv),
                fmt_f64(b.distortion),
            ]
        }),
    )
    .map_err(io)?;
    out.write_csv(
        "residual.csv",
        &["left", "right", "reason", "time"],
        induced
            .residual
            .iter()
            .map(|r| vec![fmt_f64(r.left), fmt_f64(r.right), format!("{:?}", r.reason), r.time.to_string()]),
    )
    .map_err(io)?;
    #[derive(Serialize)]
    struct Line<'a> {
        branch_id: usize,
        events: &'a [inducer_core::inducing::ItineraryEvent],
    }
    out.write_jsonl(
        "itinerary.jsonl",
        induced.branches.iter().enumerate().map(|(i, b)| Line { branch_id: i, events: &b.itinerary }),
    )
    .map_err(io)?;
    let tail = tail_statistics(induced, cfg.inducing.n_max, cfg.diagnostics.stratify);
    match &tail {
        Ok(t) => {
            write_tail(out, t).map_err(io)?;
            out.write_json("tail_fit.json", &tail_fit(t)).map_err(io)?;
        }
        Err(inducer_core::Error::InsufficientData { .. }) => {}
        Err(e) => return Err(at("inducing-scheme", "tail_statistics")(e.clone())),
    }
    let mut by_reason: Vec<(ResidualReason, f64)> = Vec::new();
    for r in &induced.residual {
        match by_reason.iter_mut().find(|e| e.0 == r.reason) {
            Some(e) => e.1 += r.right - r.left,
            None => by_reason.push((r.reason, r.right - r.left)),
        }
    }
    let n = induced.branches.len();
    let summary = InducedSummary {
        delta_star: induced.delta_star,
        domain_mass: induced.domain_mass,
        branches: n,
        covered_mass: induced.covered_mass,
        covered_fraction: induced.covered_mass / induced.domain_mass,
        residual_mass: induced.residual_mass,
        residual_by_reason: by_reason,
        conservation_error: (induced.covered_mass + induced.residual_mass - induced.domain_mass).abs(),
        budget_exhausted: induced.budget_exhausted,
        max_return_time: induced.branches.iter().map(|b| b.return_time).max().unwrap_or(0),
        mean_return_time: if induced.covered_mass > 0.0 {
            induced.branches.iter().map(|b| b.return_time as f64 * b.width()).sum::<f64>() / induced.covered_mass
        } else {
            0.0
        },
        sigma_est,
        min_deriv,
        d_hat,
        bd3_ratio_max,
        stats: induced.stats.clone(),
    };
    out.write_json("induced.json", &summary).map_err(io)?;
    let tail_note = match tail {
        Ok(t) => format!("gamma {:.4} (R^2 {:.3})", t.gamma, t.r_squared),
        Err(e) => format!("no tail fit: {e}"),
    };
    Ok(format!(
        "{n} branches, covered {:.4} of the base interval, sigma_est {:.4}, d_hat {:.4}, {tail_note}",
        summary.covered_fraction, sigma_est, d_hat
    ))
}

pub fn tail(cfg: &RunConfig, out: &mut Artifacts) -> CmdResult {
    let map = base_map(cfg)?;
    let ind = induce_map(cfg, &map)?;
    let t = tail_statistics(&ind.induced, cfg.inducing.n_max, cfg.diagnostics.stratify)
        .map_err(at("inducing-scheme", "tail_statistics"))?;
    write_tail(out, &t).map_err(io)?;
    out.write_json("tail_fit.json", &tail_fit(&t)).map_err(io)?;
    Ok(format!("C {:.4}  gamma {:.4}  R^2 {:.4}  window {:?}", t.c, t.gamma, t.r_squared, t.fit_window))
}

/// Density by the configured method, parallel over Birkhoff seeds.
pub fn density_of(cfg: &RunConfig, map: &IntervalMap) -> Result<DensityEstimate, CmdError> {
    let m = &cfg.measure;
    match m.method {
        MethodName::Ulam => ulam_density(map, m.cells).map_err(at("measure-lab", "ulam_density")),
        MethodName::Birkhoff => {
            let job = cfg.birkhoff_job(map);
            job.validate(map).map_err(at("measure-lab", "birkhoff_density"))?;
            let hists: Vec<SeedHistogram> =
                (0..job.n_seeds).into_par_iter().map(|k| job.seed_histogram(map, k)).collect();
            job.finish(map, &hists).map_err(at("measure-lab", "birkhoff_density"))
        }
        MethodName::Tower => {
            let ind = induce_map(cfg, map)?;
            tower_density_with(map, &ind.induced, m.bins, &TowerParams { follow_residual: m.follow_residual })
                .map_err(at("measure-lab", "tower_density"))
        }
    }
}

pub fn density(cfg: &RunConfig, out: &mut Artifacts) -> CmdResult {
    let map = base_map(cfg)?;
    let d = density_of(cfg, &map)?;
    let tag = format!("{:?}", d.method).to_lowercase();
    let size = match cfg.measure.method {
        MethodName::Birkhoff => cfg.measure.n_iter * cfg.measure.n_seeds as u64,
        MethodName::Ulam => cfg.measure.cells as u64,
        MethodName::Tower => d.meta.size,
    };
    out.write_csv(
        "density.csv",
        &["bin_left", "bin_right", "mass", "method", "size", "seed"],
        (0..d.bins()).map(|k| {
            vec![
                fmt_f64(d.edges[k]),
                fmt_f64(d.edges[k + 1]),
                fmt_f64(d.masses[k]),
                tag.clone(),
                size.to_string(),
                cfg.seed.to_string(),
            ]
        }),
    )
    .map_err(io)?;
    let res = invariance_residual(&map, &d, cfg.measure.cells).map_err(at("measure-lab", "invariance_residual"))?;
    out.write_text("residual.txt", &fmt_f64(res)).map_err(io)?;
    out.write_json("density.json", &d).map_err(io)?;
    Ok(format!("{tag} density on {} bins, invariance residual {:.3e}", d.bins(), res))
}

fn compare_map(cfg: &RunConfig) -> Result<IntervalMap, CmdError> {
    match &cfg.experiment.compare {
        Some(c) => family_map(&c.family, &c.params).map_err(at("map-model", "make_builtin_family")),
        None => {
            let a = cfg.map().ok().and_then(|m| m.param(&cfg.experiment.param)).unwrap_or(cfg.experiment.a0);
            let axis = cfg.axis();
            axis.map_at(a + cfg.experiment.gap)
                .or_else(|_| axis.map_at(a - cfg.experiment.gap))
                .map_err(at("map-model", "make_builtin_family"))
        }
    }
}

pub fn distance(cfg: &RunConfig, out: &mut Artifacts) -> CmdResult {
    let f = base_map(cfg)?;
    let g = compare_map(cfg)?;
    let r = map_distance(&f, &g, cfg.experiment.distance_grid).map_err(at("map-model", "map_distance"))?;
    out.write_json("distance.json", &r).map_err(io)?;
    Ok(format!("d = {:.6e} (eta {:.3e})", r.value, r.achieved_eta))
}

pub fn curve_budgets(cfg: &RunConfig) -> CurveBudgets {
    let m = &cfg.measure;
    let density = match m.method {
        MethodName::Ulam => DensityMethod::Ulam { cells: m.cells },
        MethodName::Birkhoff => DensityMethod::Birkhoff {
            n_iter: m.n_iter,
            burn_in: m.burn_in,
            n_seeds: m.n_seeds,
            bins: m.bins,
            seed: cfg.seed,
        },
        MethodName::Tower => DensityMethod::Tower { bins: m.bins, pipeline: cfg.pipeline() },
    };
    let cross_check =
        (cfg.experiment.cross_check && m.method != MethodName::Birkhoff).then_some(DensityMethod::Birkhoff {
            n_iter: m.n_iter,
            burn_in: m.burn_in,
            n_seeds: m.n_seeds,
            bins: m.bins,
            seed: cfg.seed,
        });
    CurveBudgets {
        density,
        distance_grid: cfg.experiment.distance_grid,
        tail: cfg.experiment.tail.then(|| cfg.pipeline()),
        cross_check,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveSummary {
    pub a0: f64,
    pub spearman: f64,
    pub scale_medians: Vec<(f64, f64)>,
    pub rows: Vec<StabilityRow>,
}

/// Rows in `|offset|` order, computed in parallel.
pub fn stability_rows(cfg: &RunConfig) -> Result<CurveSummary, CmdError> {
    let axis = cfg.axis();
    let budgets = curve_budgets(cfg);
    let a0 = cfg.experiment.a0;
    let reference: Reference =
        stability_reference(&axis, a0, &budgets).map_err(at("stability-harness", "stability_curve"))?;
    let mut offs = cfg.offsets();
    sort_offsets(&mut offs);
    let top = offs.iter().fold(0.0f64, |m, o| m.max(o.abs()));
    let rows = offs
        .par_iter()
        .map(|&o| stability_row(&axis, &reference, o, &budgets, o.abs() == top))
        .collect::<Result<Vec<_>, _>>()
        .map_err(at("stability-harness", "stability_curve"))?;
    let d: Vec<f64> = rows.iter().map(|r| r.d).collect();
    let l: Vec<f64> = rows.iter().map(|r| r.l1).collect();
    Ok(CurveSummary { a0, spearman: spearman(&d, &l), scale_medians: scale_medians(&rows), rows })
}

pub fn stability(cfg: &RunConfig, out: &mut Artifacts) -> CmdResult {
    let s = stability_rows(cfg)?;
    out.write_csv(
        "stability.csv",
        &["a", "d", "l1", "gamma_fit", "c_fit", "method"],
        s.rows.iter().map(|r| {
            vec![fmt_f64(r.a), fmt_f64(r.d), fmt_f64(r.l1), fmt_opt(r.gamma_fit), fmt_opt(r.c_fit), r.method.clone()]
        }),
    )
    .map_err(io)?;
    out.write_json("stability.json", &s).map_err(io)?;
    let finest = s.scale_medians.last().map_or(f64::NAN, |m| m.1);
    let mut text =
        format!("{} rows, Spearman(d, L1) {:.4}, finest-scale median L1 {:.4e}", s.rows.len(), s.spearman, finest);
    if cfg.experiment.tail {
        let scan = tail_scan(cfg)?;
        out.write_csv(
            "tail_scan.csv",
            &["a", "gamma_fit", "c_fit", "r_squared"],
            scan.rows.iter().map(|r| vec![fmt_f64(r.a), fmt_f64(r.gamma_fit), fmt_f64(r.c_fit), fmt_f64(r.r_squared)]),
        )
        .map_err(io)?;
        text += &format!(", gamma relative spread {:.3} over {} points", scan.gamma_rel_spread, scan.rows.len());
    }
    Ok(text)
}

/// Tail fits over the scan neighbourhood, in parallel.
pub fn tail_scan(cfg: &RunConfig) -> Result<inducer_core::stability::TailScan, CmdError> {
    let e = &cfg.experiment;
    let axis = cfg.axis();
    let pipeline = cfg.pipeline();
    let pts = inducer_core::stability::scan_points(e.a0, e.radius, e.n_points);
    let rows = pts
        .par_iter()
        .map(|&a| tail_point(&axis, a, &pipeline))
        .collect::<Result<Vec<_>, _>>()
        .map_err(at("stability-harness", "tail_uniformity_scan"))?;
    Ok(summarize_tail_scan(rows))
}

pub fn overlap_report(cfg: &RunConfig, gap: f64) -> Result<inducer_core::stability::OverlapReport, CmdError> {
    let e = &cfg.experiment;
    let axis = cfg.axis();
    let f = axis.map_at(e.a0).map_err(at("map-model", "make_builtin_family"))?;
    let g = axis.map_at(e.a0 + gap).map_err(at("map-model", "make_builtin_family"))?;
    let pipeline = cfg.pipeline();
    let (fi, gi) = rayon::join(|| pipeline.run(&f), || pipeline.run(&g));
    let fi = fi.map_err(at("inducing-scheme", "build_induced_map"))?;
    let gi = gi.map_err(at("inducing-scheme", "build_induced_map"))?;
    let d = map_distance(&f, &g, e.distance_grid).map_err(at("map-model", "map_distance"))?.value;
    level_set_overlap(&fi.induced, &gi.induced, e.levels, d).map_err(at("stability-harness", "level_set_overlap"))
}

pub fn overlap(cfg: &RunConfig, out: &mut Artifacts) -> CmdResult {
    let r = overlap_report(cfg, cfg.experiment.gap)?;
    out.write_csv(
        "overlap.csv",
        &["j", "sym_diff_mass", "d"],
        r.rows.iter().map(|row| vec![row.j.to_string(), fmt_f64(row.sym_diff_mass), fmt_f64(row.d)]),
    )
    .map_err(io)?;
    out.write_json("overlap.json", &r).map_err(io)?;
    Ok(format!("total symmetric difference over j <= {}: {:.6e}", cfg.experiment.levels, r.total()))
}

pub fn uniqueness_report(cfg: &RunConfig) -> Result<inducer_core::stability::UniquenessReport, CmdError> {
    let map = base_map(cfg)?;
    let b = cfg.uniqueness_budgets();
    let clouds = (0..b.n_clouds)
        .into_par_iter()
        .map(|k| cloud_density(&map, k, &b))
        .collect::<Result<Vec<_>, _>>()
        .map_err(at("stability-harness", "uniqueness_check"))?;
    uniqueness_from_clouds(&clouds, b.threshold, entry_fraction(&map, &b))
        .map_err(at("stability-harness", "uniqueness_check"))
}

pub fn uniqueness(cfg: &RunConfig, out: &mut Artifacts) -> CmdResult {
    let r = uniqueness_report(cfg)?;
    out.write_json("uniqueness.json", &r).map_err(io)?;
    Ok(format!(
        "max pairwise L1 {:.4} (threshold {}): {}; entry fraction {}",
        r.max_l1,
        r.threshold,
        if r.passed { "pass" } else { "fail" },
        r.entry_fraction.map_or("n/a".into(), |x| format!("{x:.4}"))
    ))
}

/// Hypotheses, induced map with tail, and density in one directory.
pub fn report(cfg: &RunConfig, out: &mut Artifacts) -> CmdResult {
    let mut lines = Vec::new();
    lines.push(format!("hypotheses: {}", hypotheses(cfg, out)?));
    let map = base_map(cfg)?;
    if map.star().is_some() {
        lines.push(format!("induce: {}", induce(cfg, out)?));
    }
    lines.push(format!("density: {}", density(cfg, out)?));
    let text = lines.join("\n");
    out.write_text("report.txt", &text).map_err(io)?;
    Ok(text)
}
