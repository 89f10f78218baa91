//! Escape partitions, returns to the base interval, and the induced
//! full-branch map with its tail, expansion and distortion diagnostics.

mod constants;
mod diagnostics;
mod escape;
mod induced;
mod pipeline;
mod returns;
mod tail;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use constants::{derived_constants, DerivedConstants};
pub use diagnostics::{
    annotate_branches, branch_distortion_at, branch_expansion_at, branch_log_derivatives, distortion_diagnostic,
    distortion_report, expansion_diagnostic, expansion_report, BranchDistortion, BranchExpansion, DistortionReport,
    ExpansionReport,
};
pub(crate) use escape::pullback;
pub use escape::{classify_free_step, escape_partition, EscapeOutcome, FreeStep, SubPiece};
pub use induced::build_induced_map;
pub use pipeline::{InducePipeline, Induction};
pub use returns::{base_interval, find_return, ReturnCandidates, ReturnHit};
pub use tail::{fit_exponential_tail, tail_statistics, TailStats};

/// What happened at an iterate. Free and bound iterates are implicit in the
/// stored itinerary; [`InducedBranch::full_itinerary`] expands them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Free,
    Bound,
    InessentialReturn { depth: u32, bound: u32 },
    EssentialReturn { depth: u32, bound: u32 },
    Escape,
    ReturnToStar { t0: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItineraryEvent {
    pub time: u32,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Expands the stored markers into one event per iterate `0..=until`.
pub fn expand_itinerary(markers: &[ItineraryEvent], until: u32) -> Vec<ItineraryEvent> {
    let mut out = Vec::with_capacity(until as usize + 1);
    let mut m = markers.iter().peekable();
    let mut bound_to: Option<u32> = None;
    for t in 0..=until {
        let mut marked = false;
        while let Some(ev) = m.peek() {
            if ev.time != t {
                break;
            }
            let ev = *m.next().unwrap();
            if let EventKind::InessentialReturn { bound, .. } | EventKind::EssentialReturn { bound, .. } = ev.kind {
                bound_to = (bound > 0).then_some(t + bound);
            }
            // a remainder that escapes again at the same time is recorded once
            if !(marked && ev.kind == EventKind::Escape) {
                out.push(ev);
            }
            marked = true;
        }
        if marked {
            continue;
        }
        let kind = match bound_to {
            Some(b) if t <= b => EventKind::Bound,
            _ => EventKind::Free,
        };
        out.push(ItineraryEvent { time: t, kind });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthRule {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    TwoSided,
    Left,
    Right,
}

/// How a preimage of the base interval is chosen inside an escaped interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnRule {
    /// Preimage point closest to the centre of the interval.
    Centermost,
    /// Smallest depth, then closest to the centre.
    Shallowest,
    /// Largest pulled-back interval.
    Largest,
}

/// Where the pulled-back interval may sit inside the escaped interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Inside the central third.
    CentralThird,
    /// Leaving at least `delta / 3` on both sides.
    SideGaps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainMode {
    DeltaStar,
    FullInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReturnFinderParams {
    pub delta_star: f64,
    pub t_star: u32,
    pub sidedness: Sidedness,
    pub xi: f64,
    pub rule: ReturnRule,
    pub region: Region,
    /// Cap on the number of precomputed preimage intervals.
    pub max_candidates: usize,
}

impl Default for ReturnFinderParams {
    fn default() -> Self {
        ReturnFinderParams {
            delta_star: crate::fmath::exp(-5.0),
            t_star: 14,
            sidedness: Sidedness::TwoSided,
            xi: 0.01,
            rule: ReturnRule::Largest,
            region: Region::SideGaps,
            max_candidates: 1 << 20,
        }
    }
}

/// Which queued piece is refined next. Only matters once a budget stops the
/// construction early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueOrder {
    /// Smallest current iterate first, so the tail is exact up to the time
    /// the budget runs out.
    Earliest,
    /// Widest origin interval first, which covers the most mass per branch.
    Widest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InducingParams {
    pub n_max: u32,
    /// Pieces narrower than this (origin coordinates) go to the residual.
    /// `None` means `1e-14` times the domain length.
    pub w_min: Option<f64>,
    pub branch_cap: usize,
    pub depth_rule: DepthRule,
    pub domain_mode: DomainMode,
    pub order: QueueOrder,
    /// Cells of an essential return narrower than this share of the
    /// returning image are lumped into one residual piece.
    pub lump_fraction: f64,
}

impl Default for InducingParams {
    fn default() -> Self {
        InducingParams {
            n_max: 200,
            w_min: None,
            branch_cap: 1_000_000,
            depth_rule: DepthRule::Min,
            domain_mode: DomainMode::DeltaStar,
            order: QueueOrder::Widest,
            lump_fraction: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualReason {
    Horizon,
    TooNarrow,
    TruncatedDepth,
    NoReturn,
    Unverified,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPiece {
    pub left: f64,
    pub right: f64,
    pub reason: ResidualReason,
    pub time: u32,
}

/// An element of an escape partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeElement {
    pub left: f64,
    pub right: f64,
    pub escape_time: u32,
    pub image: (f64, f64),
    pub itinerary: Vec<ItineraryEvent>,
    pub route: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedBranch {
    pub left: f64,
    pub right: f64,
    pub return_time: u32,
    pub escape_time: u32,
    pub t0: u32,
    /// Branch index used at each of the `return_time` steps.
    pub route: Vec<u8>,
    pub itinerary: Vec<ItineraryEvent>,
    /// Number of escapes before the return.
    pub escapes: u32,
    /// `true` if `f^T` reverses orientation.
    pub reversed: bool,
    pub min_deriv: f64,
    pub distortion: f64,
}

impl InducedBranch {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn full_itinerary(&self) -> Vec<ItineraryEvent> {
        expand_itinerary(&self.itinerary, self.return_time)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InducedStats {
    pub boundary_splits: u64,
    pub multi_component_splits: u64,
    pub essential_returns: u64,
    pub inessential_returns: u64,
    pub escapes: u64,
    pub unverified: u64,
    pub xi_est: f64,
    /// Largest number of pieces waiting at once.
    pub max_queue: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedMap {
    /// The base interval onto which every branch returns.
    pub delta_star: (f64, f64),
    pub star: f64,
    pub domain_mode: DomainMode,
    /// Total mass that was partitioned (base interval or the whole domain).
    pub domain_mass: f64,
    pub branches: Vec<InducedBranch>,
    pub residual: Vec<ResidualPiece>,
    pub residual_mass: f64,
    pub covered_mass: f64,
    pub budget_exhausted: bool,
    pub stats: InducedStats,
}

impl InducedMap {
    pub fn delta_star_len(&self) -> f64 {
        self.delta_star.1 - self.delta_star.0
    }
}
