//! Interval tracking through free and bound iterates until escape.

use alloc::collections::BinaryHeap;
use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{
    DepthRule, EscapeElement, EventKind, InducedStats, InducingParams, ItineraryEvent, QueueOrder, ResidualPiece,
    ResidualReason,
};
use crate::map_model::{IntervalMap, Side};
use crate::partition::{Annuli, BindingTable, CellId, CriticalPartition};
use crate::sum::sum;

/// A piece of a subdivided return: image interval (domain coordinates) and the
/// return depth, or `None` for a part that goes to the residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubPiece {
    pub left: f64,
    pub right: f64,
    pub depth: Option<u32>,
    pub residual: Option<ResidualReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FreeStep {
    Escape,
    NoAction,
    Inessential {
        spec: usize,
        depth: u32,
    },
    Essential {
        spec: usize,
        pieces: Vec<SubPiece>,
    },
    /// The image meets the neighbourhoods of two different critical points and
    /// is split at the given coordinate first.
    SplitAt(f64),
}

/// Classifies the image `(lo, hi)` at a free iterate.
///
/// `lump_below` lumps every cell narrower than it (in image coordinates) into a
/// single residual piece; 0 keeps every materialised cell.
pub fn classify_free_step(
    partition: &CriticalPartition,
    image: (f64, f64),
    depth_rule: DepthRule,
    lump_below: f64,
) -> FreeStep {
    let (lo, hi) = image;
    let delta = partition.delta;
    if hi - lo >= delta {
        return FreeStep::Escape;
    }
    let mut hit: Option<(usize, f64, f64)> = None;
    for (si, sp) in partition.specs.iter().enumerate() {
        let a = &sp.annuli;
        let (clo, chi) = a.to_coords(0.0, delta);
        if lo.max(clo) < hi.min(chi) {
            match hit {
                Some((h, plo, phi)) if a.location != partition.specs[h].annuli.location => {
                    let cut = if phi <= clo { 0.5 * (phi + clo) } else { 0.5 * (chi + plo) };
                    return FreeStep::SplitAt(cut);
                }
                Some(_) => {}
                None => hit = Some((si, clo, chi)),
            }
        }
    }
    let Some((spec, _, _)) = hit else {
        return FreeStep::NoAction;
    };
    let ann = partition.annuli(spec);
    let (e_lo, e_hi) = (ann.offset_of(lo), ann.offset_of(hi));
    let (d_in, d_out) = (e_lo.min(e_hi).max(0.0), e_lo.max(e_hi).min(ann.hat_radius()));
    let outer = ann.locate(d_out, true).expect("image inside the enlarged neighbourhood");
    let truncated = d_in < ann.floor();
    let inner = if truncated {
        CellId { r: ann.r_max, j: 1 }
    } else {
        ann.locate(d_in, false).expect("inner end inside the partition")
    };
    let count = ann.rank(inner) - ann.rank(outer) + 1;
    if !truncated && count <= 3 {
        let depth = match depth_rule {
            DepthRule::Min => {
                if outer.j == 0 {
                    ann.inward(outer).r
                } else {
                    outer.r
                }
            }
            DepthRule::Max => inner.r,
        };
        return FreeStep::Inessential { spec, depth };
    }
    FreeStep::Essential { spec, pieces: subdivide(ann, d_in, d_out, outer, inner, truncated, lump_below) }
}

fn subdivide(
    ann: &Annuli,
    d_in: f64,
    d_out: f64,
    outer: CellId,
    inner: CellId,
    truncated: bool,
    lump_below: f64,
) -> Vec<SubPiece> {
    // full cells from the outside inwards, as (inner, outer, r)
    let mut full: Vec<(f64, f64, u32)> = Vec::new();
    let mut stop: Option<(f64, ResidualReason)> = None;
    let mut id = outer;
    loop {
        let (ci, co) = ann.offsets(id);
        if id.j != 0 && co - ci < lump_below {
            stop = Some((co.min(d_out), ResidualReason::TooNarrow));
            break;
        }
        let is_full = id.j != 0 && ci >= d_in && co <= d_out;
        if is_full {
            full.push((ci, co, id.r));
        }
        if id == inner {
            break;
        }
        id = ann.inward(id);
    }
    if stop.is_none() && truncated {
        stop = Some((ann.floor(), ResidualReason::TruncatedDepth));
    }
    let mut out = Vec::with_capacity(full.len() + 1);
    if let Some(first) = full.first_mut() {
        first.1 = d_out;
    }
    if let Some(last) = full.last_mut() {
        last.0 = match stop {
            Some((b, _)) => b,
            None => d_in,
        };
    }
    for &(ci, co, r) in &full {
        let (left, right) = ann.to_coords(ci, co);
        out.push(SubPiece { left, right, depth: Some(r), residual: None });
    }
    match stop {
        Some((_, reason)) if full.is_empty() => {
            let (left, right) = ann.to_coords(d_in, d_out);
            out.push(SubPiece { left, right, depth: None, residual: Some(reason) });
        }
        Some((b, reason)) if b > d_in => {
            let (left, right) = ann.to_coords(d_in, b);
            out.push(SubPiece { left, right, depth: None, residual: Some(reason) });
        }
        _ => {}
    }
    out.sort_by(|p, q| p.left.partial_cmp(&q.left).unwrap());
    out
}

/// An interval of initial conditions and its current image.
#[derive(Debug, Clone)]
pub(crate) struct Piece {
    pub olo: f64,
    pub ohi: f64,
    pub ilo: f64,
    pub ihi: f64,
    pub rev: bool,
    pub time: u32,
    pub free_from: u32,
    pub route: Vec<u8>,
    pub events: Vec<ItineraryEvent>,
    pub escapes: u32,
    pub just_escaped: bool,
}

impl Piece {
    pub fn new(lo: f64, hi: f64) -> Self {
        Piece {
            olo: lo,
            ohi: hi,
            ilo: lo,
            ihi: hi,
            rev: false,
            time: 0,
            free_from: 0,
            route: Vec::new(),
            events: Vec::new(),
            escapes: 0,
            just_escaped: false,
        }
    }
}

/// Pulls an image point back to the origin along a route.
pub(crate) fn pullback(map: &IntervalMap, route: &[u8], y: f64) -> f64 {
    let br = map.branches();
    route.iter().rev().fold(y, |y, &b| br[b as usize].inverse_clamped(y))
}

/// Splits a piece at the given image coordinates (sorted, strictly inside).
/// Children come back in image order; shared cut points are bit-identical.
pub(crate) fn cut(map: &IntervalMap, p: &Piece, cuts: &[f64]) -> Vec<Piece> {
    let (x_lo, x_hi) = if p.rev { (p.ohi, p.olo) } else { (p.olo, p.ohi) };
    let mut img = Vec::with_capacity(cuts.len() + 2);
    let mut org = Vec::with_capacity(cuts.len() + 2);
    img.push(p.ilo);
    org.push(x_lo);
    for &y in cuts {
        let mut x = pullback(map, &p.route, y).clamp(p.olo, p.ohi);
        let prev = *org.last().unwrap();
        x = if p.rev { x.min(prev) } else { x.max(prev) };
        img.push(y);
        org.push(x);
    }
    img.push(p.ihi);
    org.push(x_hi);
    let mut out = Vec::with_capacity(cuts.len() + 1);
    for k in 0..img.len() - 1 {
        let (a, b) = (org[k], org[k + 1]);
        let mut c = p.clone();
        c.ilo = img[k];
        c.ihi = img[k + 1];
        c.olo = a.min(b);
        c.ohi = a.max(b);
        out.push(c);
    }
    out
}

pub(crate) struct Engine<'a> {
    pub map: &'a IntervalMap,
    pub partition: &'a CriticalPartition,
    pub binding: &'a BindingTable,
    pub n_max: u32,
    pub w_min: f64,
    pub depth_rule: DepthRule,
    /// Lump cells that would map back to well below `w_min`.
    pub lump: bool,
    /// Also lump cells narrower than this share of the returning image.
    pub lump_fraction: f64,
    pub residual: Vec<ResidualPiece>,
    pub stats: InducedStats,
    pub stop: bool,
    pub order: QueueOrder,
}

/// The cells of one essential return, handed out one at a time so that a
/// deep subdivision costs a single queue entry.
pub(crate) struct Bundle {
    parent: Piece,
    spec: usize,
    cells: Vec<SubPiece>,
    /// Outer (wider) cells sit at the high-index end.
    outer_high: bool,
    /// Image length per origin length, for width estimates.
    scale: f64,
}

pub(crate) enum Work {
    One(Piece),
    /// Cells `lo..hi` of a bundle; `edge` is the origin coordinate of the
    /// boundary at the outer end of the range.
    Cells {
        bundle: Rc<Bundle>,
        lo: usize,
        hi: usize,
        edge: f64,
    },
}

impl Work {
    fn key(&self) -> (u32, f64, f64) {
        match self {
            Work::One(p) => (p.time, p.ohi - p.olo, p.olo),
            Work::Cells { bundle, lo, hi, edge } => {
                let k = if bundle.outer_high { hi - 1 } else { *lo };
                let c = &bundle.cells[k];
                (bundle.parent.time, (c.right - c.left) / bundle.scale, *edge)
            }
        }
    }
}

/// A queued item with its priority; larger keys pop first.
struct Queued {
    earliest: bool,
    key: (u32, f64, f64),
    work: Work,
}

impl Queued {
    fn new(earliest: bool, work: Work) -> Self {
        Queued { earliest, key: work.key(), work }
    }
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        let ((ta, wa, la), (tb, wb, lb)) = (self.key, other.key);
        let by_time = tb.cmp(&ta);
        let by_width = wa.total_cmp(&wb);
        let by_left = lb.total_cmp(&la);
        if self.earliest {
            by_time.then(by_width).then(by_left)
        } else {
            by_width.then(by_left).then(by_time)
        }
    }
}

impl<'a> Engine<'a> {
    fn push_residual(&mut self, p: &Piece, reason: ResidualReason) {
        self.residual.push(ResidualPiece { left: p.olo, right: p.ohi, reason, time: p.time });
    }

    fn straddled_boundary(&self, p: &Piece) -> Option<f64> {
        self.map.critical_locations().iter().copied().find(|&c| p.ilo < c && c < p.ihi)
    }

    fn advance(&self, p: &mut Piece) {
        let bi = self.map.branch_index_fast(0.5 * (p.ilo + p.ihi));
        let br = &self.map.branches()[bi];
        let (a, b) = (br.value(p.ilo), br.value(p.ihi));
        if br.sign < 0 {
            p.ilo = b;
            p.ihi = a;
            p.rev = !p.rev;
        } else {
            p.ilo = a;
            p.ihi = b;
        }
        p.route.push(bi as u8);
        p.time += 1;
    }

    /// Origin coordinate of an image point of `p`, exact at the image ends.
    fn origin_of(&self, p: &Piece, y: f64) -> f64 {
        let (x_lo, x_hi) = if p.rev { (p.ohi, p.olo) } else { (p.olo, p.ohi) };
        if y == p.ilo {
            x_lo
        } else if y == p.ihi {
            x_hi
        } else {
            pullback(self.map, &p.route, y).clamp(p.olo, p.ohi)
        }
    }

    /// Runs every piece to escape or residual in queue order;
    /// `on_escape` gets each escaped piece and may push further work. Setting
    /// `stop` sends everything still queued to the residual.
    pub fn run(&mut self, init: Vec<Piece>, on_escape: &mut dyn FnMut(&mut Self, Piece, &mut Vec<Piece>)) {
        let earliest = self.order == QueueOrder::Earliest;
        let mut heap: BinaryHeap<Queued> = init.into_iter().map(|p| Queued::new(earliest, Work::One(p))).collect();
        let mut out = Vec::new();
        let mut pieces = Vec::new();
        while let Some(Queued { work, .. }) = heap.pop() {
            let piece = match work {
                Work::One(p) => p,
                Work::Cells { bundle, lo, hi, edge } => {
                    let (cell, rest) = self.take_cell(bundle, lo, hi, edge);
                    if let Some(rest) = rest {
                        heap.push(Queued::new(earliest, rest));
                    }
                    match cell {
                        Some(c) => c,
                        None => continue,
                    }
                }
            };
            if self.stop {
                self.push_residual(&piece, ResidualReason::BudgetExhausted);
                continue;
            }
            self.process(piece, &mut out, &mut pieces, on_escape);
            heap.extend(out.drain(..).map(|w| Queued::new(earliest, w)));
            heap.extend(pieces.drain(..).map(|p| Queued::new(earliest, Work::One(p))));
            self.stats.max_queue = self.stats.max_queue.max(heap.len() as u64);
        }
    }

    /// Splits the outermost cell off a bundle range. When stopped, the whole
    /// range goes to the residual instead.
    fn take_cell(&mut self, bundle: Rc<Bundle>, lo: usize, hi: usize, edge: f64) -> (Option<Piece>, Option<Work>) {
        let b = &*bundle;
        let p = &b.parent;
        if self.stop {
            let far_y = if b.outer_high { b.cells[lo].left } else { b.cells[hi - 1].right };
            let far = self.origin_of(p, far_y);
            self.residual.push(ResidualPiece {
                left: far.min(edge),
                right: far.max(edge),
                reason: ResidualReason::BudgetExhausted,
                time: p.time,
            });
            return (None, None);
        }
        let k = if b.outer_high { hi - 1 } else { lo };
        let c = b.cells[k];
        let inner_y = if b.outer_high { c.left } else { c.right };
        let mut inner = self.origin_of(p, inner_y);
        // keep the pulled-back boundaries monotone
        let descending = b.outer_high != p.rev;
        inner = if descending { inner.min(edge) } else { inner.max(edge) };
        let mut kid = p.clone();
        kid.ilo = c.left;
        kid.ihi = c.right;
        kid.olo = inner.min(edge);
        kid.ohi = inner.max(edge);
        let depth = c.depth.expect("bundles hold full cells only");
        let bound = self.binding.p(b.spec, depth);
        kid.events.push(ItineraryEvent { time: kid.time, kind: EventKind::EssentialReturn { depth, bound } });
        kid.free_from = kid.time + bound + 1;
        let rest = if hi - lo > 1 {
            let (lo, hi) = if b.outer_high { (lo, hi - 1) } else { (lo + 1, hi) };
            Some(Work::Cells { bundle: bundle.clone(), lo, hi, edge: inner })
        } else {
            None
        };
        if kid.time >= self.n_max {
            self.push_residual(&kid, ResidualReason::Horizon);
            return (None, rest);
        }
        self.advance(&mut kid);
        (Some(kid), rest)
    }

    fn process(
        &mut self,
        mut p: Piece,
        work: &mut Vec<Work>,
        stack: &mut Vec<Piece>,
        on_escape: &mut dyn FnMut(&mut Self, Piece, &mut Vec<Piece>),
    ) {
        let delta = self.partition.delta;
        loop {
            if p.ohi - p.olo < self.w_min {
                self.push_residual(&p, ResidualReason::TooNarrow);
                return;
            }
            if let Some(b) = self.straddled_boundary(&p) {
                self.stats.boundary_splits += 1;
                let kids = cut(self.map, &p, &[b]);
                stack.extend(kids.into_iter().rev());
                return;
            }
            if p.time >= p.free_from {
                if p.ihi - p.ilo >= delta {
                    if !p.just_escaped {
                        p.events.push(ItineraryEvent { time: p.time, kind: EventKind::Escape });
                        p.escapes += 1;
                        self.stats.escapes += 1;
                    }
                    p.just_escaped = false;
                    on_escape(self, p, stack);
                    return;
                }
                p.just_escaped = false;
                let scale = (p.ihi - p.ilo) / (p.ohi - p.olo);
                let lump =
                    if self.lump { (1e-2 * self.w_min * scale).max(self.lump_fraction * (p.ihi - p.ilo)) } else { 0.0 };
                match classify_free_step(self.partition, (p.ilo, p.ihi), self.depth_rule, lump) {
                    FreeStep::Escape => unreachable!("length checked above"),
                    FreeStep::NoAction => {}
                    FreeStep::Inessential { spec, depth } => {
                        let bound = self.binding.p(spec, depth);
                        p.events
                            .push(ItineraryEvent { time: p.time, kind: EventKind::InessentialReturn { depth, bound } });
                        p.free_from = p.time + bound + 1;
                        self.stats.inessential_returns += 1;
                    }
                    FreeStep::Essential { spec, pieces } => {
                        self.stats.essential_returns += 1;
                        let mut cells = Vec::with_capacity(pieces.len());
                        for sp in &pieces {
                            if sp.depth.is_some() {
                                cells.push(*sp);
                                continue;
                            }
                            let (a, b) = (self.origin_of(&p, sp.left), self.origin_of(&p, sp.right));
                            self.residual.push(ResidualPiece {
                                left: a.min(b),
                                right: a.max(b),
                                reason: sp.residual.unwrap_or(ResidualReason::TooNarrow),
                                time: p.time,
                            });
                        }
                        if cells.is_empty() {
                            return;
                        }
                        let outer_high = self.partition.annuli(spec).side == Side::Right;
                        let edge_y = if outer_high { cells[cells.len() - 1].right } else { cells[0].left };
                        let edge = self.origin_of(&p, edge_y);
                        let hi = cells.len();
                        let bundle = Rc::new(Bundle { parent: p, spec, cells, outer_high, scale });
                        work.push(Work::Cells { bundle, lo: 0, hi, edge });
                        return;
                    }
                    FreeStep::SplitAt(y) => {
                        self.stats.multi_component_splits += 1;
                        let kids = cut(self.map, &p, &[y]);
                        stack.extend(kids.into_iter().rev());
                        return;
                    }
                }
            }
            if p.time >= self.n_max {
                self.push_residual(&p, ResidualReason::Horizon);
                return;
            }
            self.advance(&mut p);
            if self.order == QueueOrder::Earliest {
                stack.push(p);
                return;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeOutcome {
    pub elements: Vec<EscapeElement>,
    pub residual: Vec<ResidualPiece>,
    pub escaped_mass: f64,
    pub residual_mass: f64,
}

/// Escape partition of `j`: every element reaches length `>= delta` at a free
/// iterate. Unresolved parts land in the residual with a reason; cells narrower
/// than `params.lump_fraction` of their returning image are lumped together,
/// and at most `params.branch_cap` elements are produced.
pub fn escape_partition(
    map: &IntervalMap,
    partition: &CriticalPartition,
    binding: &BindingTable,
    j: (f64, f64),
    params: &InducingParams,
) -> EscapeOutcome {
    let mut eng = Engine {
        map,
        partition,
        binding,
        n_max: params.n_max,
        w_min: params.w_min.unwrap_or(1e-14 * map.domain_len()),
        depth_rule: params.depth_rule,
        lump: true,
        residual: Vec::new(),
        stats: InducedStats::default(),
        stop: false,
        order: QueueOrder::Earliest,
        lump_fraction: params.lump_fraction,
    };
    let mut elements = Vec::new();
    eng.run(vec![Piece::new(j.0, j.1)], &mut |eng, p, _| {
        if elements.len() >= params.branch_cap {
            eng.stop = true;
            eng.residual.push(ResidualPiece {
                left: p.olo,
                right: p.ohi,
                reason: ResidualReason::BudgetExhausted,
                time: p.time,
            });
            return;
        }
        elements.push(EscapeElement {
            left: p.olo,
            right: p.ohi,
            escape_time: p.time,
            image: (p.ilo, p.ihi),
            itinerary: p.events,
            route: p.route,
        });
    });
    elements.sort_by(|a, b| a.left.partial_cmp(&b.left).unwrap());
    let mut residual = eng.residual;
    residual.sort_by(|a, b| a.left.partial_cmp(&b.left).unwrap());
    EscapeOutcome {
        escaped_mass: sum(elements.iter().map(|e| e.right - e.left)),
        residual_mass: sum(residual.iter().map(|r| r.right - r.left)),
        elements,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::families::make_builtin_family;
    use crate::map_model::HypothesisSet;
    use crate::partition::{binding_table, build_critical_partition};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    struct Setup {
        map: IntervalMap,
        partition: CriticalPartition,
        binding: BindingTable,
    }

    fn lorenz() -> Setup {
        let map = make_builtin_family("lorenz_singular", &[]).unwrap();
        let hyp = HypothesisSet::default();
        let partition = build_critical_partition(&map, &hyp, 30).unwrap();
        let binding = binding_table(&map, &partition, &hyp, 60, 64);
        Setup { map, partition, binding }
    }

    fn run(s: &Setup, j: (f64, f64)) -> EscapeOutcome {
        escape_partition(
            &s.map,
            &s.partition,
            &s.binding,
            j,
            &InducingParams { n_max: 60, branch_cap: 300, ..InducingParams::default() },
        )
    }

    /// Elements and residual pieces cover `j` end to end without gaps.
    fn assert_tiles(out: &EscapeOutcome, j: (f64, f64)) {
        let mut spans: Vec<(f64, f64)> = out.elements.iter().map(|e| (e.left, e.right)).collect();
        spans.extend(out.residual.iter().map(|r| (r.left, r.right)));
        spans.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert_eq!(spans[0].0, j.0);
        assert_eq!(spans.last().unwrap().1, j.1);
        for w in spans.windows(2) {
            assert_eq!(w[0].1, w[1].0, "gap or overlap at {:?}", w);
        }
        let total = out.escaped_mass + out.residual_mass;
        assert!((total - (j.1 - j.0)).abs() <= 1e-12 * (j.1 - j.0).max(1e-300));
    }

    #[test]
    fn escapes_agree_with_straight_line_iteration() {
        let s = lorenz();
        let delta = s.partition.delta;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        let mut late = 0;
        for _ in 0..20 {
            let len = delta * rng.random_range(0.05..1.0);
            let lo = rng.random_range(-1.0..1.0 - len);
            let j = (lo, lo + len);
            let out = run(&s, j);
            assert_tiles(&out, j);
            for e in &out.elements {
                let (ilo, ihi) = e.image;
                assert!(ihi - ilo >= delta * (1.0 - 1e-12), "short escape {:?}", e.image);
                assert_eq!(e.route.len(), e.escape_time as usize);
                // follow the midpoint one step at a time
                let mut x = 0.5 * (e.left + e.right);
                for &b in &e.route {
                    assert_eq!(s.map.branch_index_fast(x), b as usize);
                    x = s.map.step(x);
                }
                let slack = 1e-9 * (ihi - ilo);
                assert!(x >= ilo - slack && x <= ihi + slack, "{x} outside {:?}", e.image);
                let times: Vec<u32> = e.itinerary.iter().map(|ev| ev.time).collect();
                assert!(times.windows(2).all(|w| w[0] <= w[1]));
                assert!(times.iter().all(|&t| t <= e.escape_time));
                checked += 1;
                late += usize::from(e.escape_time >= 3);
            }
        }
        assert!(checked >= 20 && late > 0, "{checked} elements, {late} escaping late");
    }

    #[test]
    fn pullback_inverts_the_route() {
        let s = lorenz();
        let x0 = 0.3;
        let mut x = x0;
        let mut route = Vec::new();
        for _ in 0..6 {
            route.push(s.map.branch_index_fast(x) as u8);
            x = s.map.step(x);
        }
        assert!((pullback(&s.map, &route, x) - x0).abs() < 1e-12);
    }

    #[test]
    fn interval_already_long_escapes_at_once() {
        let s = lorenz();
        let j = (0.3, 0.3 + 2.0 * s.partition.delta);
        let out = run(&s, j);
        assert_eq!(out.elements.len(), 1);
        assert_eq!(out.elements[0].escape_time, 0);
        assert_eq!(out.elements[0].image, j);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn partition_conserves_mass(lo in -0.99f64..0.9, frac in 0.01f64..1.0) {
            let s = lorenz();
            let len = s.partition.delta * frac;
            let j = (lo, (lo + len).min(1.0));
            let out = run(&s, j);
            assert_tiles(&out, j);
        }
    }
}
