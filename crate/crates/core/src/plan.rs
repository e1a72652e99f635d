//! The three pattern planners and geometric path realisation.
//!
//! All three patterns share the same building blocks: an optional initial
//! headland circuit, lane traversals ordered by a lane-visit rule, headland
//! transitions between lane ends, and a final ride back to the exit. Moves
//! are expressed on the normalised field (lanes by index, headland stretches
//! by arc-length span and sense), so the rules depend only on node order and
//! work on non-rectangular contours too.
//!
//! Lane-visit rules:
//!
//! * meander: 1, 2, ..., N with alternating headings;
//! * skip-and-fill: after an initial circuit, climb a lane, drop back one,
//!   skip two ahead (1,3,2,5,4,... or 2,1,4,3,... depending on where the
//!   entrance sits);
//! * skip-and-fill with merged headland coverage: the same motif without the
//!   initial circuit; headland gaps are covered by the motif's own
//!   transitions plus the final ride home, and the far field end stands in
//!   as the climbing element when the lane count is odd.

use crate::field::{EntranceClass, NormalizedField};
use crate::geom::{fillet_cut, fillet_trim, turn_deviation, Point2};
use crate::graph::{
    GraphError, Heading, HlDir, NetPos, Network, RouteStep, TraceSet, TransitionGraph,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("turn does not fit: {0}")]
    TurnInfeasible(String),
    #[error("routing failed while closing the plan: {0}")]
    Routing(#[from] GraphError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    Abp,
    Circ,
    CircStar,
}

impl Pattern {
    pub fn label(&self) -> &'static str {
        match self {
            Pattern::Abp => "abp",
            Pattern::Circ => "circ",
            Pattern::CircStar => "circstar",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaneDir {
    Up,
    Down,
}

impl LaneDir {
    pub fn heading(self) -> Heading {
        match self {
            LaneDir::Up => Heading::LaneUp,
            LaneDir::Down => Heading::LaneDown,
        }
    }

    pub fn flip(self) -> LaneDir {
        match self {
            LaneDir::Up => LaneDir::Down,
            LaneDir::Down => LaneDir::Up,
        }
    }
}

/// One move of a coverage plan in the normalised frame.
#[derive(Clone, Debug)]
pub enum PlanMove {
    Lane {
        lane: usize,
        dir: LaneDir,
        working: bool,
        /// Metric length (the lane length).
        len: f64,
    },
    Headland {
        from_s: f64,
        /// Arc length travelled (may exceed one lap for the initial circuit).
        span: f64,
        dir: HlDir,
        working: bool,
        /// Metric length: span minus interior-corner fillet cuts.
        len: f64,
    },
}

impl PlanMove {
    pub fn working(&self) -> bool {
        match self {
            PlanMove::Lane { working, .. } => *working,
            PlanMove::Headland { working, .. } => *working,
        }
    }

    pub fn metric_len(&self) -> f64 {
        match self {
            PlanMove::Lane { len, .. } => *len,
            PlanMove::Headland { len, .. } => *len,
        }
    }

    /// End arc-length coordinate of a headland move.
    pub fn headland_end(&self, nf: &NormalizedField) -> Option<f64> {
        match self {
            PlanMove::Headland {
                from_s, span, dir, ..
            } => Some(match dir {
                HlDir::Ccw => nf.headland.wrap(from_s + span),
                HlDir::Cw => nf.headland.wrap(from_s - span),
            }),
            _ => None,
        }
    }
}

/// A complete single-run coverage plan.
#[derive(Clone, Debug)]
pub struct CoveragePlan {
    pub pattern: Pattern,
    pub moves: Vec<PlanMove>,
    /// Working lane traversals in execution order.
    pub lane_order: Vec<(usize, LaneDir)>,
    /// Total metric length including turn fillets.
    pub length: f64,
    /// Metric length of the working portion.
    pub working_length: f64,
    pub start_s: f64,
    pub end_s: f64,
}

// ---------------------------------------------------------------------------
// Raw move assembly
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
enum RawMove {
    Lane { lane: usize, dir: LaneDir },
    Hl { from_s: f64, span: f64, dir: HlDir },
}

struct Builder<'a> {
    nf: &'a NormalizedField,
    moves: Vec<RawMove>,
}

impl<'a> Builder<'a> {
    fn new(nf: &'a NormalizedField) -> Self {
        Builder {
            nf,
            moves: Vec::new(),
        }
    }

    fn hl_ccw(&mut self, from_s: f64, to_s: f64) {
        let span = self.nf.ccw_dist(from_s, to_s);
        if span < 1e-9 {
            return;
        }
        self.moves.push(RawMove::Hl {
            from_s,
            span,
            dir: HlDir::Ccw,
        });
    }

    fn hl_cw(&mut self, from_s: f64, to_s: f64) {
        let span = self.nf.ccw_dist(to_s, from_s);
        if span < 1e-9 {
            return;
        }
        self.moves.push(RawMove::Hl {
            from_s,
            span,
            dir: HlDir::Cw,
        });
    }

    /// Full circuit from `s0` continuing ccw to `to_s`.
    fn circuit_then(&mut self, s0: f64, to_s: f64) {
        let extra = self.nf.ccw_dist(s0, to_s);
        self.moves.push(RawMove::Hl {
            from_s: s0,
            span: self.nf.total_s() + extra,
            dir: HlDir::Ccw,
        });
    }

    fn lane(&mut self, lane: usize, dir: LaneDir) {
        self.moves.push(RawMove::Lane { lane, dir });
    }

    fn s_bot(&self, lane: usize) -> f64 {
        self.nf.lane(lane).s_lo
    }

    fn s_top(&self, lane: usize) -> f64 {
        self.nf.lane(lane).s_hi
    }
}

/// Meander pattern: initial circuit, lanes 1..N with alternating headings,
/// final lane-to-headland transition turned toward the entrance side, then
/// the shortest admissible ride to the exit.
pub fn plan_abp(nf: &NormalizedField) -> Result<CoveragePlan, PlanError> {
    let mut b = Builder::new(nf);
    let n = nf.lane_count();
    let first_dir = match nf.entrance_class {
        EntranceClass::Z01 => LaneDir::Down,
        EntranceClass::Z02 => LaneDir::Up,
    };
    let entry_s = match first_dir {
        LaneDir::Down => b.s_top(1),
        LaneDir::Up => b.s_bot(1),
    };
    b.circuit_then(nf.entrance_s, entry_s);
    let mut dir = first_dir;
    for lane in 1..=n {
        b.lane(lane, dir);
        if lane < n {
            match dir {
                // Ended at the bottom: the lower headland runs ccw eastward.
                LaneDir::Down => b.hl_ccw(b.s_bot(lane), b.s_bot(lane + 1)),
                // Ended at the top: eastward along the upper headland is cw.
                LaneDir::Up => b.hl_cw(b.s_top(lane), b.s_top(lane + 1)),
            }
            dir = dir.flip();
        }
    }
    // Final transition points toward the entrance side (westward): cw on the
    // lower headland, ccw on the upper.
    let (end_node_s, exit_heading) = match dir {
        LaneDir::Down => (b.s_bot(n), Heading::Cw),
        LaneDir::Up => (b.s_top(n), Heading::Ccw),
    };
    finalize_with_ride_home(nf, b.moves, Pattern::Abp, end_node_s, exit_heading)
}

/// Skip-and-fill pattern with an initial headland circuit.
pub fn plan_circ(nf: &NormalizedField) -> Result<CoveragePlan, PlanError> {
    let n = nf.lane_count();
    let mut b = Builder::new(nf);
    if n == 1 {
        match nf.entrance_class {
            EntranceClass::Z01 => {
                b.circuit_then(nf.entrance_s, b.s_top(1));
                b.lane(1, LaneDir::Down);
                return finalize_with_ride_home(
                    nf,
                    b.moves,
                    Pattern::Circ,
                    b.s_bot(1),
                    Heading::Cw,
                );
            }
            EntranceClass::Z02 => {
                b.circuit_then(nf.entrance_s, b.s_bot(1));
                b.lane(1, LaneDir::Up);
                b.hl_ccw(b.s_top(1), nf.exit_s);
                return finalize(nf, b.moves, Pattern::Circ);
            }
        }
    }
    // Entrances of the first kind start by dropping down lane 1 and climbing
    // lane 3; that needs three lanes. Two-lane fields fall back to the other
    // shape, whose motif only needs lane 2.
    if nf.entrance_class == EntranceClass::Z01 && n >= 3 {
        b.circuit_then(nf.entrance_s, b.s_top(1));
        b.lane(1, LaneDir::Down);
        let mut at_bottom_of = 1usize;
        let mut m = 3usize;
        while m <= n {
            b.hl_ccw(b.s_bot(at_bottom_of), b.s_bot(m));
            b.lane(m, LaneDir::Up);
            b.hl_ccw(b.s_top(m), b.s_top(m - 1));
            b.lane(m - 1, LaneDir::Down);
            at_bottom_of = m - 1;
            m += 2;
        }
        if n % 2 == 1 {
            // Ended below lane N-1; reuse lane N upward to reach the top.
            b.hl_ccw(b.s_bot(n - 1), b.s_bot(n));
            b.lane(n, LaneDir::Up);
        } else {
            // Lane N is still unworked; climb it.
            b.hl_ccw(b.s_bot(at_bottom_of), b.s_bot(n));
            b.lane(n, LaneDir::Up);
        }
    } else {
        b.circuit_then(nf.entrance_s, b.s_bot(2));
        b.lane(2, LaneDir::Up);
        b.hl_ccw(b.s_top(2), b.s_top(1));
        b.lane(1, LaneDir::Down);
        let mut at_bottom_of = 1usize;
        let mut m = 4usize;
        while m <= n {
            b.hl_ccw(b.s_bot(at_bottom_of), b.s_bot(m));
            b.lane(m, LaneDir::Up);
            b.hl_ccw(b.s_top(m), b.s_top(m - 1));
            b.lane(m - 1, LaneDir::Down);
            at_bottom_of = m - 1;
            m += 2;
        }
        if n % 2 == 1 {
            b.hl_ccw(b.s_bot(at_bottom_of), b.s_bot(n));
            b.lane(n, LaneDir::Up);
        } else if n >= 4 {
            // Last pair ended below lane N-1; reuse lane N upward.
            b.hl_ccw(b.s_bot(n - 1), b.s_bot(n));
            b.lane(n, LaneDir::Up);
        } else {
            // n == 2: ended below lane 1; reuse lane 2 upward.
            b.hl_ccw(b.s_bot(1), b.s_bot(2));
            b.lane(2, LaneDir::Up);
        }
    }
    b.hl_ccw(b.s_top(n), nf.exit_s);
    finalize(nf, b.moves, Pattern::Circ)
}

/// Skip-and-fill without the initial circuit. Headland coverage falls out of
/// the motif transitions plus the final ride home.
pub fn plan_circ_star(nf: &NormalizedField) -> Result<CoveragePlan, PlanError> {
    let n = nf.lane_count();
    let mut b = Builder::new(nf);
    let pairs_end = if n % 2 == 0 { n } else { n - 1 };
    let mut cursor_s = nf.entrance_s;
    let mut m = 2usize;
    while m <= pairs_end {
        b.hl_ccw(cursor_s, b.s_bot(m));
        b.lane(m, LaneDir::Up);
        b.hl_ccw(b.s_top(m), b.s_top(m - 1));
        b.lane(m - 1, LaneDir::Down);
        cursor_s = b.s_bot(m - 1);
        m += 2;
    }
    if n % 2 == 1 {
        // Around the far field end to the top of lane N, then down it.
        let d = nf.ccw_dist(cursor_s, b.s_top(n));
        let span = if d < 1e-9 { nf.total_s() } else { d };
        b.moves.push(RawMove::Hl {
            from_s: cursor_s,
            span,
            dir: HlDir::Ccw,
        });
        b.lane(n, LaneDir::Down);
        cursor_s = b.s_bot(n);
    }
    b.hl_ccw(cursor_s, nf.exit_s);
    finalize(nf, b.moves, Pattern::CircStar)
}

// ---------------------------------------------------------------------------
// Finalisation: working flags, metric lengths, ride home
// ---------------------------------------------------------------------------

/// Circular coverage bookkeeping over [0, total).
struct Coverage {
    total: f64,
    /// Sorted, merged, non-wrapping covered intervals.
    ivs: Vec<(f64, f64)>,
}

impl Coverage {
    fn new(total: f64) -> Self {
        Coverage {
            total,
            ivs: Vec::new(),
        }
    }

    fn insert(&mut self, start: f64, len: f64) {
        if len <= 0.0 {
            return;
        }
        if len >= self.total - 1e-12 {
            self.ivs = vec![(0.0, self.total)];
            return;
        }
        let s = start.rem_euclid(self.total);
        let e = s + len;
        if e <= self.total {
            self.insert_flat(s, e);
        } else {
            self.insert_flat(s, self.total);
            self.insert_flat(0.0, e - self.total);
        }
    }

    fn insert_flat(&mut self, s: f64, e: f64) {
        self.ivs.push((s, e));
        self.ivs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.ivs.len());
        for &(s, e) in &self.ivs {
            if let Some(last) = merged.last_mut() {
                if s <= last.1 + 1e-9 {
                    last.1 = last.1.max(e);
                    continue;
                }
            }
            merged.push((s, e));
        }
        self.ivs = merged;
    }

    fn covered_at(&self, p: f64) -> bool {
        let p = p.rem_euclid(self.total);
        self.ivs
            .iter()
            .any(|&(s, e)| s - 1e-9 <= p && p <= e + 1e-9)
    }

    /// Split a directed stretch of at most one lap into maximal pieces of
    /// uniform coverage state, as `(offset, len, covered)` in travel order.
    fn split(&self, from_s: f64, span: f64, dir: HlDir) -> Vec<(f64, f64, bool)> {
        let mut cuts: Vec<f64> = vec![0.0, span];
        for &(s, e) in &self.ivs {
            for b in [s, e] {
                let rel = match dir {
                    HlDir::Ccw => (b - from_s).rem_euclid(self.total),
                    HlDir::Cw => (from_s - b).rem_euclid(self.total),
                };
                if rel > 1e-9 && rel < span - 1e-9 {
                    cuts.push(rel);
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let mut out = Vec::new();
        for w in cuts.windows(2) {
            let (o, l) = (w[0], w[1] - w[0]);
            if l <= 1e-9 {
                continue;
            }
            let mid = o + l / 2.0;
            let p = match dir {
                HlDir::Ccw => from_s + mid,
                HlDir::Cw => from_s - mid,
            };
            out.push((o, l, self.covered_at(p)));
        }
        out
    }
}

fn headland_metric_len(nf: &NormalizedField, from_s: f64, span: f64, dir: HlDir) -> f64 {
    let start = match dir {
        HlDir::Ccw => from_s,
        HlDir::Cw => from_s - span,
    };
    let cuts: f64 = nf
        .corners_within(start, span)
        .iter()
        .map(|&(_, dev)| fillet_cut(dev, nf.turning_radius))
        .sum();
    span - cuts
}

/// Assign working flags (first coverage works, repeats transit), compute
/// metric lengths and junction fillet discounts, and assemble the plan.
fn finalize(
    nf: &NormalizedField,
    raw: Vec<RawMove>,
    pattern: Pattern,
) -> Result<CoveragePlan, PlanError> {
    let total = nf.total_s();
    let mut cover = Coverage::new(total);
    let mut lane_done = vec![false; nf.lane_count() + 1];
    let mut moves: Vec<PlanMove> = Vec::new();
    let mut lane_order = Vec::new();

    for mv in raw {
        match mv {
            RawMove::Lane { lane, dir } => {
                let working = !lane_done[lane];
                lane_done[lane] = true;
                if working {
                    lane_order.push((lane, dir));
                }
                moves.push(PlanMove::Lane {
                    lane,
                    dir,
                    working,
                    len: nf.lane(lane).len(),
                });
            }
            RawMove::Hl { from_s, span, dir } => {
                // Chunk to single laps so a circuit marks itself covered.
                let mut off = 0.0;
                while off < span - 1e-9 {
                    let chunk = (span - off).min(total);
                    let chunk_from = match dir {
                        HlDir::Ccw => nf.headland.wrap(from_s + off),
                        HlDir::Cw => nf.headland.wrap(from_s - off),
                    };
                    for (o, l, covered) in cover.split(chunk_from, chunk, dir) {
                        let piece_from = match dir {
                            HlDir::Ccw => nf.headland.wrap(chunk_from + o),
                            HlDir::Cw => nf.headland.wrap(chunk_from - o),
                        };
                        moves.push(PlanMove::Headland {
                            from_s: piece_from,
                            span: l,
                            dir,
                            working: !covered,
                            len: headland_metric_len(nf, piece_from, l, dir),
                        });
                    }
                    let mark_from = match dir {
                        HlDir::Ccw => chunk_from,
                        HlDir::Cw => chunk_from - chunk,
                    };
                    cover.insert(mark_from, chunk);
                    off += chunk;
                }
            }
        }
    }

    let mut length = 0.0;
    let mut working_length = 0.0;
    for m in &moves {
        length += m.metric_len();
        if m.working() {
            working_length += m.metric_len();
        }
    }
    for k in 1..moves.len() {
        let cut = junction_cut(nf, &moves[k - 1], &moves[k]);
        length -= cut;
        if moves[k - 1].working() && moves[k].working() {
            working_length -= cut;
        }
    }

    Ok(CoveragePlan {
        pattern,
        moves,
        lane_order,
        length,
        working_length,
        start_s: nf.entrance_s,
        end_s: nf.exit_s,
    })
}

/// Travel direction of a move at its start or end.
fn move_dir(nf: &NormalizedField, m: &PlanMove, at_start: bool) -> Point2 {
    match *m {
        PlanMove::Lane { dir, .. } => match dir {
            LaneDir::Up => Point2::new(0.0, 1.0),
            LaneDir::Down => Point2::new(0.0, -1.0),
        },
        PlanMove::Headland {
            from_s, span, dir, ..
        } => {
            let probe = 1e-7;
            let s = match (at_start, dir) {
                (true, HlDir::Ccw) => from_s + probe,
                (true, HlDir::Cw) => from_s - probe,
                (false, HlDir::Ccw) => from_s + span - probe,
                (false, HlDir::Cw) => from_s - span + probe,
            };
            let t = nf.tangent_at_s(s);
            match dir {
                HlDir::Ccw => t,
                HlDir::Cw => t.scale(-1.0),
            }
        }
    }
}

/// Deviation angle of the junction turn between two consecutive moves
/// (zero for headland-to-headland continuations).
fn junction_deviation(nf: &NormalizedField, a: &PlanMove, b: &PlanMove) -> f64 {
    let lane_hl = matches!(
        (a, b),
        (PlanMove::Lane { .. }, PlanMove::Headland { .. })
            | (PlanMove::Headland { .. }, PlanMove::Lane { .. })
    );
    if !lane_hl {
        return 0.0;
    }
    turn_deviation(move_dir(nf, a, false), move_dir(nf, b, true))
}

fn junction_cut(nf: &NormalizedField, a: &PlanMove, b: &PlanMove) -> f64 {
    fillet_cut(junction_deviation(nf, a, b), nf.turning_radius)
}

/// Close a plan whose last lane exits onto the headland with the given
/// heading: establish the exit arc, route the shortest admissible path to
/// the exit position, and append it as transit moves.
fn finalize_with_ride_home(
    nf: &NormalizedField,
    mut raw: Vec<RawMove>,
    pattern: Pattern,
    exit_node_s: f64,
    exit_heading: Heading,
) -> Result<CoveragePlan, PlanError> {
    let draft = finalize(nf, raw.clone(), pattern)?;
    let net = Network::build(nf);
    let mut traces = derive_traces(&net, &draft)?;
    let node = net
        .nodes
        .iter()
        .position(|nd| {
            (nd.s - exit_node_s).abs() < 1e-6
                || (nf.total_s() - (nd.s - exit_node_s).abs()) < 1e-6
        })
        .ok_or_else(|| GraphError::PlanFieldMismatch("exit junction is not a node".into()))?;
    let exit_edge = match exit_heading {
        Heading::Ccw => net.nodes[node].hl_next,
        Heading::Cw => net.nodes[node].hl_prev,
        _ => unreachable!("exit heading is along the headland"),
    };
    traces.insert((node, exit_edge));
    let g = TransitionGraph::with_traces(net, traces);
    let ride = g.shortest_path_directed(
        NetPos::Headland { s: exit_node_s },
        Some(exit_heading),
        NetPos::Headland { s: nf.exit_s },
        None,
    )?;
    for step in &ride.steps {
        match *step {
            RouteStep::Headland {
                from_s, dir, span, ..
            } => raw.push(RawMove::Hl { from_s, span, dir }),
            RouteStep::Lane { lane, from_t, to_t } => raw.push(RawMove::Lane {
                lane,
                dir: if to_t > from_t {
                    LaneDir::Up
                } else {
                    LaneDir::Down
                },
            }),
        }
    }
    finalize(nf, raw, pattern)
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

/// Turn arcs established by a plan, as `(junction node, headland edge)`.
pub fn derive_traces(net: &Network, plan: &CoveragePlan) -> Result<TraceSet, GraphError> {
    let nf = &net.nf;
    if plan
        .lane_order
        .iter()
        .any(|&(lane, _)| lane == 0 || lane > nf.lane_count())
    {
        return Err(GraphError::PlanFieldMismatch(format!(
            "plan uses lanes outside 1..={}",
            nf.lane_count()
        )));
    }
    let mut arcs = TraceSet::new();
    let node_at = |s: f64| -> Result<usize, GraphError> {
        net.nodes
            .iter()
            .position(|nd| {
                (nd.s - s).abs() < 1e-6 || (nf.total_s() - (nd.s - s).abs()) < 1e-6
            })
            .ok_or_else(|| {
                GraphError::PlanFieldMismatch(format!("no junction node at s={s:.3}"))
            })
    };
    for w in plan.moves.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        match (a, b) {
            (PlanMove::Lane { lane, dir, .. }, PlanMove::Headland { from_s, dir: hd, .. }) => {
                let node = node_at(*from_s)?;
                let expect = match dir {
                    LaneDir::Down => nf.lane(*lane).s_lo,
                    LaneDir::Up => nf.lane(*lane).s_hi,
                };
                if nf.ccw_dist(expect, *from_s).min(nf.ccw_dist(*from_s, expect)) > 1e-6 {
                    return Err(GraphError::PlanFieldMismatch(format!(
                        "lane {lane} end does not meet the following headland move"
                    )));
                }
                let edge = match hd {
                    HlDir::Ccw => net.nodes[node].hl_next,
                    HlDir::Cw => net.nodes[node].hl_prev,
                };
                arcs.insert((node, edge));
            }
            (PlanMove::Headland { dir, .. }, PlanMove::Lane { .. }) => {
                let end_s = a.headland_end(nf).unwrap();
                let node = node_at(end_s)?;
                if net.nodes[node].lane_edge.is_none() {
                    return Err(GraphError::PlanFieldMismatch(
                        "headland move ends at a non-junction before a lane".into(),
                    ));
                }
                let edge = match dir {
                    HlDir::Ccw => net.nodes[node].hl_prev,
                    HlDir::Cw => net.nodes[node].hl_next,
                };
                arcs.insert((node, edge));
            }
            _ => {}
        }
    }
    Ok(arcs)
}

/// Routed graph for a plan: the network plus the plan's established arcs.
pub fn establish_traces(
    g: &TransitionGraph,
    plan: &CoveragePlan,
) -> Result<TransitionGraph, GraphError> {
    let traces = derive_traces(&g.net, plan)?;
    Ok(TransitionGraph::with_traces(g.net.clone(), traces))
}

// ---------------------------------------------------------------------------
// Atomisation and geometric realisation
// ---------------------------------------------------------------------------

/// Smallest executable piece of a plan: a straight run or a turn fillet.
#[derive(Clone, Debug)]
pub struct Atom {
    pub len: f64,
    pub working: bool,
    pub kind: AtomKind,
}

#[derive(Clone, Debug)]
pub enum AtomKind {
    /// Straight lane piece from `t0` to `t1` (distances from the lane's
    /// lower node; `t1 < t0` means downward travel).
    LaneRun { lane: usize, t0: f64, t1: f64 },
    /// Corner-free headland piece of `span` arc length from `from_s`.
    HlRun { from_s: f64, span: f64, dir: HlDir },
    /// Turn fillet at a junction or polyline corner.
    Turn { at: Point2, deviation: f64 },
}

/// Decompose a plan into straight runs and turn fillets for radius `r`.
/// Atom lengths sum to the plan length when `r` equals the field's radius.
pub fn atomize(nf: &NormalizedField, plan: &CoveragePlan, r: f64) -> Result<Vec<Atom>, PlanError> {
    let mut atoms: Vec<Atom> = Vec::new();
    let n_moves = plan.moves.len();
    for (k, mv) in plan.moves.iter().enumerate() {
        let dev_prev = if k == 0 {
            0.0
        } else {
            junction_deviation(nf, &plan.moves[k - 1], mv)
        };
        let dev_next = if k + 1 == n_moves {
            0.0
        } else {
            junction_deviation(nf, mv, &plan.moves[k + 1])
        };
        let trim_start = fillet_trim(dev_prev, r);
        let trim_end = fillet_trim(dev_next, r);
        if dev_prev > 1e-12 && r > 0.0 {
            let at = match mv {
                PlanMove::Lane { lane, dir, .. } => {
                    let lg = nf.lane(*lane);
                    match dir {
                        LaneDir::Up => lg.lower(),
                        LaneDir::Down => lg.upper(),
                    }
                }
                PlanMove::Headland { from_s, .. } => nf.point_at_s(*from_s),
            };
            let working = plan.moves[k - 1].working() && mv.working();
            atoms.push(Atom {
                len: r * dev_prev,
                working,
                kind: AtomKind::Turn {
                    at,
                    deviation: dev_prev,
                },
            });
        }
        match mv {
            PlanMove::Lane {
                lane,
                dir,
                working,
                len,
            } => {
                let run = len - trim_start - trim_end;
                if run < -1e-9 {
                    return Err(PlanError::TurnInfeasible(format!(
                        "lane {lane} shorter than its turn fillets"
                    )));
                }
                let (t0, t1) = match dir {
                    LaneDir::Up => (trim_start, len - trim_end),
                    LaneDir::Down => (len - trim_start, trim_end),
                };
                atoms.push(Atom {
                    len: run.max(0.0),
                    working: *working,
                    kind: AtomKind::LaneRun {
                        lane: *lane,
                        t0,
                        t1,
                    },
                });
            }
            PlanMove::Headland {
                from_s,
                span,
                dir,
                working,
                ..
            } => {
                let start = match dir {
                    HlDir::Ccw => *from_s,
                    HlDir::Cw => *from_s - *span,
                };
                let corners = nf.corners_within(start, *span);
                let rel_of = |s: f64| -> f64 {
                    match dir {
                        HlDir::Ccw => nf.ccw_dist(*from_s, s),
                        HlDir::Cw => nf.ccw_dist(s, *from_s),
                    }
                };
                let mut marks: Vec<(f64, f64)> =
                    corners.iter().map(|&(s, dev)| (rel_of(s), dev)).collect();
                if *span > nf.total_s() {
                    // Multi-lap moves repeat their corners each lap.
                    let mut extra = Vec::new();
                    for &(rel, dev) in &marks {
                        let mut rr = rel + nf.total_s();
                        while rr < *span - 1e-9 {
                            extra.push((rr, dev));
                            rr += nf.total_s();
                        }
                    }
                    marks.extend(extra);
                }
                marks.retain(|&(rel, _)| rel > 1e-9 && rel < *span - 1e-9);
                marks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                marks.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9);

                let mut cursor = 0.0;
                let mut lead_trim = trim_start;
                for &(rel, dev) in &marks {
                    let t = fillet_trim(dev, r);
                    let run = rel - cursor - lead_trim - t;
                    if run < -1e-9 {
                        return Err(PlanError::TurnInfeasible(format!(
                            "headland piece near s={from_s:.3} shorter than its fillets"
                        )));
                    }
                    push_hl_run(
                        &mut atoms,
                        nf,
                        *from_s,
                        cursor + lead_trim,
                        run.max(0.0),
                        *dir,
                        *working,
                    );
                    if r > 0.0 && dev > 1e-12 {
                        let s_at = match dir {
                            HlDir::Ccw => nf.headland.wrap(*from_s + rel),
                            HlDir::Cw => nf.headland.wrap(*from_s - rel),
                        };
                        atoms.push(Atom {
                            len: r * dev,
                            working: *working,
                            kind: AtomKind::Turn {
                                at: nf.point_at_s(s_at),
                                deviation: dev,
                            },
                        });
                    }
                    cursor = rel + t;
                    lead_trim = 0.0;
                }
                let run = *span - cursor - lead_trim - trim_end;
                if run < -1e-9 {
                    return Err(PlanError::TurnInfeasible(format!(
                        "headland piece near s={from_s:.3} shorter than its fillets"
                    )));
                }
                push_hl_run(
                    &mut atoms,
                    nf,
                    *from_s,
                    cursor + lead_trim,
                    run.max(0.0),
                    *dir,
                    *working,
                );
            }
        }
    }
    Ok(atoms)
}

fn push_hl_run(
    atoms: &mut Vec<Atom>,
    nf: &NormalizedField,
    move_from: f64,
    rel: f64,
    span: f64,
    dir: HlDir,
    working: bool,
) {
    if span <= 1e-12 {
        return;
    }
    let from_s = match dir {
        HlDir::Ccw => nf.headland.wrap(move_from + rel),
        HlDir::Cw => nf.headland.wrap(move_from - rel),
    };
    atoms.push(Atom {
        len: span,
        working,
        kind: AtomKind::HlRun { from_s, span, dir },
    });
}

/// Geometric path segments in the normalised frame.
#[derive(Clone, Debug)]
pub enum GeomSeg {
    Line {
        a: Point2,
        b: Point2,
        working: bool,
    },
    Arc {
        center: Point2,
        radius: f64,
        start_ang: f64,
        /// Signed sweep, ccw positive.
        sweep: f64,
        working: bool,
    },
}

impl GeomSeg {
    pub fn len(&self) -> f64 {
        match self {
            GeomSeg::Line { a, b, .. } => a.dist(*b),
            GeomSeg::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub fn working(&self) -> bool {
        match self {
            GeomSeg::Line { working, .. } => *working,
            GeomSeg::Arc { working, .. } => *working,
        }
    }

    pub fn start(&self) -> Point2 {
        match self {
            GeomSeg::Line { a, .. } => *a,
            GeomSeg::Arc {
                center,
                radius,
                start_ang,
                ..
            } => center.add(Point2::new(start_ang.cos(), start_ang.sin()).scale(*radius)),
        }
    }

    pub fn end(&self) -> Point2 {
        match self {
            GeomSeg::Line { b, .. } => *b,
            GeomSeg::Arc {
                center,
                radius,
                start_ang,
                sweep,
                ..
            } => {
                let a = start_ang + sweep;
                center.add(Point2::new(a.cos(), a.sin()).scale(*radius))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeomPath {
    pub segs: Vec<GeomSeg>,
    pub length: f64,
}

/// Render a plan as straights plus fillet arcs of radius `r`. With `r = 0`
/// this is the abstract rectilinear path itself.
pub fn realize_geometry(
    nf: &NormalizedField,
    plan: &CoveragePlan,
    r: f64,
) -> Result<GeomPath, PlanError> {
    if r > 0.0 && nf.lane_count() >= 2 {
        let spacing = nf.lane(2).x - nf.lane(1).x;
        if spacing <= 2.0 * r {
            return Err(PlanError::TurnInfeasible(format!(
                "adjacent-lane turn needs spacing > 2R (spacing {spacing:.3}, R {r:.3})"
            )));
        }
    }
    let atoms = atomize(nf, plan, r)?;
    let mut segs: Vec<GeomSeg> = Vec::new();
    let mut length = 0.0;
    for (i, atom) in atoms.iter().enumerate() {
        length += atom.len;
        match &atom.kind {
            AtomKind::LaneRun { lane, t0, t1 } => {
                let lg = nf.lane(*lane);
                segs.push(GeomSeg::Line {
                    a: Point2::new(lg.x, lg.y_lo + t0),
                    b: Point2::new(lg.x, lg.y_lo + t1),
                    working: atom.working,
                });
            }
            AtomKind::HlRun { from_s, span, dir } => {
                let to_s = match dir {
                    HlDir::Ccw => from_s + span,
                    HlDir::Cw => from_s - span,
                };
                segs.push(GeomSeg::Line {
                    a: nf.point_at_s(*from_s),
                    b: nf.point_at_s(to_s),
                    working: atom.working,
                });
            }
            AtomKind::Turn { deviation, .. } => {
                let (p_in, u) = match segs.last() {
                    Some(s) => (s.end(), s.end().sub(s.start()).unit()),
                    None => (nf.point_at_s(plan.start_s), Point2::new(1.0, 0.0)),
                };
                let v = atoms[i + 1..]
                    .iter()
                    .find_map(|a| match &a.kind {
                        AtomKind::LaneRun { t0, t1, .. } => Some(if t1 > t0 {
                            Point2::new(0.0, 1.0)
                        } else {
                            Point2::new(0.0, -1.0)
                        }),
                        AtomKind::HlRun { from_s, dir, .. } => {
                            let probe = 1e-7;
                            let t = nf.tangent_at_s(match dir {
                                HlDir::Ccw => *from_s + probe,
                                HlDir::Cw => *from_s - probe,
                            });
                            Some(match dir {
                                HlDir::Ccw => t,
                                HlDir::Cw => t.scale(-1.0),
                            })
                        }
                        AtomKind::Turn { .. } => None,
                    })
                    .unwrap_or(u);
                let left = u.cross(v) > 0.0;
                let nperp = if left { u.perp() } else { u.perp().scale(-1.0) };
                let center = p_in.add(nperp.scale(r));
                let rad_vec = p_in.sub(center);
                let start_ang = rad_vec.y.atan2(rad_vec.x);
                let sweep = if left { *deviation } else { -*deviation };
                segs.push(GeomSeg::Arc {
                    center,
                    radius: r,
                    start_ang,
                    sweep,
                    working: atom.working,
                });
            }
        }
    }
    Ok(GeomPath { segs, length })
}
