//! Transition graph over the headland loop and interior lanes.
//!
//! Nodes sit where lanes meet the headland, at the entrance/exit, and at the
//! midpoint of each headland end cap (the caps keep every node pair joined by
//! at most one edge). Edge weights are metric path lengths; polyline corners
//! interior to a headland edge are pre-discounted by their fillet cut, and
//! every junction turn taken by a path discounts one more fillet.
//!
//! Admissibility encodes the established-trace constraint: motion along the
//! headland passes any junction freely, but a turn between a lane and the
//! headland exists only where the coverage plan laid a turn arc, and an arc
//! joins the lane to exactly one side of the junction. Arcs are usable in
//! both directions. Reversing on the spot (a U-turn at a node) is never
//! admissible, so路 queries track heading through every junction.

use crate::field::NormalizedField;
use crate::geom::{fillet_cut, turn_deviation, Point2};
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use thiserror::Error;

const EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("no admissible route between the given positions")]
    Unreachable,
    #[error("plan does not fit this field: {0}")]
    PlanFieldMismatch(String),
    #[error("position off the network: {0}")]
    OffNetwork(String),
}

/// Roles a node can play; a node may hold several when positions coincide.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    /// Lower end of lane `i` (1-based).
    LaneBottom(usize),
    /// Upper end of lane `i` (1-based).
    LaneTop(usize),
    Entrance,
    Exit,
    /// Midpoint of the headland stretch wrapping around the first lane.
    WestCap,
    /// Midpoint of the headland stretch wrapping around the last lane.
    EastCap,
}

#[derive(Clone, Debug)]
pub struct Node {
    pub s: f64,
    pub pos: Point2,
    pub kinds: Vec<NodeKind>,
    /// Incident headland edges: arriving ccw / departing ccw.
    pub hl_prev: usize,
    pub hl_next: usize,
    pub lane_edge: Option<usize>,
}

impl Node {
    pub fn is_lane_end(&self) -> bool {
        self.lane_edge.is_some()
    }

    pub fn lane_index(&self) -> Option<(usize, bool)> {
        self.kinds.iter().find_map(|k| match k {
            NodeKind::LaneBottom(i) => Some((*i, false)),
            NodeKind::LaneTop(i) => Some((*i, true)),
            _ => None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Headland,
    Lane,
}

#[derive(Clone, Debug)]
pub struct Edge {
    /// Tail node; for headland edges `b` is the ccw successor of `a`.
    pub a: usize,
    pub b: usize,
    pub kind: EdgeKind,
    pub lane: Option<usize>,
    /// Metric weight: raw length minus interior-corner fillet cuts.
    pub weight: f64,
    pub raw_len: f64,
    /// Headland arc-length coordinates of the endpoints (`s_b` reached from
    /// `s_a` going ccw).
    pub s_a: f64,
    pub s_b: f64,
}

/// Static node/edge structure shared by the planners and the routed graph.
#[derive(Clone, Debug)]
pub struct Network {
    pub nf: NormalizedField,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl Network {
    pub fn build(nf: &NormalizedField) -> Network {
        let n = nf.lane_count();
        let mut marks: Vec<(f64, NodeKind)> = Vec::new();
        for (i, lane) in nf.lanes.iter().enumerate() {
            marks.push((lane.s_lo, NodeKind::LaneBottom(i + 1)));
            marks.push((lane.s_hi, NodeKind::LaneTop(i + 1)));
        }
        marks.push((nf.entrance_s, NodeKind::Entrance));
        marks.push((nf.exit_s, NodeKind::Exit));
        let west = (nf.lane(1).s_hi + nf.lane(1).s_lo) / 2.0;
        let east = (nf.lane(n).s_lo + nf.lane(n).s_hi) / 2.0;
        marks.push((west, NodeKind::WestCap));
        marks.push((east, NodeKind::EastCap));
        marks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let total = nf.total_s();
        let mut nodes: Vec<Node> = Vec::new();
        for (s, kind) in marks {
            let coincides = nodes
                .last()
                .map(|nd: &Node| (s - nd.s).abs() < 1e-9)
                .unwrap_or(false)
                || (nodes.first().is_some()
                    && (total - s + nodes[0].s).abs() < 1e-9);
            if coincides {
                if (s - nodes.last().unwrap().s).abs() < 1e-9 {
                    nodes.last_mut().unwrap().kinds.push(kind);
                } else {
                    nodes[0].kinds.push(kind);
                }
            } else {
                nodes.push(Node {
                    s,
                    pos: nf.point_at_s(s),
                    kinds: vec![kind],
                    hl_prev: usize::MAX,
                    hl_next: usize::MAX,
                    lane_edge: None,
                });
            }
        }

        let mut edges: Vec<Edge> = Vec::new();
        let count = nodes.len();
        for i in 0..count {
            let j = (i + 1) % count;
            let s_a = nodes[i].s;
            let s_b = nodes[j].s;
            let span = nf.ccw_dist(s_a, s_b);
            let span = if span < 1e-9 { total } else { span };
            let cuts: f64 = nf
                .corners_within(s_a, span)
                .iter()
                .map(|&(_, dev)| fillet_cut(dev, nf.turning_radius))
                .sum();
            let id = edges.len();
            edges.push(Edge {
                a: i,
                b: j,
                kind: EdgeKind::Headland,
                lane: None,
                weight: span - cuts,
                raw_len: span,
                s_a,
                s_b,
            });
            nodes[i].hl_next = id;
            nodes[j].hl_prev = id;
        }

        let find_node = |nodes: &[Node], pred: &dyn Fn(&NodeKind) -> bool| -> usize {
            nodes
                .iter()
                .position(|nd| nd.kinds.iter().any(|k| pred(k)))
                .expect("node present")
        };
        for i in 1..=n {
            let bot = find_node(&nodes, &|k| matches!(k, NodeKind::LaneBottom(l) if *l == i));
            let top = find_node(&nodes, &|k| matches!(k, NodeKind::LaneTop(l) if *l == i));
            let id = edges.len();
            let len = nf.lane(i).len();
            edges.push(Edge {
                a: bot,
                b: top,
                kind: EdgeKind::Lane,
                lane: Some(i),
                weight: len,
                raw_len: len,
                s_a: 0.0,
                s_b: 0.0,
            });
            nodes[bot].lane_edge = Some(id);
            nodes[top].lane_edge = Some(id);
        }

        Network {
            nf: nf.clone(),
            nodes,
            edges,
        }
    }

    pub fn node_with(&self, pred: impl Fn(&NodeKind) -> bool) -> Option<usize> {
        self.nodes
            .iter()
            .position(|nd| nd.kinds.iter().any(|k| pred(k)))
    }

    pub fn entrance_node(&self) -> usize {
        self.node_with(|k| matches!(k, NodeKind::Entrance)).unwrap()
    }

    pub fn exit_node(&self) -> usize {
        self.node_with(|k| matches!(k, NodeKind::Exit)).unwrap()
    }

    pub fn lane_bottom(&self, lane: usize) -> usize {
        self.node_with(|k| matches!(k, NodeKind::LaneBottom(l) if *l == lane))
            .unwrap()
    }

    pub fn lane_top(&self, lane: usize) -> usize {
        self.node_with(|k| matches!(k, NodeKind::LaneTop(l) if *l == lane))
            .unwrap()
    }

    pub fn lane_edge_id(&self, lane: usize) -> usize {
        self.nodes[self.lane_bottom(lane)].lane_edge.unwrap()
    }

    /// Travel direction along a headland edge when arriving at node `at`.
    fn hl_dir_at(&self, edge: &Edge, at: usize, arriving: bool) -> Point2 {
        let ccw = if arriving { edge.b == at } else { edge.a == at };
        let probe = 1e-7;
        let s = self.nodes[at].s;
        if ccw {
            if arriving {
                self.nf.tangent_at_s(s - probe)
            } else {
                self.nf.tangent_at_s(s + probe)
            }
        } else {
            let t = if arriving {
                self.nf.tangent_at_s(s + probe)
            } else {
                self.nf.tangent_at_s(s - probe)
            };
            t.scale(-1.0)
        }
    }

    /// Travel direction along a lane edge at node `at`.
    fn lane_dir_at(&self, edge: &Edge, at: usize, arriving: bool) -> Point2 {
        let upward = if arriving { edge.b == at } else { edge.a == at };
        if upward {
            Point2::new(0.0, 1.0)
        } else {
            Point2::new(0.0, -1.0)
        }
    }

    fn travel_dir(&self, edge: &Edge, at: usize, arriving: bool) -> Point2 {
        match edge.kind {
            EdgeKind::Headland => self.hl_dir_at(edge, at, arriving),
            EdgeKind::Lane => self.lane_dir_at(edge, at, arriving),
        }
    }

    /// Fillet cut for the turn at `node` from `e_in` onto `e_out`.
    pub fn turn_cut(&self, node: usize, e_in: usize, e_out: usize) -> f64 {
        let din = self.travel_dir(&self.edges[e_in], node, true);
        let dout = self.travel_dir(&self.edges[e_out], node, false);
        fillet_cut(turn_deviation(din, dout), self.nf.turning_radius)
    }
}

/// Established turn arcs: `(junction node, headland edge)` pairs.
pub type TraceSet = std::collections::BTreeSet<(usize, usize)>;

/// Position on the headland/lane network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NetPos {
    /// On lane `lane` at distance `t` from the lower end (0 ≤ t ≤ lane len).
    Lane { lane: usize, t: f64 },
    /// On the headland at arc-length coordinate `s`.
    Headland { s: f64 },
}

/// Travel heading at a network position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Heading {
    LaneUp,
    LaneDown,
    /// Along increasing `s`.
    Ccw,
    /// Along decreasing `s`.
    Cw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HlDir {
    Ccw,
    Cw,
}

/// One traversal within a routed path.
#[derive(Clone, Debug)]
pub enum RouteStep {
    Lane {
        lane: usize,
        from_t: f64,
        to_t: f64,
    },
    Headland {
        from_s: f64,
        to_s: f64,
        dir: HlDir,
        span: f64,
    },
}

impl RouteStep {
    pub fn is_full_lane(&self, lane_len: f64) -> Option<usize> {
        match self {
            RouteStep::Lane { lane, from_t, to_t } => {
                ((from_t - to_t).abs() >= lane_len - 1e-6).then_some(*lane)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RoutePath {
    pub length: f64,
    pub steps: Vec<RouteStep>,
}

impl RoutePath {
    pub fn zero() -> Self {
        RoutePath {
            length: 0.0,
            steps: Vec::new(),
        }
    }

    /// Lanes the path traverses end to end.
    pub fn full_lanes(&self, net: &Network) -> Vec<usize> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                RouteStep::Lane { lane, .. } => {
                    s.is_full_lane(net.nf.lane(*lane).len()).map(|_| *lane)
                }
                _ => None,
            })
            .collect()
    }

    pub fn uses_lane(&self, lane: usize) -> bool {
        self.steps
            .iter()
            .any(|s| matches!(s, RouteStep::Lane { lane: l, .. } if *l == lane))
    }
}

/// Routed view of the network: structure plus established traces.
#[derive(Clone, Debug)]
pub struct TransitionGraph {
    pub net: Network,
    pub traces: TraceSet,
    /// Lane edges removed from routing (used by reachability checks).
    disabled_edges: Vec<usize>,
}

pub fn build_graph(nf: &NormalizedField) -> TransitionGraph {
    TransitionGraph {
        net: Network::build(nf),
        traces: TraceSet::new(),
        disabled_edges: Vec::new(),
    }
}

impl TransitionGraph {
    pub fn with_traces(net: Network, traces: TraceSet) -> Self {
        TransitionGraph {
            net,
            traces,
            disabled_edges: Vec::new(),
        }
    }

    /// Copy with one lane edge removed (its junction nodes stay).
    pub fn without_lane(&self, lane: usize) -> TransitionGraph {
        let mut g = self.clone();
        g.disabled_edges.push(self.net.lane_edge_id(lane));
        g
    }

    /// Copy with an arbitrary edge removed.
    pub fn without_edge(&self, edge: usize) -> TransitionGraph {
        let mut g = self.clone();
        g.disabled_edges.push(edge);
        g
    }

    /// Turn admissibility at `node` from `e_in` onto `e_out`.
    pub fn admissible_turn(&self, node: usize, e_in: usize, e_out: usize) -> bool {
        if e_in == e_out {
            return false; // U-turn
        }
        let kin = self.net.edges[e_in].kind;
        let kout = self.net.edges[e_out].kind;
        match (kin, kout) {
            (EdgeKind::Headland, EdgeKind::Headland) => true,
            (EdgeKind::Lane, EdgeKind::Headland) => self.traces.contains(&(node, e_out)),
            (EdgeKind::Headland, EdgeKind::Lane) => self.traces.contains(&(node, e_in)),
            (EdgeKind::Lane, EdgeKind::Lane) => false,
        }
    }

    pub fn entrance_pos(&self) -> NetPos {
        NetPos::Headland {
            s: self.net.nf.entrance_s,
        }
    }

    /// Minimum-length admissible path, heading free at both ends.
    pub fn shortest_path(&self, from: NetPos, to: NetPos) -> Result<RoutePath, GraphError> {
        self.shortest_path_directed(from, None, to, None)
    }

    /// Minimum-length admissible path with optional heading constraints at
    /// the start (current travel direction) and at the goal (arrival
    /// direction).
    pub fn shortest_path_directed(
        &self,
        from: NetPos,
        from_heading: Option<Heading>,
        to: NetPos,
        to_heading: Option<Heading>,
    ) -> Result<RoutePath, GraphError> {
        let q = QueryNet::build(self, &[from, to])?;
        q.dijkstra(self, from_heading, to_heading)
    }

    /// Plain-text adjacency listing for golden-file tests.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, nd) in self.net.nodes.iter().enumerate() {
            let kinds: Vec<String> = nd.kinds.iter().map(|k| format!("{k:?}")).collect();
            let _ = writeln!(
                out,
                "node {i} s={:.3} pos=({:.3},{:.3}) [{}]",
                nd.s,
                nd.pos.x,
                nd.pos.y,
                kinds.join(",")
            );
            let mut inc: Vec<usize> = vec![nd.hl_prev, nd.hl_next];
            if let Some(le) = nd.lane_edge {
                inc.push(le);
            }
            inc.sort_unstable();
            inc.dedup();
            for e in inc {
                let ed = &self.net.edges[e];
                let other = if ed.a == i { ed.b } else { ed.a };
                let _ = writeln!(
                    out,
                    "  edge {e} -> node {other} {:?} w={:.3}",
                    ed.kind, ed.weight
                );
            }
        }
        for &(n, e) in &self.traces {
            let _ = writeln!(out, "arc node {n} edge {e}");
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Query machinery: edge splitting plus Dijkstra over directed edge states.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct QNode {
    /// Backing network node, when not a split point.
    orig: Option<usize>,
    pos_on_net: NetPos,
}

#[derive(Clone, Debug)]
struct QEdge {
    a: usize,
    b: usize,
    orig: usize,
    w: f64,
    kind: EdgeKind,
    lane: Option<usize>,
    /// Geometry anchors at the endpoints: lane t or headland s.
    pa: f64,
    pb: f64,
}

struct QueryNet {
    nodes: Vec<QNode>,
    edges: Vec<QEdge>,
    adj: Vec<Vec<usize>>,
    start: usize,
    goal: usize,
}

impl QueryNet {
    fn build(g: &TransitionGraph, positions: &[NetPos; 2]) -> Result<QueryNet, GraphError> {
        let net = &g.net;
        let mut nodes: Vec<QNode> = net
            .nodes
            .iter()
            .enumerate()
            .map(|(i, nd)| QNode {
                orig: Some(i),
                pos_on_net: NetPos::Headland { s: nd.s },
            })
            .collect();
        let mut edges: Vec<QEdge> = net
            .edges
            .iter()
            .enumerate()
            .filter(|(id, _)| !g.disabled_edges.contains(id))
            .map(|(id, e)| QEdge {
                a: e.a,
                b: e.b,
                orig: id,
                w: e.weight,
                kind: e.kind,
                lane: e.lane,
                pa: if e.kind == EdgeKind::Lane { 0.0 } else { e.s_a },
                pb: if e.kind == EdgeKind::Lane {
                    e.raw_len
                } else {
                    e.s_b
                },
            })
            .collect();

        let mut anchors = [0usize; 2];
        for (slot, pos) in positions.iter().enumerate() {
            anchors[slot] = Self::locate(g, &mut nodes, &mut edges, *pos)?;
        }
        let mut adj = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            adj[e.a].push(i);
            adj[e.b].push(i);
        }
        Ok(QueryNet {
            nodes,
            edges,
            adj,
            start: anchors[0],
            goal: anchors[1],
        })
    }

    /// Find or create the node carrying `pos`, splitting an edge if needed.
    fn locate(
        g: &TransitionGraph,
        nodes: &mut Vec<QNode>,
        edges: &mut Vec<QEdge>,
        pos: NetPos,
    ) -> Result<usize, GraphError> {
        let net = &g.net;
        match pos {
            NetPos::Headland { s } => {
                let s = net.nf.headland.wrap(s);
                // Existing (or previously split) node?
                if let Some(i) = nodes.iter().position(|qn| match qn.orig {
                    Some(o) => {
                        let ns = net.nodes[o].s;
                        (ns - s).abs() < 1e-9 || (net.nf.total_s() - (ns - s).abs()) < 1e-9
                    }
                    None => matches!(qn.pos_on_net, NetPos::Headland { s: ss }
                        if (ss - s).abs() < 1e-9
                            || (net.nf.total_s() - (ss - s).abs()) < 1e-9),
                }) {
                    return Ok(i);
                }
                // Containing headland edge (by ccw span from the tail).
                let eid = edges
                    .iter()
                    .position(|e| {
                        if e.kind != EdgeKind::Headland {
                            return false;
                        }
                        let span = net.nf.ccw_dist(e.pa, e.pb);
                        let span = if span < 1e-9 { net.nf.total_s() } else { span };
                        let off = net.nf.ccw_dist(e.pa, s);
                        off > 1e-9 && off < span - 1e-9
                    })
                    .ok_or_else(|| {
                        GraphError::OffNetwork(format!("headland s={s:.3} not on any edge"))
                    })?;
                Ok(Self::split_edge(net, nodes, edges, eid, pos))
            }
            NetPos::Lane { lane, t } => {
                if lane < 1 || lane > net.nf.lane_count() {
                    return Err(GraphError::OffNetwork(format!("no lane {lane}")));
                }
                let len = net.nf.lane(lane).len();
                if t < -1e-9 || t > len + 1e-9 {
                    return Err(GraphError::OffNetwork(format!(
                        "lane {lane} offset {t:.3} outside [0, {len:.3}]"
                    )));
                }
                if t < 1e-9 {
                    return Ok(net.lane_bottom(lane));
                }
                if t > len - 1e-9 {
                    return Ok(net.lane_top(lane));
                }
                // Already split there?
                if let Some(i) = nodes.iter().position(|qn| {
                    matches!(qn.pos_on_net, NetPos::Lane { lane: l, t: tt }
                        if l == lane && (tt - t).abs() < 1e-9)
                }) {
                    return Ok(i);
                }
                let eid = edges
                    .iter()
                    .position(|e| e.kind == EdgeKind::Lane && e.lane == Some(lane)
                        && e.pa < t && t < e.pb)
                    .ok_or_else(|| {
                        GraphError::OffNetwork(format!("lane {lane} edge missing"))
                    })?;
                Ok(Self::split_edge(net, nodes, edges, eid, pos))
            }
        }
    }

    fn split_edge(
        net: &Network,
        nodes: &mut Vec<QNode>,
        edges: &mut Vec<QEdge>,
        eid: usize,
        pos: NetPos,
    ) -> usize {
        let e = edges[eid].clone();
        let new_node = nodes.len();
        nodes.push(QNode {
            orig: None,
            pos_on_net: pos,
        });
        let (wa, wb, pm) = match pos {
            NetPos::Lane { t, .. } => (t - e.pa, e.pb - t, t),
            NetPos::Headland { s } => {
                let s = net.nf.headland.wrap(s);
                let r = net.nf.turning_radius;
                let left_span = net.nf.ccw_dist(e.pa, s);
                let right_span = net.nf.ccw_dist(s, e.pb);
                let cut = |s0: f64, len: f64| -> f64 {
                    net.nf
                        .corners_within(s0, len)
                        .iter()
                        .map(|&(_, dev)| fillet_cut(dev, r))
                        .sum()
                };
                (
                    left_span - cut(e.pa, left_span),
                    right_span - cut(s, right_span),
                    s,
                )
            }
        };
        edges[eid] = QEdge {
            a: e.a,
            b: new_node,
            orig: e.orig,
            w: wa,
            kind: e.kind,
            lane: e.lane,
            pa: e.pa,
            pb: pm,
        };
        edges.push(QEdge {
            a: new_node,
            b: e.b,
            orig: e.orig,
            w: wb,
            kind: e.kind,
            lane: e.lane,
            pa: pm,
            pb: e.pb,
        });
        new_node
    }

    /// Travel direction of directed edge (`eid`, forward?) at its tail/head.
    fn q_travel_dir(&self, net: &Network, eid: usize, fwd: bool, arriving: bool) -> Point2 {
        let e = &self.edges[eid];
        match e.kind {
            EdgeKind::Lane => {
                let upward = fwd; // stored bottom -> top
                if upward {
                    Point2::new(0.0, 1.0)
                } else {
                    Point2::new(0.0, -1.0)
                }
            }
            EdgeKind::Headland => {
                let probe = 1e-7;
                let s = match (fwd, arriving) {
                    (true, true) => e.pb - probe,
                    (true, false) => e.pa + probe,
                    (false, true) => e.pa + probe,
                    (false, false) => e.pb - probe,
                };
                let t = net.nf.tangent_at_s(s);
                if fwd {
                    t
                } else {
                    t.scale(-1.0)
                }
            }
        }
    }

    fn heading_matches(&self, eid: usize, fwd: bool, h: Heading) -> bool {
        let e = &self.edges[eid];
        match (e.kind, h) {
            (EdgeKind::Lane, Heading::LaneUp) => fwd,
            (EdgeKind::Lane, Heading::LaneDown) => !fwd,
            (EdgeKind::Headland, Heading::Ccw) => fwd,
            (EdgeKind::Headland, Heading::Cw) => !fwd,
            _ => false,
        }
    }

    /// Directed edge via which a vehicle standing at `node` with heading `h`
    /// arrived, when such an edge exists.
    fn find_arrival(&self, node: usize, h: Heading) -> Option<(usize, bool)> {
        self.adj[node].iter().copied().find_map(|eid| {
            let e = &self.edges[eid];
            let fwd_head = e.b == node;
            let rev_head = e.a == node;
            match (e.kind, h) {
                (EdgeKind::Lane, Heading::LaneUp) if fwd_head => Some((eid, true)),
                (EdgeKind::Lane, Heading::LaneDown) if rev_head => Some((eid, false)),
                (EdgeKind::Headland, Heading::Ccw) if fwd_head => Some((eid, true)),
                (EdgeKind::Headland, Heading::Cw) if rev_head => Some((eid, false)),
                _ => None,
            }
        })
    }

    /// Directed edge a vehicle at `node` would traverse next to move with
    /// heading `h`.
    fn find_departure(&self, node: usize, h: Heading) -> Option<(usize, bool)> {
        self.adj[node].iter().copied().find_map(|eid| {
            let e = &self.edges[eid];
            let fwd_tail = e.a == node;
            let rev_tail = e.b == node;
            match (e.kind, h) {
                (EdgeKind::Lane, Heading::LaneUp) if fwd_tail => Some((eid, true)),
                (EdgeKind::Lane, Heading::LaneDown) if rev_tail => Some((eid, false)),
                (EdgeKind::Headland, Heading::Ccw) if fwd_tail => Some((eid, true)),
                (EdgeKind::Headland, Heading::Cw) if rev_tail => Some((eid, false)),
                _ => None,
            }
        })
    }

    fn admissible(&self, g: &TransitionGraph, node: usize, ein: usize, eout: usize) -> bool {
        if ein == eout {
            return false;
        }
        let a = &self.edges[ein];
        let b = &self.edges[eout];
        match (a.kind, b.kind) {
            (EdgeKind::Headland, EdgeKind::Headland) => true,
            (EdgeKind::Lane, EdgeKind::Lane) => a.lane == b.lane, // split continuation
            (EdgeKind::Lane, EdgeKind::Headland) | (EdgeKind::Headland, EdgeKind::Lane) => {
                let Some(orig_node) = self.nodes[node].orig else {
                    return false;
                };
                let hl = if a.kind == EdgeKind::Headland { a } else { b };
                g.traces.contains(&(orig_node, hl.orig))
            }
        }
    }

    fn dijkstra(
        &self,
        g: &TransitionGraph,
        from_heading: Option<Heading>,
        to_heading: Option<Heading>,
    ) -> Result<RoutePath, GraphError> {
        if self.start == self.goal {
            return Ok(RoutePath::zero());
        }
        let net = &g.net;
        let nstates = self.edges.len() * 2;
        #[derive(Clone)]
        struct Best {
            dist: f64,
            hops: u32,
            nodes_seq: Vec<u32>,
            edges_seq: Vec<u32>,
        }
        let mut best: Vec<Option<Best>> = vec![None; nstates];

        #[derive(PartialEq)]
        struct Key(f64, u32, u64);
        impl Eq for Key {}
        impl PartialOrd for Key {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Key {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                other
                    .0
                    .partial_cmp(&self.0)
                    .unwrap()
                    .then(other.1.cmp(&self.1))
                    .then(other.2.cmp(&self.2))
            }
        }
        let mut heap: BinaryHeap<(Key, usize)> = BinaryHeap::new();
        let mut seq = 0u64;

        let state_id = |eid: usize, fwd: bool| eid * 2 + usize::from(fwd);
        let improves = |cand: &Best, cur: &Option<Best>| -> bool {
            match cur {
                None => true,
                Some(b) => {
                    if cand.dist < b.dist - EPS {
                        true
                    } else if cand.dist > b.dist + EPS {
                        false
                    } else if cand.hops != b.hops {
                        cand.hops < b.hops
                    } else {
                        cand.nodes_seq < b.nodes_seq
                    }
                }
            }
        };

        // Seed initial states. With a heading at a junction node the vehicle
        // has already arrived along some edge; its options are the admissible
        // turns out of that arrival, not a fresh departure in any direction.
        let mut seeds: Vec<(usize, bool, f64)> = Vec::new();
        match from_heading {
            Some(h) => {
                let arrival = self
                    .nodes[self.start]
                    .orig
                    .is_some()
                    .then(|| self.find_arrival(self.start, h))
                    .flatten();
                match arrival {
                    Some((e_arr, fwd_arr)) => {
                        for &eout in &self.adj[self.start] {
                            if !self.admissible(g, self.start, e_arr, eout) {
                                continue;
                            }
                            let eo = &self.edges[eout];
                            let ofwd = eo.a == self.start;
                            // Only edges departing the start.
                            if !(ofwd || eo.b == self.start) {
                                continue;
                            }
                            let din = self.q_travel_dir(net, e_arr, fwd_arr, true);
                            let dout = self.q_travel_dir(net, eout, ofwd, false);
                            let cut =
                                fillet_cut(turn_deviation(din, dout), net.nf.turning_radius);
                            seeds.push((eout, ofwd, (eo.w - cut).max(0.0)));
                        }
                    }
                    None => {
                        // Entering an edge afresh (e.g. about to climb).
                        for &eid in &self.adj[self.start] {
                            let e = &self.edges[eid];
                            let fwd = e.a == self.start;
                            if self.heading_matches(eid, fwd, h) {
                                seeds.push((eid, fwd, e.w));
                            }
                        }
                    }
                }
            }
            None => {
                for &eid in &self.adj[self.start] {
                    let e = &self.edges[eid];
                    let fwd = e.a == self.start;
                    seeds.push((eid, fwd, e.w));
                }
            }
        }
        for (eid, fwd, w) in seeds {
            let e = &self.edges[eid];
            let head = if fwd { e.b } else { e.a };
            let cand = Best {
                dist: w,
                hops: 1,
                nodes_seq: vec![self.start as u32, head as u32],
                edges_seq: vec![eid as u32],
            };
            let sid = state_id(eid, fwd);
            if improves(&cand, &best[sid]) {
                heap.push((Key(cand.dist, cand.hops, seq), sid));
                seq += 1;
                best[sid] = Some(cand);
            }
        }

        let mut answer: Option<Best> = None;
        while let Some((Key(dist, hops, _), sid)) = heap.pop() {
            let cur = match &best[sid] {
                Some(b) if (b.dist - dist).abs() <= EPS && b.hops == hops => b.clone(),
                _ => continue, // stale
            };
            if let Some(ans) = &answer {
                if dist > ans.dist + EPS {
                    break;
                }
            }
            let eid = sid / 2;
            let fwd = sid % 2 == 1;
            let e = &self.edges[eid];
            let head = if fwd { e.b } else { e.a };
            if head == self.goal {
                let ok = match to_heading {
                    None => true,
                    Some(h) => self.heading_matches(eid, fwd, h),
                };
                if ok && improves(&cur, &answer) {
                    answer = Some(cur.clone());
                }
            }
            for &eout in &self.adj[head] {
                if !self.admissible(g, head, eid, eout) {
                    continue;
                }
                let eo = &self.edges[eout];
                let ofwd = eo.a == head;
                let din = self.q_travel_dir(net, eid, fwd, true);
                let dout = self.q_travel_dir(net, eout, ofwd, false);
                let cut = fillet_cut(turn_deviation(din, dout), net.nf.turning_radius);
                let step = (eo.w - cut).max(0.0);
                let nhead = if ofwd { eo.b } else { eo.a };
                let mut nodes_seq = cur.nodes_seq.clone();
                nodes_seq.push(nhead as u32);
                let mut edges_seq = cur.edges_seq.clone();
                edges_seq.push(eout as u32);
                let cand = Best {
                    dist: cur.dist + step,
                    hops: cur.hops + 1,
                    nodes_seq,
                    edges_seq,
                };
                let nsid = state_id(eout, ofwd);
                if improves(&cand, &best[nsid]) {
                    heap.push((Key(cand.dist, cand.hops, seq), nsid));
                    seq += 1;
                    best[nsid] = Some(cand);
                }
            }
        }

        let ans = answer.ok_or(GraphError::Unreachable)?;
        Ok(self.reconstruct(net, &ans.nodes_seq, &ans.edges_seq, ans.dist))
    }

    fn reconstruct(
        &self,
        net: &Network,
        nodes_seq: &[u32],
        edges_seq: &[u32],
        dist: f64,
    ) -> RoutePath {
        let mut steps = Vec::new();
        for (k, &eid) in edges_seq.iter().enumerate() {
            let e = &self.edges[eid as usize];
            let tail = nodes_seq[k] as usize;
            let fwd = e.a == tail;
            match e.kind {
                EdgeKind::Lane => {
                    let (from_t, to_t) = if fwd { (e.pa, e.pb) } else { (e.pb, e.pa) };
                    // Merge consecutive same-direction lane pieces (splits).
                    if let Some(RouteStep::Lane { lane, to_t: t1, .. }) = steps.last_mut() {
                        if *lane == e.lane.unwrap() && (*t1 - from_t).abs() < 1e-9 {
                            *t1 = to_t;
                            continue;
                        }
                    }
                    steps.push(RouteStep::Lane {
                        lane: e.lane.unwrap(),
                        from_t,
                        to_t,
                    });
                }
                EdgeKind::Headland => {
                    let (from_s, to_s, dir) = if fwd {
                        (e.pa, e.pb, HlDir::Ccw)
                    } else {
                        (e.pb, e.pa, HlDir::Cw)
                    };
                    let span = net.nf.ccw_dist(e.pa, e.pb);
                    if let Some(RouteStep::Headland {
                        to_s: t1,
                        dir: d1,
                        span: sp1,
                        ..
                    }) = steps.last_mut()
                    {
                        if *d1 == dir && (*t1 - from_s).abs() < 1e-9 {
                            *t1 = to_s;
                            *sp1 += span;
                            continue;
                        }
                    }
                    steps.push(RouteStep::Headland {
                        from_s,
                        to_s,
                        dir,
                        span,
                    });
                }
            }
        }
        RoutePath {
            length: dist,
            steps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{generate_skeleton, normalize, FieldSpec};

    fn rect_nf(n: usize, h0: f64, w0: f64, r: f64, q_l: f64) -> NormalizedField {
        let spec = crate::oracle::make_rect_field(h0, n, w0, r, q_l).unwrap();
        let sk = generate_skeleton(&spec).unwrap();
        normalize(&spec, &sk).unwrap().0
    }

    fn square_nf() -> NormalizedField {
        let spec = FieldSpec {
            contour: vec![
                Point2::new(0.0, 0.0),
                Point2::new(100.0, 0.0),
                Point2::new(100.0, 100.0),
                Point2::new(0.0, 100.0),
            ],
            entrance: Point2::new(30.0, 95.0),
            exit: None,
            theta: 0.0,
            operating_width: 30.0,
            turning_radius: 0.0,
            headland_offset: Some(5.0),
        };
        let sk = generate_skeleton(&spec).unwrap();
        normalize(&spec, &sk).unwrap().0
    }

    #[test]
    fn node_and_edge_counts() {
        // 90 m interior, W0=30: lanes at 15, 45, 75 -> N=3.
        let nf = square_nf();
        assert_eq!(nf.lane_count(), 3);
        let g = build_graph(&nf);
        let lane_edges = g
            .net
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Lane)
            .count();
        let hl_edges = g
            .net
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Headland)
            .count();
        assert_eq!(lane_edges, 3);
        // Cyclic headland: one edge per distinct on-headland node.
        assert_eq!(hl_edges, g.net.nodes.len());
        assert_eq!(g.net.nodes.len(), 9); // 3 bottoms + 3 tops + Z0(=Ze) + 2 caps
    }

    #[test]
    fn single_lane_field() {
        let nf = rect_nf(1, 100.0, 30.0, 0.0, 10.0);
        let g = build_graph(&nf);
        assert_eq!(
            g.net
                .edges
                .iter()
                .filter(|e| e.kind == EdgeKind::Lane)
                .count(),
            1
        );
        // 2 lane nodes + Z0 + 2 caps = 5 headland edges.
        assert_eq!(
            g.net
                .edges
                .iter()
                .filter(|e| e.kind == EdgeKind::Headland)
                .count(),
            5
        );
    }

    #[test]
    fn adjacent_lane_top_edges_weigh_w0() {
        let nf = rect_nf(5, 200.0, 36.0, 7.0, 10.0);
        let g = build_graph(&nf);
        let t2 = g.net.lane_top(2);
        let t3 = g.net.lane_top(3);
        let e = g
            .net
            .edges
            .iter()
            .find(|e| {
                e.kind == EdgeKind::Headland
                    && ((e.a == t3 && e.b == t2) || (e.a == t2 && e.b == t3))
            })
            .expect("adjacent tops share an edge");
        assert!((e.weight - 36.0).abs() < 1e-9);
    }

    #[test]
    fn empty_traces_lock_the_lanes() {
        let nf = rect_nf(3, 100.0, 30.0, 0.0, 10.0);
        let g = build_graph(&nf);
        let mid = NetPos::Lane { lane: 2, t: 50.0 };
        // Along the lane itself: fine.
        let p = g
            .shortest_path(mid, NetPos::Lane { lane: 2, t: 90.0 })
            .unwrap();
        assert!((p.length - 40.0).abs() < 1e-9);
        // Onto the headland: no arc anywhere.
        let err = g.shortest_path(mid, g.entrance_pos());
        assert!(matches!(err, Err(GraphError::Unreachable)));
    }

    #[test]
    fn established_arc_sides_gate_turns() {
        // Lane 2 bottom with an arc toward its east headland edge.
        let nf = rect_nf(3, 100.0, 30.0, 0.0, 10.0);
        let mut g = build_graph(&nf);
        let bot = g.net.lane_bottom(2);
        let east_edge = g.net.nodes[bot].hl_next; // ccw departs eastward on the bottom
        let west_edge = g.net.nodes[bot].hl_prev;
        g.traces.insert((bot, east_edge));
        let lane_e = g.net.lane_edge_id(2);
        assert!(g.admissible_turn(bot, lane_e, east_edge));
        assert!(!g.admissible_turn(bot, lane_e, west_edge));
        // Headland through-motion at the junction stays free.
        assert!(g.admissible_turn(bot, west_edge, east_edge));
        // And the arc is usable in both directions.
        assert!(g.admissible_turn(bot, east_edge, lane_e));
    }

    #[test]
    fn zero_and_single_edge_paths() {
        let nf = rect_nf(3, 100.0, 30.0, 0.0, 10.0);
        let g = build_graph(&nf);
        let a = g.entrance_pos();
        let p = g.shortest_path(a, a).unwrap();
        assert_eq!(p.length, 0.0);
        let b1 = g.net.nodes[g.net.lane_bottom(1)].s;
        let b2 = g.net.nodes[g.net.lane_bottom(2)].s;
        let p = g
            .shortest_path(NetPos::Headland { s: b1 }, NetPos::Headland { s: b2 })
            .unwrap();
        assert!((p.length - 30.0).abs() < 1e-9);
        assert_eq!(p.steps.len(), 1);
    }

    #[test]
    fn heading_constraints_pick_sides() {
        let nf = rect_nf(3, 100.0, 30.0, 0.0, 10.0);
        let g = build_graph(&nf);
        let b1 = g.net.nodes[g.net.lane_bottom(1)].s;
        let b2 = g.net.nodes[g.net.lane_bottom(2)].s;
        // Forced to set off cw (away from the target): must loop the ring.
        let total = nf.total_s();
        let p = g
            .shortest_path_directed(
                NetPos::Headland { s: b1 },
                Some(Heading::Cw),
                NetPos::Headland { s: b2 },
                None,
            )
            .unwrap();
        assert!((p.length - (total - 30.0)).abs() < 1e-9);
    }
}
