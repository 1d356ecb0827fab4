//! Low-diameter decomposition with geometric start times.
//!
//! Every vertex u draws delta_u ~ Geometric(beta) with support {0,1,...} and
//! P(delta >= k) = (1-beta)^k, then starts a BFS at time
//! t_u = horizon - delta_u * R where the horizon is ceil((c/beta) ln n)
//! rounds of length R. A vertex reached at time t forwards "t + w_e",
//! delivered in round floor((t+w_e)/R); it is claimed by the earliest
//! arrival, ties broken by (arrival, root id).
//!
//! Claims by (round, then minimum arrival within the round) equal claims by
//! plain minimum arrival because the floor is monotone, so the exact
//! event-driven implementation below is a lexicographic multi-source
//! Dijkstra, and the message-faithful node program reproduces it bit for bit
//! (a test pins that).

use crate::error::{Error, Result};
use crate::fixed::Fx;
use crate::graph::{EdgeId, VertexId, WeightedGraph};
use crate::partwise::{aggregate_round_bound, quality, Shortcut, ValidPartition};
use crate::rng::RandomnessSource;
use rand::Rng;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
pub struct DecompositionParams {
    /// Cut rate in (0,1); at most a 1/n-fraction regime is enforced.
    pub beta: f64,
    /// Start-time constant c in t_u = (c/beta) ln n - delta_u.
    pub start_c: f64,
    /// Length of one BFS round; contracted runs pass R here.
    pub scale: Fx,
    /// Override for the n inside the horizon formula (contracted runs keep
    /// the host n).
    pub horizon_n: Option<usize>,
}

impl DecompositionParams {
    pub fn new(beta: f64) -> Self {
        DecompositionParams {
            beta,
            start_c: crate::config::DEFAULT_LDD_START_C,
            scale: Fx::ONE,
            horizon_n: None,
        }
    }

    pub fn with_scale(mut self, scale: Fx) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_horizon_n(mut self, n: usize) -> Self {
        self.horizon_n = Some(n);
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Validation(format!("beta={} outside (0,1)", self.beta)));
        }
        if self.beta < 1.0 / n.max(2) as f64 {
            return Err(Error::Validation(format!(
                "beta={} below the 1/n floor for n={n}",
                self.beta
            )));
        }
        if self.scale == Fx::ZERO {
            return Err(Error::Validation("scale must be positive".into()));
        }
        Ok(())
    }

    /// Number of BFS rounds: ceil((c/beta) ln n).
    pub fn horizon_rounds(&self, graph_n: usize) -> u64 {
        let n = self.horizon_n.unwrap_or(graph_n).max(2);
        (self.start_c / self.beta * (n as f64).ln()).ceil() as u64
    }
}

/// Per-vertex geometric variates and the derived start times.
#[derive(Debug, Clone)]
pub struct StartTimeAssignment {
    pub deltas: Vec<u64>,
    /// t_u; only meaningful when not flagged.
    pub start: Vec<Fx>,
    /// horizon_rounds * scale.
    pub horizon: Fx,
    pub horizon_rounds: u64,
    /// Some delta exceeded the horizon, i.e. a start time went negative.
    pub flagged: bool,
}

/// delta ~ Geometric(beta), P(delta >= k) = (1-beta)^k.
pub fn sample_geometric(beta: f64, rng: &mut impl Rng) -> u64 {
    let u: f64 = rng.gen(); // [0, 1)
    if beta >= 1.0 {
        return 0;
    }
    let d = ((1.0 - u).ln() / (1.0 - beta).ln()).floor();
    if d.is_finite() && d >= 0.0 {
        d as u64
    } else {
        u64::MAX / 2
    }
}

/// i.i.d. delta_u from each vertex's private stream, and t_u.
pub fn sample_start_times(
    n: usize,
    params: &DecompositionParams,
    src: &RandomnessSource,
) -> StartTimeAssignment {
    let rounds = params.horizon_rounds(n);
    let horizon = Fx(params.scale.0.checked_mul(rounds).expect("horizon overflow"));
    let mut deltas = Vec::with_capacity(n);
    let mut start = Vec::with_capacity(n);
    let mut flagged = false;
    for v in 0..n as u32 {
        let mut rng = src.vertex_rng(v);
        let d = sample_geometric(params.beta, &mut rng);
        if d > rounds {
            flagged = true;
            start.push(Fx::ZERO);
        } else {
            start.push(Fx(horizon.0 - d * params.scale.0));
        }
        deltas.push(d);
    }
    StartTimeAssignment { deltas, start, horizon, horizon_rounds: rounds, flagged }
}

/// Per-vertex root assignment plus BFS-forest edges from one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionResult {
    pub root: Vec<VertexId>,
    pub arrival: Vec<Fx>,
    pub parent_edge: Vec<Option<EdgeId>>,
    pub tree_edges: Vec<EdgeId>,
    pub rounds: u64,
    pub components: Vec<Vec<VertexId>>,
}

impl DecompositionResult {
    /// Largest BFS-tree path weight from any root to its members.
    pub fn max_radius(&self, starts: &StartTimeAssignment) -> Fx {
        let mut r = Fx::ZERO;
        for (v, &root) in self.root.iter().enumerate() {
            let span = self.arrival[v] - starts.start[root as usize];
            r = r.max(span);
        }
        r
    }

    /// Dump format: one line "v root arrival" per vertex.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (v, &root) in self.root.iter().enumerate() {
            out.push_str(&format!(
                "{v} {root} {}\n",
                self.arrival[v].to_decimal_string()
            ));
        }
        out
    }
}

/// Minimal graph view so the same machinery runs on the host graph and on
/// contracted multigraphs.
#[derive(Debug, Clone)]
pub struct GraphView {
    pub n: usize,
    pub edges: Vec<(u32, u32, Fx)>,
    pub adj: Vec<Vec<u32>>,
}

impl GraphView {
    pub fn from_graph(g: &WeightedGraph) -> GraphView {
        GraphView {
            n: g.n(),
            edges: g.edges().iter().map(|e| (e.u, e.v, e.w)).collect(),
            adj: g.vertices().map(|v| g.incident(v).to_vec()).collect(),
        }
    }

    pub fn from_edges(n: usize, edges: Vec<(u32, u32, Fx)>) -> GraphView {
        let mut adj = vec![Vec::new(); n];
        for (i, &(u, v, _)) in edges.iter().enumerate() {
            adj[u as usize].push(i as u32);
            adj[v as usize].push(i as u32);
        }
        GraphView { n, edges, adj }
    }

    fn other(&self, e: u32, v: u32) -> u32 {
        let (a, b, _) = self.edges[e as usize];
        if a == v {
            b
        } else {
            a
        }
    }
}

/// The event-driven core: lexicographic multi-source Dijkstra with the
/// horizon cutoff. Arrivals past `starts.horizon` are never delivered.
pub fn decompose_with_starts(
    view: &GraphView,
    params: &DecompositionParams,
    starts: &StartTimeAssignment,
) -> DecompositionResult {
    assert_eq!(starts.start.len(), view.n);
    let horizon = starts.horizon;
    let mut claimed: Vec<Option<(Fx, VertexId)>> = vec![None; view.n];
    let mut parent_edge: Vec<Option<EdgeId>> = vec![None; view.n];
    // key: (arrival, root, vertex, edge-or-sentinel) — total order, so pops
    // are deterministic
    let mut heap: BinaryHeap<Reverse<(Fx, u32, u32, u32)>> = BinaryHeap::new();
    for v in 0..view.n as u32 {
        heap.push(Reverse((starts.start[v as usize], v, v, u32::MAX)));
    }
    while let Some(Reverse((t, root, v, via))) = heap.pop() {
        if claimed[v as usize].is_some() {
            continue;
        }
        claimed[v as usize] = Some((t, root));
        if via != u32::MAX {
            parent_edge[v as usize] = Some(via);
        }
        for &e in &view.adj[v as usize] {
            let u = view.other(e, v);
            if claimed[u as usize].is_some() {
                continue;
            }
            let t2 = t + view.edges[e as usize].2;
            if t2 <= horizon {
                heap.push(Reverse((t2, root, u, e)));
            }
        }
    }
    let mut root = vec![0 as VertexId; view.n];
    let mut arrival = vec![Fx::ZERO; view.n];
    for v in 0..view.n {
        let (t, r) = claimed[v].expect("own start time claims every vertex");
        root[v] = r;
        arrival[v] = t;
    }
    let tree_edges: Vec<EdgeId> = parent_edge.iter().flatten().copied().collect();
    let mut comp_map: std::collections::BTreeMap<VertexId, Vec<VertexId>> = Default::default();
    for (v, &r) in root.iter().enumerate() {
        comp_map.entry(r).or_default().push(v as VertexId);
    }
    let _ = params;
    DecompositionResult {
        root,
        arrival,
        parent_edge,
        tree_edges,
        rounds: starts.horizon_rounds,
        components: comp_map.into_values().collect(),
    }
}

/// Sample start times and decompose; a negative start time flags the trial.
pub fn decompose(
    g: &WeightedGraph,
    params: &DecompositionParams,
    src: &RandomnessSource,
) -> Result<DecompositionResult> {
    params.validate(g.n())?;
    for e in g.edges() {
        if e.w < params.scale {
            return Err(Error::Validation(format!(
                "edge ({},{}) weight {} below the scale unit {}",
                e.u, e.v, e.w, params.scale
            )));
        }
    }
    let starts = sample_start_times(g.n(), params, src);
    if starts.flagged {
        return Err(Error::FlaggedTrial);
    }
    Ok(decompose_with_starts(&GraphView::from_graph(g), params, &starts))
}

/// Host graph with the zero-weight components of a reweighting contracted to
/// super-vertices.
#[derive(Debug, Clone)]
pub struct ContractedGraph {
    pub part_of: Vec<u32>,
    pub parts: Vec<Vec<VertexId>>,
    /// (part u, part v, weight, host edge id); one entry per inter-part host
    /// edge, in host edge-id order (a true multigraph).
    pub h_edges: Vec<(u32, u32, Fx, EdgeId)>,
}

impl ContractedGraph {
    /// Contract the connected components of the zero-weight subgraph of
    /// `weights`.
    pub fn from_zero_components(g: &WeightedGraph, weights: &[Fx]) -> ContractedGraph {
        assert_eq!(weights.len(), g.m());
        let mut part_of = vec![u32::MAX; g.n()];
        let mut parts: Vec<Vec<VertexId>> = Vec::new();
        for v in g.vertices() {
            if part_of[v as usize] != u32::MAX {
                continue;
            }
            let id = parts.len() as u32;
            let mut comp = vec![v];
            part_of[v as usize] = id;
            let mut stack = vec![v];
            while let Some(x) = stack.pop() {
                for &e in g.incident(x) {
                    if weights[e as usize] != Fx::ZERO {
                        continue;
                    }
                    let u = g.edge(e).other(x);
                    if part_of[u as usize] == u32::MAX {
                        part_of[u as usize] = id;
                        comp.push(u);
                        stack.push(u);
                    }
                }
            }
            comp.sort_unstable();
            parts.push(comp);
        }
        let mut h_edges = Vec::new();
        for (i, e) in g.edges().iter().enumerate() {
            if weights[i] == Fx::ZERO {
                continue;
            }
            let (pu, pv) = (part_of[e.u as usize], part_of[e.v as usize]);
            if pu != pv {
                h_edges.push((pu, pv, weights[i], i as EdgeId));
            }
        }
        ContractedGraph { part_of, parts, h_edges }
    }

    pub fn view(&self) -> GraphView {
        GraphView::from_edges(
            self.parts.len(),
            self.h_edges.iter().map(|&(u, v, w, _)| (u, v, w)).collect(),
        )
    }

    /// Host edge behind an H edge index.
    pub fn host_edge(&self, h_edge: u32) -> EdgeId {
        self.h_edges[h_edge as usize].3
    }
}

#[derive(Debug, Clone)]
pub struct ContractedDecomposition {
    /// Over parts (H vertices).
    pub result: DecompositionResult,
    pub starts: StartTimeAssignment,
    /// Host-simulation cost: per LDD round one direct-traversal round plus a
    /// part-wise min-aggregate and broadcast through the shortcut.
    pub charged_rounds: u64,
}

/// LDD over the contracted multigraph, with rounds charged for simulating it
/// on the host network through the given shortcut. Output distribution is
/// identical to running `decompose` on the explicit contracted graph with
/// the same randomness (shared-randomness coupling is pinned by tests).
pub fn decompose_contracted(
    g: &WeightedGraph,
    cg: &ContractedGraph,
    params: &DecompositionParams,
    sc: &Shortcut,
    src: &RandomnessSource,
) -> Result<ContractedDecomposition> {
    let n_parts = cg.parts.len();
    params.validate(g.n())?;
    for &(_, _, w, _) in &cg.h_edges {
        if w < params.scale {
            return Err(Error::Validation(format!(
                "inter-part weight {w} below the scale unit {}",
                params.scale
            )));
        }
    }
    let starts = sample_start_times(n_parts, params, src);
    if starts.flagged {
        return Err(Error::FlaggedTrial);
    }
    let result = decompose_with_starts(&cg.view(), params, &starts);

    let partition = ValidPartition::new(g, cg.parts.clone())?;
    let q = quality(g, &partition, sc);
    let agg = aggregate_round_bound(g, &q)?;
    let charged_rounds = result.rounds * (1 + 2 * agg);
    Ok(ContractedDecomposition { result, starts, charged_rounds })
}

/// Wilson score interval.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone)]
pub struct PairCutStats {
    pub pair: (VertexId, VertexId),
    pub dist: Fx,
    pub same_component: u64,
    pub trials: u64,
    pub flagged: u64,
    pub rate: f64,
    pub wilson: (f64, f64),
}

/// Empirical same-component rates for the given vertex pairs.
pub fn cut_probability_harness(
    g: &WeightedGraph,
    params: &DecompositionParams,
    pairs: &[(VertexId, VertexId)],
    trials: u64,
    src: &RandomnessSource,
) -> Result<Vec<PairCutStats>> {
    params.validate(g.n())?;
    let metric_sources: Vec<VertexId> = {
        let mut s: Vec<VertexId> = pairs.iter().map(|&(a, _)| a).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let mut dist_of: std::collections::HashMap<VertexId, Vec<Fx>> = Default::default();
    for s in metric_sources {
        dist_of.insert(s, crate::graph::dijkstra(g, s).dist);
    }
    let mut same = vec![0u64; pairs.len()];
    let mut flagged = 0u64;
    for t in 0..trials {
        match decompose(g, params, &src.trial(t)) {
            Ok(res) => {
                for (i, &(a, b)) in pairs.iter().enumerate() {
                    if res.root[a as usize] == res.root[b as usize] {
                        same[i] += 1;
                    }
                }
            }
            Err(Error::FlaggedTrial) => flagged += 1,
            Err(e) => return Err(e),
        }
    }
    let effective = trials - flagged;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let rate = if effective == 0 { 1.0 } else { same[i] as f64 / effective as f64 };
            PairCutStats {
                pair: (a, b),
                dist: dist_of[&a][b as usize],
                same_component: same[i],
                trials: effective,
                flagged,
                rate,
                wilson: wilson_interval(same[i], effective, 1.96),
            }
        })
        .collect())
}

/// Message-faithful LDD BFS round program. Each node knows only its start
/// time, the round length, and its incident edges.
pub struct LddProgram {
    start: Fx,
    scale: Fx,
    horizon: Fx,
    incident: Vec<(EdgeId, Fx)>,
    pub claimed: Option<(Fx, VertexId)>,
    pub parent_edge: Option<EdgeId>,
    /// (send round, arrival, root, slot)
    pending: Vec<(u64, Fx, VertexId, usize)>,
    me: VertexId,
}

impl LddProgram {
    fn claim(&mut self, round: u64, t: Fx, root: VertexId, via: Option<EdgeId>) {
        self.claimed = Some((t, root));
        self.parent_edge = via;
        for (slot, &(_, w)) in self.incident.iter().enumerate() {
            let t2 = t + w;
            if t2 <= self.horizon {
                // delivered in LDD round floor(t2/R), i.e. engine round
                // floor(t2/R)+1, so send at engine round floor(t2/R)
                let send_round = t2.div_floor(self.scale);
                self.pending.push((send_round.max(round), t2, root, slot));
            }
        }
    }
}

impl crate::sim::NodeProgram for LddProgram {
    type Msg = (Fx, VertexId);

    fn step(
        &mut self,
        round: u64,
        inbox: &[(usize, (Fx, VertexId))],
        out: &mut crate::sim::Outbox<(Fx, VertexId)>,
    ) -> crate::sim::Status {
        if self.claimed.is_none() {
            // candidates this round: deliveries plus own start when due
            let mut best: Option<(Fx, VertexId, Option<EdgeId>)> = None;
            let mut consider = |t: Fx, r: VertexId, via: Option<EdgeId>| {
                let key = (t, r, via.map_or(u32::MAX, |e| e));
                let cur = best.map(|(bt, br, bv)| (bt, br, bv.map_or(u32::MAX, |e| e)));
                if cur.is_none_or(|c| key < c) {
                    best = Some((t, r, via));
                }
            };
            for &(slot, (t, r)) in inbox {
                consider(t, r, Some(self.incident[slot].0));
            }
            if self.start.div_floor(self.scale) + 1 == round {
                consider(self.start, self.me, None);
            }
            if let Some((t, r, via)) = best {
                self.claim(round, t, r, via);
            }
        }
        // flush sends scheduled for this engine round
        let mut rest = Vec::new();
        for &(send_round, t, root, slot) in &self.pending {
            if send_round <= round {
                let bits = 2 + sig_bits(t.0) + sig_bits(root as u64);
                out.send(slot, (t, root), bits);
            } else {
                rest.push((send_round, t, root, slot));
            }
        }
        self.pending = rest;
        if self.pending.is_empty() {
            if self.claimed.is_some() {
                crate::sim::Status::Halted
            } else {
                crate::sim::Status::Active
            }
        } else {
            crate::sim::Status::Active
        }
    }
}

fn sig_bits(x: u64) -> u32 {
    64 - x.leading_zeros()
}

/// Run the LDD as node programs on the simulator.
pub fn decompose_sim(
    g: &WeightedGraph,
    params: &DecompositionParams,
    starts: &StartTimeAssignment,
) -> (DecompositionResult, crate::sim::RunStats) {
    let programs: Vec<LddProgram> = g
        .vertices()
        .map(|v| LddProgram {
            start: starts.start[v as usize],
            scale: params.scale,
            horizon: starts.horizon,
            incident: g
                .incident(v)
                .iter()
                .map(|&e| (e, g.edge(e).w))
                .collect(),
            claimed: None,
            parent_edge: None,
            pending: Vec::new(),
            me: v,
        })
        .collect();
    let budget = crate::sim::RunBudget::for_graph(g, starts.horizon_rounds + 2);
    let out = crate::sim::run(g, programs, budget);
    let mut root = vec![0 as VertexId; g.n()];
    let mut arrival = vec![Fx::ZERO; g.n()];
    let mut parent_edge = vec![None; g.n()];
    for v in g.vertices() {
        let p = &out.programs[v as usize];
        let (t, r) = p.claimed.expect("all vertices claim within the horizon");
        root[v as usize] = r;
        arrival[v as usize] = t;
        parent_edge[v as usize] = p.parent_edge;
    }
    let tree_edges: Vec<EdgeId> = parent_edge.iter().flatten().copied().collect();
    let mut comp_map: std::collections::BTreeMap<VertexId, Vec<VertexId>> = Default::default();
    for (v, &r) in root.iter().enumerate() {
        comp_map.entry(r).or_default().push(v as VertexId);
    }
    (
        DecompositionResult {
            root,
            arrival,
            parent_edge,
            tree_edges,
            rounds: starts.horizon_rounds,
            components: comp_map.into_values().collect(),
        },
        out.stats,
    )
}
