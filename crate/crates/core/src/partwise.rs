//! Valid partitions, shortcut edge sets, quality measurement, the trivial
//! sqrt(n)+D shortcut, and the part-wise aggregate/broadcast primitives.
//!
//! The aggregation protocol is message-faithful: within each `G[S_i]+E_i` a
//! BFS fragment tree is grown from the part leader (minimum vertex id), values
//! convergecast up and the result broadcast down. Edges shared by several
//! parts serve them round-robin by part index, one message per direction per
//! round.

use crate::config::AGG_ALPHA;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, VertexId, WeightedGraph};
use crate::sim::{self, NodeProgram, Outbox, RunBudget, RunStats, Status};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::VecDeque;

/// Vertex-disjoint parts, each inducing a connected subgraph. Not every
/// vertex needs to be in a part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidPartition {
    part_of: Vec<Option<u32>>,
    parts: Vec<Vec<VertexId>>,
}

impl ValidPartition {
    pub fn new(g: &WeightedGraph, parts: Vec<Vec<VertexId>>) -> Result<Self> {
        let mut part_of = vec![None; g.n()];
        for (i, part) in parts.iter().enumerate() {
            if part.is_empty() {
                return Err(Error::Validation(format!("part {i} is empty")));
            }
            for &v in part {
                if v as usize >= g.n() {
                    return Err(Error::Validation(format!("vertex {v} out of range")));
                }
                if part_of[v as usize].replace(i as u32).is_some() {
                    return Err(Error::Validation(format!("vertex {v} in two parts")));
                }
            }
        }
        let p = ValidPartition {
            part_of,
            parts: parts
                .into_iter()
                .map(|mut vs| {
                    vs.sort_unstable();
                    vs
                })
                .collect(),
        };
        for i in 0..p.parts.len() {
            if !p.part_is_connected(g, i as u32) {
                return Err(Error::Validation(format!(
                    "part {i} does not induce a connected subgraph"
                )));
            }
        }
        Ok(p)
    }

    pub fn from_assignment(g: &WeightedGraph, part_of: Vec<Option<u32>>) -> Result<Self> {
        if part_of.len() != g.n() {
            return Err(Error::Validation("assignment length != n".into()));
        }
        let max = part_of.iter().flatten().copied().max();
        let count = max.map_or(0, |m| m as usize + 1);
        let mut parts = vec![Vec::new(); count];
        for (v, p) in part_of.iter().enumerate() {
            if let Some(p) = p {
                parts[*p as usize].push(v as VertexId);
            }
        }
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::Validation("part indices must be contiguous".into()));
        }
        Self::new(g, parts)
    }

    pub fn singletons(g: &WeightedGraph) -> Self {
        ValidPartition {
            part_of: (0..g.n()).map(|v| Some(v as u32)).collect(),
            parts: (0..g.n()).map(|v| vec![v as VertexId]).collect(),
        }
    }

    fn part_is_connected(&self, g: &WeightedGraph, i: u32) -> bool {
        let part = &self.parts[i as usize];
        if part.len() <= 1 {
            return true;
        }
        let mut seen = vec![false; g.n()];
        let mut stack = vec![part[0]];
        seen[part[0] as usize] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &e in g.incident(v) {
                let u = g.edge(e).other(v);
                if self.part_of[u as usize] == Some(i) && !seen[u as usize] {
                    seen[u as usize] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == part.len()
    }

    pub fn part_of(&self, v: VertexId) -> Option<u32> {
        self.part_of[v as usize]
    }

    pub fn parts(&self) -> &[Vec<VertexId>] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Part leader: minimum vertex id.
    pub fn leader(&self, i: u32) -> VertexId {
        self.parts[i as usize][0]
    }
}

/// Partition file format: n lines "v part-id" with part-id = -1 for
/// unassigned vertices.
pub fn parse_partition(g: &WeightedGraph, text: &str) -> Result<ValidPartition> {
    let mut part_of = vec![None; g.n()];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let v: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(Error::Parse { line: ln + 1, msg: "bad vertex".into() })?;
        let p: i64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(Error::Parse { line: ln + 1, msg: "bad part id".into() })?;
        if v >= g.n() {
            return Err(Error::Parse { line: ln + 1, msg: format!("vertex {v} out of range") });
        }
        part_of[v] = if p < 0 { None } else { Some(p as u32) };
    }
    ValidPartition::from_assignment(g, part_of)
}

pub fn partition_to_string(p: &ValidPartition) -> String {
    let mut out = String::new();
    for (v, part) in p.part_of.iter().enumerate() {
        let id = part.map_or(-1, |p| p as i64);
        out.push_str(&format!("{v} {id}\n"));
    }
    out
}

/// Per-part shortcut edge sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortcut {
    edge_sets: Vec<Vec<EdgeId>>,
}

impl Shortcut {
    pub fn new(p: &ValidPartition, mut edge_sets: Vec<Vec<EdgeId>>) -> Result<Self> {
        if edge_sets.len() != p.len() {
            return Err(Error::Validation("one edge set per part required".into()));
        }
        for set in &mut edge_sets {
            set.sort_unstable();
            set.dedup();
        }
        Ok(Shortcut { edge_sets })
    }

    pub fn empty(p: &ValidPartition) -> Self {
        Shortcut { edge_sets: vec![Vec::new(); p.len()] }
    }

    pub fn edge_set(&self, i: u32) -> &[EdgeId] {
        &self.edge_sets[i as usize]
    }
}

/// Congestion, dilation and quality Q = c + d of a shortcut. `dilation` is
/// `None` when some augmented part is disconnected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QualityReport {
    pub congestion: u32,
    pub dilation: Option<u32>,
}

impl QualityReport {
    pub fn quality(&self) -> Option<u64> {
        self.dilation.map(|d| self.congestion as u64 + d as u64)
    }
}

/// Exact congestion and dilation, dilation measured by BFS inside each
/// `G[S_i] + E_i`.
pub fn quality(g: &WeightedGraph, p: &ValidPartition, sc: &Shortcut) -> QualityReport {
    let mut membership = vec![0u32; g.m()];
    for i in 0..p.len() {
        for &e in sc.edge_set(i as u32) {
            membership[e as usize] += 1;
        }
    }
    let congestion = membership.into_iter().max().unwrap_or(0);

    let mut dilation = Some(0u32);
    for i in 0..p.len() {
        match augmented_part_diameter(g, p, sc, i as u32) {
            Some(d) => {
                if let Some(cur) = dilation {
                    dilation = Some(cur.max(d));
                }
            }
            None => dilation = None,
        }
        if dilation.is_none() {
            break;
        }
    }
    QualityReport { congestion, dilation }
}

/// The edges of `G[S_i] + E_i` and its vertex set.
fn augmented_part(
    g: &WeightedGraph,
    p: &ValidPartition,
    sc: &Shortcut,
    i: u32,
) -> (Vec<VertexId>, Vec<EdgeId>) {
    let mut edges: Vec<EdgeId> = Vec::new();
    for &v in &p.parts()[i as usize] {
        for &e in g.incident(v) {
            let other = g.edge(e).other(v);
            if p.part_of(other) == Some(i) && g.edge(e).u == v {
                edges.push(e);
            }
        }
    }
    edges.extend_from_slice(sc.edge_set(i));
    edges.sort_unstable();
    edges.dedup();
    let mut vertices: Vec<VertexId> = p.parts()[i as usize].clone();
    for &e in &edges {
        vertices.push(g.edge(e).u);
        vertices.push(g.edge(e).v);
    }
    vertices.sort_unstable();
    vertices.dedup();
    (vertices, edges)
}

fn augmented_part_diameter(
    g: &WeightedGraph,
    p: &ValidPartition,
    sc: &Shortcut,
    i: u32,
) -> Option<u32> {
    let (vertices, edges) = augmented_part(g, p, sc, i);
    let k = vertices.len();
    if k <= 1 {
        return Some(0);
    }
    let idx_of = |v: VertexId| vertices.binary_search(&v).unwrap();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); k];
    for &e in &edges {
        let (u, v) = (idx_of(g.edge(e).u) as u32, idx_of(g.edge(e).v) as u32);
        adj[u as usize].push(v);
        adj[v as usize].push(u);
    }
    let bfs = |s: u32, dist: &mut Vec<u32>| -> (u32, u32, usize) {
        dist.clear();
        dist.resize(k, u32::MAX);
        dist[s as usize] = 0;
        let mut q = VecDeque::from([s]);
        let (mut far, mut far_d, mut reached) = (s, 0u32, 1usize);
        while let Some(v) = q.pop_front() {
            for &u in &adj[v as usize] {
                if dist[u as usize] == u32::MAX {
                    dist[u as usize] = dist[v as usize] + 1;
                    reached += 1;
                    if dist[u as usize] > far_d {
                        far_d = dist[u as usize];
                        far = u;
                    }
                    q.push_back(u);
                }
            }
        }
        (far, far_d, reached)
    };
    let mut dist = Vec::new();
    if edges.len() == k - 1 {
        // a tree: double BFS gives the exact diameter
        let (far, _, reached) = bfs(0, &mut dist);
        if reached != k {
            return None;
        }
        let (_, d, _) = bfs(far, &mut dist);
        return Some(d);
    }
    let mut diameter = 0u32;
    for s in 0..k as u32 {
        let (_, d, reached) = bfs(s, &mut dist);
        if reached != k {
            return None;
        }
        diameter = diameter.max(d);
    }
    Some(diameter)
}

/// The sqrt(n)+D construction: every part with at least sqrt(n) vertices gets
/// the edges of one global BFS tree; smaller parts get nothing.
pub fn trivial_shortcut(g: &WeightedGraph, p: &ValidPartition) -> Shortcut {
    let tree = g.bfs_tree(0);
    let threshold = (g.n() as f64).sqrt();
    let edge_sets = p
        .parts()
        .iter()
        .map(|part| {
            if part.len() as f64 >= threshold {
                tree.clone()
            } else {
                Vec::new()
            }
        })
        .collect();
    Shortcut { edge_sets }
}

/// Associative + commutative fold over bounded-bit payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggOp {
    Min,
    Max,
    Sum,
    Or,
}

impl AggOp {
    pub fn apply(&self, a: u64, b: u64) -> u64 {
        match self {
            AggOp::Min => a.min(b),
            AggOp::Max => a.max(b),
            AggOp::Sum => a.wrapping_add(b),
            AggOp::Or => a | b,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AggregateSpec {
    pub op: AggOp,
    pub payload_bits: u32,
}

impl AggregateSpec {
    pub fn new(op: AggOp, payload_bits: u32) -> Self {
        AggregateSpec { op, payload_bits }
    }
}

#[derive(Debug, Clone)]
enum PwMsg {
    /// BFS invite for a part.
    Token,
    /// "You are my parent."
    Join,
    /// "I joined elsewhere."
    Reject,
    /// Convergecast partial; None when only relays contributed so far.
    Up(Option<u64>),
    /// Final value flowing down the fragment tree.
    Down(u64),
    /// Broadcast payload (flood mode, no convergecast).
    Flood(u64),
}

#[derive(Debug, Clone)]
struct Wire {
    part: u32,
    msg: PwMsg,
}

#[derive(Debug)]
struct PartTask {
    /// Slots of this vertex that belong to G[S_i]+E_i.
    slots: Vec<usize>,
    /// Some(x) when this vertex is a member of the part.
    contribution: Option<u64>,
    is_leader: bool,
    joined: bool,
    parent_slot: Option<usize>,
    awaiting: usize,
    children: Vec<usize>,
    ups_received: usize,
    acc: Option<u64>,
    up_sent: bool,
    result: Option<u64>,
    done: bool,
}

struct PwNode {
    /// Tasks indexed densely; `task_of_part[part]` finds them.
    tasks: Vec<(u32, PartTask)>,
    /// Per-slot round-robin outgoing queues.
    queues: Vec<VecDeque<(u32, PwMsg)>>,
    rr_next: Vec<u32>,
    op: AggOp,
    broadcast: bool,
    part_bits: u32,
    payload_bits: u32,
    bootstrapped: bool,
}

impl PwNode {
    fn task_mut(&mut self, part: u32) -> Option<&mut PartTask> {
        self.tasks
            .iter_mut()
            .find(|(p, _)| *p == part)
            .map(|(_, t)| t)
    }

    fn bits_of(&self, msg: &PwMsg) -> u32 {
        let tag = 3;
        let body = match msg {
            PwMsg::Token | PwMsg::Join | PwMsg::Reject => 0,
            PwMsg::Up(_) => self.payload_bits + 1,
            PwMsg::Down(_) | PwMsg::Flood(_) => self.payload_bits,
        };
        tag + self.part_bits + body
    }

    fn enqueue(&mut self, slot: usize, part: u32, msg: PwMsg) {
        self.queues[slot].push_back((part, msg));
    }

    fn try_complete(&mut self, part: u32) -> Vec<(usize, u32, PwMsg)> {
        let op = self.op;
        let mut sends = Vec::new();
        let Some(task) = self.task_mut(part) else { return sends };
        if !task.joined
            || task.done
            || task.up_sent
            || task.awaiting > 0
            || task.ups_received < task.children.len()
        {
            return sends;
        }
        let mut acc = task.acc;
        if let Some(x) = task.contribution {
            acc = Some(match acc {
                Some(a) => op.apply(a, x),
                None => x,
            });
        }
        if task.is_leader {
            let value = acc.expect("leader is a member, so a contribution exists");
            task.result = Some(value);
            task.done = true;
            for &c in &task.children {
                sends.push((c, part, PwMsg::Down(value)));
            }
        } else {
            task.up_sent = true;
            let parent = task.parent_slot.expect("non-leader joined via a parent");
            sends.push((parent, part, PwMsg::Up(acc)));
        }
        sends
    }
}

impl NodeProgram for PwNode {
    type Msg = Wire;

    fn step(&mut self, _round: u64, inbox: &[(usize, Wire)], out: &mut Outbox<Wire>) -> Status {
        if !self.bootstrapped {
            self.bootstrapped = true;
            let mut boots = Vec::new();
            for (part, task) in &mut self.tasks {
                if !task.is_leader {
                    continue;
                }
                task.joined = true;
                if self.broadcast {
                    let value = task.contribution.expect("leader carries the message");
                    task.result = Some(value);
                    task.done = true;
                    for &s in &task.slots {
                        boots.push((s, *part, PwMsg::Flood(value)));
                    }
                } else {
                    task.awaiting = task.slots.len();
                    for &s in &task.slots {
                        boots.push((s, *part, PwMsg::Token));
                    }
                }
            }
            for (s, p, m) in boots {
                self.enqueue(s, p, m);
            }
            // leaders of edge-less parts finish on the spot
            let parts: Vec<u32> = self.tasks.iter().map(|(p, _)| *p).collect();
            for p in parts {
                for (s, pt, m) in self.try_complete(p) {
                    self.enqueue(s, pt, m);
                }
            }
        }

        // group simultaneous tokens per part so the parent is the min slot
        let mut token_slots: Vec<(u32, Vec<usize>)> = Vec::new();
        for (slot, wire) in inbox {
            match &wire.msg {
                PwMsg::Token => {
                    match token_slots.iter_mut().find(|(p, _)| *p == wire.part) {
                        Some((_, v)) => v.push(*slot),
                        None => token_slots.push((wire.part, vec![*slot])),
                    }
                }
                PwMsg::Join => {
                    if let Some(task) = self.task_mut(wire.part) {
                        task.children.push(*slot);
                        task.awaiting -= 1;
                    }
                }
                PwMsg::Reject => {
                    if let Some(task) = self.task_mut(wire.part) {
                        task.awaiting -= 1;
                    }
                }
                PwMsg::Up(val) => {
                    let op = self.op;
                    if let Some(task) = self.task_mut(wire.part) {
                        task.ups_received += 1;
                        if let Some(v) = val {
                            task.acc = Some(match task.acc {
                                Some(a) => op.apply(a, *v),
                                None => *v,
                            });
                        }
                    }
                }
                PwMsg::Down(val) => {
                    if let Some(task) = self.task_mut(wire.part) {
                        if !task.done {
                            task.result = Some(*val);
                            task.done = true;
                            let forwards: Vec<usize> = task.children.clone();
                            let part = wire.part;
                            for c in forwards {
                                self.enqueue(c, part, PwMsg::Down(*val));
                            }
                        }
                    }
                }
                PwMsg::Flood(val) => {
                    if let Some(task) = self.task_mut(wire.part) {
                        if !task.done {
                            task.result = Some(*val);
                            task.done = true;
                            task.joined = true;
                            let slots: Vec<usize> =
                                task.slots.iter().copied().filter(|s| s != slot).collect();
                            let part = wire.part;
                            for s in slots {
                                self.enqueue(s, part, PwMsg::Flood(*val));
                            }
                        }
                    }
                }
            }
        }

        for (part, slots) in token_slots {
            let Some(task) = self.task_mut(part) else { continue };
            if task.joined {
                for s in slots {
                    self.enqueue(s, part, PwMsg::Reject);
                }
            } else {
                task.joined = true;
                let parent = *slots.iter().min().unwrap();
                task.parent_slot = Some(parent);
                let invites: Vec<usize> = task
                    .slots
                    .iter()
                    .copied()
                    .filter(|s| !slots.contains(s))
                    .collect();
                task.awaiting = invites.len();
                self.enqueue(parent, part, PwMsg::Join);
                for s in slots.into_iter().filter(|&s| s != parent) {
                    self.enqueue(s, part, PwMsg::Reject);
                }
                for s in invites {
                    self.enqueue(s, part, PwMsg::Token);
                }
            }
            for (s, p, m) in self.try_complete(part) {
                self.enqueue(s, p, m);
            }
        }

        // completion may have been unlocked by joins/rejects/ups
        let parts: Vec<u32> = self.tasks.iter().map(|(p, _)| *p).collect();
        for p in parts {
            for (s, pt, m) in self.try_complete(p) {
                self.enqueue(s, pt, m);
            }
        }

        // drain one message per slot, round-robin over parts
        let mut any_queued = false;
        for slot in 0..self.queues.len() {
            if self.queues[slot].is_empty() {
                continue;
            }
            let start = self.rr_next[slot];
            let pick = self
                .queues[slot]
                .iter()
                .enumerate()
                .min_by_key(|(pos, (part, _))| (part.wrapping_sub(start), *pos))
                .map(|(pos, _)| pos)
                .unwrap();
            let (part, msg) = self.queues[slot].remove(pick).unwrap();
            self.rr_next[slot] = part.wrapping_add(1);
            let bits = self.bits_of(&msg);
            out.send(slot, Wire { part, msg }, bits);
            if !self.queues[slot].is_empty() {
                any_queued = true;
            }
        }

        if any_queued {
            Status::Active
        } else if self.tasks.iter().all(|(_, t)| t.done) {
            Status::Halted
        } else {
            Status::Idle
        }
    }
}

fn build_programs(
    g: &WeightedGraph,
    p: &ValidPartition,
    sc: &Shortcut,
    spec: AggregateSpec,
    xs: &[u64],
    broadcast: Option<&[u64]>,
) -> Result<Vec<PwNode>> {
    // per-edge list of parts whose augmented subgraph uses it
    let mut parts_of_edge: Vec<Vec<u32>> = vec![Vec::new(); g.m()];
    for i in 0..p.len() as u32 {
        let (_, edges) = augmented_part(g, p, sc, i);
        for e in edges {
            parts_of_edge[e as usize].push(i);
        }
    }
    let part_bits = (p.len().max(2) as f64).log2().ceil() as u32;
    let mut programs: Vec<PwNode> = g
        .vertices()
        .map(|v| PwNode {
            tasks: Vec::new(),
            queues: vec![VecDeque::new(); g.incident(v).len()],
            rr_next: vec![0; g.incident(v).len()],
            op: spec.op,
            broadcast: broadcast.is_some(),
            part_bits,
            payload_bits: spec.payload_bits,
            bootstrapped: false,
        })
        .collect();

    for v in g.vertices() {
        let mut tasks: Vec<(u32, PartTask)> = Vec::new();
        for (slot, &e) in g.incident(v).iter().enumerate() {
            for &i in &parts_of_edge[e as usize] {
                match tasks.iter_mut().find(|(pt, _)| *pt == i) {
                    Some((_, t)) => t.slots.push(slot),
                    None => tasks.push((
                        i,
                        PartTask {
                            slots: vec![slot],
                            contribution: None,
                            is_leader: false,
                            joined: false,
                            parent_slot: None,
                            awaiting: 0,
                            children: Vec::new(),
                            ups_received: 0,
                            acc: None,
                            up_sent: false,
                            result: None,
                            done: false,
                        },
                    )),
                }
            }
        }
        // members may be edge-less (singleton parts)
        if let Some(i) = p.part_of(v) {
            if !tasks.iter().any(|(pt, _)| *pt == i) {
                tasks.push((
                    i,
                    PartTask {
                        slots: Vec::new(),
                        contribution: None,
                        is_leader: false,
                        joined: false,
                        parent_slot: None,
                        awaiting: 0,
                        children: Vec::new(),
                        ups_received: 0,
                        acc: None,
                        up_sent: false,
                        result: None,
                        done: false,
                    },
                ));
            }
        }
        for (i, task) in &mut tasks {
            if p.part_of(v) == Some(*i) {
                task.contribution = match broadcast {
                    Some(msgs) => {
                        if p.leader(*i) == v {
                            Some(msgs[*i as usize])
                        } else {
                            None
                        }
                    }
                    None => Some(xs[v as usize]),
                };
            }
            task.is_leader = p.leader(*i) == v;
        }
        programs[v as usize].tasks = tasks;
    }
    Ok(programs)
}

#[derive(Debug, Clone)]
pub struct AggregateOutcome {
    /// Part members hold the part's fold; everyone else holds their own x.
    pub values: Vec<u64>,
    pub stats: RunStats,
}

#[derive(Debug, Clone)]
pub struct BroadcastOutcome {
    /// Part members hold the part's message; everyone else None.
    pub values: Vec<Option<u64>>,
    pub stats: RunStats,
}

/// The round budget the Õ(c+d) contract allows on this instance.
pub fn aggregate_round_bound(g: &WeightedGraph, q: &QualityReport) -> Result<u64> {
    let d = q
        .dilation
        .ok_or_else(|| Error::Validation("part disconnected even with shortcut edges".into()))?;
    let cd = q.congestion as f64 + d as f64;
    let bound = AGG_ALPHA * cd * (g.n().max(2) as f64).log2().ceil();
    Ok(bound.ceil() as u64)
}

/// Every vertex in part S_i learns the fold of x over S_i, in at most
/// `AGG_ALPHA * (c+d) * ceil(log2 n)` simulator rounds.
pub fn partwise_aggregate(
    g: &WeightedGraph,
    p: &ValidPartition,
    sc: &Shortcut,
    spec: AggregateSpec,
    xs: &[u64],
) -> Result<AggregateOutcome> {
    let q = quality(g, p, sc);
    let max_rounds = aggregate_round_bound(g, &q)?.max(8);
    partwise_aggregate_with_budget(g, p, sc, spec, xs, max_rounds)
}

pub fn partwise_aggregate_with_budget(
    g: &WeightedGraph,
    p: &ValidPartition,
    sc: &Shortcut,
    spec: AggregateSpec,
    xs: &[u64],
    max_rounds: u64,
) -> Result<AggregateOutcome> {
    assert_eq!(xs.len(), g.n());
    let programs = build_programs(g, p, sc, spec, xs, None)?;
    let budget = RunBudget::for_graph(g, max_rounds);
    let out = sim::run(g, programs, budget);
    if out.stats.timed_out {
        return Err(Error::Timeout { rounds: max_rounds });
    }
    let mut values = xs.to_vec();
    for v in g.vertices() {
        if let Some(i) = p.part_of(v) {
            let node = &out.programs[v as usize];
            let task = node.tasks.iter().find(|(pt, _)| *pt == i);
            match task.and_then(|(_, t)| t.result) {
                Some(r) => values[v as usize] = r,
                None => {
                    return Err(Error::Internal(format!(
                        "vertex {v} finished without a part result"
                    )))
                }
            }
        }
    }
    Ok(AggregateOutcome { values, stats: out.stats })
}

/// Every vertex of part S_i receives `messages[i]`.
pub fn partwise_broadcast(
    g: &WeightedGraph,
    p: &ValidPartition,
    sc: &Shortcut,
    payload_bits: u32,
    messages: &[u64],
) -> Result<BroadcastOutcome> {
    assert_eq!(messages.len(), p.len());
    let q = quality(g, p, sc);
    let max_rounds = aggregate_round_bound(g, &q)?.max(8);
    let spec = AggregateSpec::new(AggOp::Min, payload_bits);
    let xs = vec![0u64; g.n()];
    let programs = build_programs(g, p, sc, spec, &xs, Some(messages))?;
    let budget = RunBudget::for_graph(g, max_rounds);
    let out = sim::run(g, programs, budget);
    if out.stats.timed_out {
        return Err(Error::Timeout { rounds: max_rounds });
    }
    let mut values = vec![None; g.n()];
    for v in g.vertices() {
        if let Some(i) = p.part_of(v) {
            let node = &out.programs[v as usize];
            let task = node.tasks.iter().find(|(pt, _)| *pt == i);
            match task.and_then(|(_, t)| t.result) {
                Some(r) => values[v as usize] = Some(r),
                None => {
                    return Err(Error::Internal(format!(
                        "vertex {v} finished without the part message"
                    )))
                }
            }
        }
    }
    Ok(BroadcastOutcome { values, stats: out.stats })
}

/// Random connected partition grown by seeded BFS chunks; some vertices may
/// stay unassigned. Experiment-runner instrument.
pub fn random_partition(
    g: &WeightedGraph,
    rng: &mut impl Rng,
    target_parts: usize,
    assign_fraction: f64,
) -> ValidPartition {
    let n = g.n();
    let mut order: Vec<VertexId> = (0..n as VertexId).collect();
    order.shuffle(rng);
    let mut part_of: Vec<Option<u32>> = vec![None; n];
    let cap = (n as f64 * assign_fraction / target_parts.max(1) as f64).ceil() as usize;
    let cap = cap.max(1);
    let mut next_part = 0u32;
    for &seed in &order {
        if part_of[seed as usize].is_some() || next_part as usize >= target_parts {
            continue;
        }
        let mut q = VecDeque::from([seed]);
        part_of[seed as usize] = Some(next_part);
        let mut size = 1;
        while size < cap {
            let Some(v) = q.pop_front() else { break };
            let mut nbrs: Vec<VertexId> = g
                .incident(v)
                .iter()
                .map(|&e| g.edge(e).other(v))
                .filter(|&u| part_of[u as usize].is_none())
                .collect();
            nbrs.shuffle(rng);
            for u in nbrs {
                if size >= cap {
                    break;
                }
                if part_of[u as usize].is_none() {
                    part_of[u as usize] = Some(next_part);
                    size += 1;
                    q.push_back(u);
                }
            }
        }
        next_part += 1;
    }
    // renumber in case some seeds produced nothing (they cannot, but stay safe)
    ValidPartition::from_assignment(g, part_of).expect("grown parts are connected by construction")
}

/// Random shortcut: each part independently gets nothing, the global BFS
/// tree, or the tree paths from a few of its members to the tree root (a
/// connected slice, so the augmented part stays connected).
pub fn random_shortcut(g: &WeightedGraph, p: &ValidPartition, rng: &mut impl Rng) -> Shortcut {
    let tree = g.bfs_tree(0);
    let mut parent_edge: Vec<Option<EdgeId>> = vec![None; g.n()];
    {
        let mut seen = vec![false; g.n()];
        seen[0] = true;
        let mut q = VecDeque::from([0 as VertexId]);
        let in_tree: std::collections::HashSet<EdgeId> = tree.iter().copied().collect();
        while let Some(v) = q.pop_front() {
            for &e in g.incident(v) {
                if !in_tree.contains(&e) {
                    continue;
                }
                let u = g.edge(e).other(v);
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    parent_edge[u as usize] = Some(e);
                    q.push_back(u);
                }
            }
        }
    }
    let edge_sets = (0..p.len())
        .map(|i| match rng.gen_range(0..3) {
            0 => Vec::new(),
            1 => tree.clone(),
            _ => {
                let members = &p.parts()[i];
                let picks = 1 + rng.gen_range(0..2usize.min(members.len()));
                let mut edges = Vec::new();
                for _ in 0..picks {
                    let mut v = members[rng.gen_range(0..members.len())];
                    while let Some(e) = parent_edge[v as usize] {
                        edges.push(e);
                        v = g.edge(e).other(v);
                    }
                }
                edges
            }
        })
        .collect();
    Shortcut { edge_sets }
}
