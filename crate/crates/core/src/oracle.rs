//! Centralized ground truth backing the derived checks: all-pairs distances,
//! exact min-cost flow, direct per-part reductions, recursive tree
//! aggregates. Instances above the desk-scale caps are refused, never
//! silently approximated.

use crate::cluster::RootedTree;
use crate::config::{ORACLE_APSP_CAP, ORACLE_FLOW_CAP};
use crate::error::{Error, Result};
use crate::fixed::Fx;
use crate::graph::{dijkstra, VertexId, WeightedGraph};
use crate::partwise::{AggOp, ValidPartition};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// All-pairs distance table by repeated Dijkstra.
pub fn apsp(g: &WeightedGraph) -> Result<Vec<Vec<Fx>>> {
    if g.n() > ORACLE_APSP_CAP {
        return Err(Error::CapExceeded { n: g.n(), cap: ORACLE_APSP_CAP });
    }
    Ok(g.vertices().map(|v| dijkstra(g, v).dist).collect())
}

/// Independent single-source oracle used to cross-validate Dijkstra.
pub fn bellman_ford(g: &WeightedGraph, s: VertexId) -> Vec<Fx> {
    let mut dist = vec![Fx::INF; g.n()];
    dist[s as usize] = Fx::ZERO;
    for _ in 0..g.n() {
        let mut changed = false;
        for e in g.edges() {
            let (u, v) = (e.u as usize, e.v as usize);
            if dist[u].sat_add(e.w) < dist[v] {
                dist[v] = dist[u].sat_add(e.w);
                changed = true;
            }
            if dist[v].sat_add(e.w) < dist[u] {
                dist[u] = dist[v].sat_add(e.w);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Centralized per-part reduction.
pub fn direct_reduce(p: &ValidPartition, op: AggOp, xs: &[u64]) -> Vec<u64> {
    p.parts()
        .iter()
        .map(|part| {
            let mut it = part.iter().map(|&v| xs[v as usize]);
            let first = it.next().expect("parts are nonempty");
            it.fold(first, |a, b| op.apply(a, b))
        })
        .collect()
}

/// Recursive subtree aggregates on a rooted tree.
pub fn subtree_sums(t: &RootedTree, op: AggOp, xs: &[u64]) -> Vec<u64> {
    // process vertices by decreasing depth so children finish first
    let mut order: Vec<VertexId> = t.vertices().to_vec();
    order.sort_by_key(|&v| Reverse(t.depth(v)));
    let mut acc: std::collections::HashMap<VertexId, u64> =
        t.vertices().iter().map(|&v| (v, xs[v as usize])).collect();
    for &v in &order {
        if let Some((parent, _)) = t.parent(v) {
            let val = acc[&v];
            let cur = acc[&parent];
            acc.insert(parent, op.apply(cur, val));
        }
    }
    t.vertices().iter().map(|&v| acc[&v]).collect()
}

/// Fold along each vertex's path to the root (inclusive).
pub fn path_to_root_sums(t: &RootedTree, op: AggOp, xs: &[u64]) -> Vec<u64> {
    t.vertices()
        .iter()
        .map(|&v| {
            let mut val = xs[v as usize];
            let mut cur = v;
            while let Some((p, _)) = t.parent(cur) {
                val = op.apply(val, xs[p as usize]);
                cur = p;
            }
            val
        })
        .collect()
}

/// An exact min-cost flow on the original graph.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    /// Signed flow per graph edge, positive u -> v (scaled demand units).
    pub edge_flow: Vec<i64>,
    /// Exact cost in (fixed-point length) x (fixed-point demand) units.
    pub cost: u128,
}

/// Uncapacitated min-cost flow by successive shortest paths with potentials.
/// Demands are fixed-point and must sum to zero exactly.
pub fn min_cost_flow(g: &WeightedGraph, demands: &[i64]) -> Result<FlowSolution> {
    if g.n() > ORACLE_FLOW_CAP {
        return Err(Error::CapExceeded { n: g.n(), cap: ORACLE_FLOW_CAP });
    }
    if demands.len() != g.n() {
        return Err(Error::Validation("one demand per vertex required".into()));
    }
    if demands.iter().map(|&d| d as i128).sum::<i128>() != 0 {
        return Err(Error::Validation("demands must sum to zero".into()));
    }

    // residual network: per graph edge two arcs with infinite capacity; a
    // super source feeds surpluses, a super sink drains deficits.
    let n = g.n();
    let source = n;
    let sink = n + 1;
    let nn = n + 2;
    let mut mcmf = Mcmf::new(nn);
    for (i, e) in g.edges().iter().enumerate() {
        mcmf.add_edge(e.u as usize, e.v as usize, i64::MAX / 4, e.w.0 as i64, Some((i, true)));
        mcmf.add_edge(e.v as usize, e.u as usize, i64::MAX / 4, e.w.0 as i64, Some((i, false)));
    }
    let mut total: i64 = 0;
    for (v, &d) in demands.iter().enumerate() {
        if d > 0 {
            mcmf.add_edge(source, v, d, 0, None);
            total += d;
        } else if d < 0 {
            mcmf.add_edge(v, sink, -d, 0, None);
        }
    }
    let (flow, cost) = mcmf.run(source, sink);
    if flow != total {
        return Err(Error::Internal("min-cost flow failed to satisfy demands".into()));
    }

    // recover per-edge net flow: net use of the u->v arc minus net use of
    // the v->u arc
    let mut edge_flow = vec![0i64; g.m()];
    for arc in &mcmf.arcs {
        if let Some((eid, forward)) = arc.tag {
            let used = arc.cap_initial - arc.cap;
            if forward {
                edge_flow[eid] += used;
            } else {
                edge_flow[eid] -= used;
            }
        }
    }
    Ok(FlowSolution { edge_flow, cost })
}

struct Arc {
    to: usize,
    cap: i64,
    cap_initial: i64,
    cost: i64,
    /// (graph edge id, is the u->v direction) for real arcs
    tag: Option<(usize, bool)>,
}

struct Mcmf {
    arcs: Vec<Arc>,
    head: Vec<Vec<usize>>,
}

impl Mcmf {
    fn new(n: usize) -> Self {
        Mcmf { arcs: Vec::new(), head: vec![Vec::new(); n] }
    }

    fn add_edge(&mut self, u: usize, v: usize, cap: i64, cost: i64, tag: Option<(usize, bool)>) {
        self.head[u].push(self.arcs.len());
        self.arcs.push(Arc { to: v, cap, cap_initial: cap, cost, tag });
        self.head[v].push(self.arcs.len());
        self.arcs.push(Arc { to: u, cap: 0, cap_initial: 0, cost: -cost, tag: None });
    }

    fn run(&mut self, s: usize, t: usize) -> (i64, u128) {
        let n = self.head.len();
        let mut potential = vec![0i64; n];
        let mut total_flow: i64 = 0;
        let mut total_cost: u128 = 0;
        loop {
            // Dijkstra on reduced costs
            let mut dist = vec![i64::MAX; n];
            let mut prev_arc = vec![usize::MAX; n];
            dist[s] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0i64, s)));
            while let Some(Reverse((d, v))) = heap.pop() {
                if d > dist[v] {
                    continue;
                }
                for &a in &self.head[v] {
                    let arc = &self.arcs[a];
                    if arc.cap <= 0 {
                        continue;
                    }
                    let nd = d + arc.cost + potential[v] - potential[arc.to];
                    if nd < dist[arc.to] {
                        dist[arc.to] = nd;
                        prev_arc[arc.to] = a;
                        heap.push(Reverse((nd, arc.to)));
                    }
                }
            }
            if dist[t] == i64::MAX {
                break;
            }
            for v in 0..n {
                if dist[v] < i64::MAX {
                    potential[v] += dist[v];
                }
            }
            // bottleneck along the path
            let mut bottleneck = i64::MAX;
            let mut v = t;
            while v != s {
                let a = prev_arc[v];
                bottleneck = bottleneck.min(self.arcs[a].cap);
                v = self.arcs[a ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let a = prev_arc[v];
                self.arcs[a].cap -= bottleneck;
                self.arcs[a ^ 1].cap += bottleneck;
                let c = self.arcs[a].cost;
                if c > 0 {
                    total_cost += (c as u128) * (bottleneck as u128);
                } else {
                    total_cost -= ((-c) as u128) * (bottleneck as u128);
                }
                v = self.arcs[a ^ 1].to;
            }
            total_flow += bottleneck;
        }
        (total_flow, total_cost)
    }
}

/// Search for a negative-reduced-cost residual cycle (complementary
/// slackness spot check). Bellman-Ford over the residual arcs.
pub fn residual_negative_cycle(g: &WeightedGraph, sol: &FlowSolution) -> bool {
    // residual arcs: for each edge with flow f, both directions are always
    // present (uncapacitated), with costs +w / +w; pushing against existing
    // flow refunds cost: arc cost -w while |f| > 0 in that direction.
    let n = g.n();
    let mut arcs: Vec<(usize, usize, i64)> = Vec::new();
    for (i, e) in g.edges().iter().enumerate() {
        let w = e.w.0 as i64;
        let f = sol.edge_flow[i];
        arcs.push((e.u as usize, e.v as usize, w));
        arcs.push((e.v as usize, e.u as usize, w));
        if f > 0 {
            arcs.push((e.v as usize, e.u as usize, -w));
        } else if f < 0 {
            arcs.push((e.u as usize, e.v as usize, -w));
        }
    }
    let mut dist = vec![0i64; n];
    for i in 0..n {
        let mut changed = false;
        for &(u, v, c) in &arcs {
            if dist[u] + c < dist[v] {
                dist[v] = dist[u] + c;
                changed = true;
            }
        }
        if !changed {
            return false;
        }
        if i == n - 1 && changed {
            return true;
        }
    }
    false
}
