//! Weighted-graph data model, deterministic generators, file I/O and the
//! metric queries every other module leans on.

use crate::error::{Error, Result};
use crate::fixed::Fx;
use crate::rng::RandomnessSource;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::path::Path;

/// Maximum-weight exponent: input lengths must lie in [1, n^C].
pub const DEFAULT_WEIGHT_EXPONENT: u32 = 3;

pub type VertexId = u32;
pub type EdgeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub w: Fx,
}

impl Edge {
    pub fn other(&self, x: VertexId) -> VertexId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Undirected connected graph with positive lengths. Immutable after
/// construction; safe to share across parallel trials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<EdgeId>>,
}

impl WeightedGraph {
    /// Build and validate: connected, no self-loops, ids in range, lengths
    /// in [1, n^C] natural units.
    pub fn new(n: usize, edges: Vec<(VertexId, VertexId, Fx)>) -> Result<Self> {
        Self::with_exponent(n, edges, DEFAULT_WEIGHT_EXPONENT)
    }

    pub fn with_exponent(
        n: usize,
        edges: Vec<(VertexId, VertexId, Fx)>,
        weight_exponent: u32,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("graph must have at least one vertex".into()));
        }
        let max_w = max_weight(n, weight_exponent);
        let mut es = Vec::with_capacity(edges.len());
        for (u, v, w) in edges {
            if u == v {
                return Err(Error::Validation(format!("self-loop at vertex {u}")));
            }
            if u as usize >= n || v as usize >= n {
                return Err(Error::Validation(format!(
                    "edge ({u},{v}) out of range for n={n}"
                )));
            }
            if w < Fx::ONE || w > max_w {
                return Err(Error::Validation(format!(
                    "length {w} of edge ({u},{v}) outside [1, n^{weight_exponent}]"
                )));
            }
            es.push(Edge { u, v, w });
        }
        let mut adj = vec![Vec::new(); n];
        for (i, e) in es.iter().enumerate() {
            adj[e.u as usize].push(i as EdgeId);
            adj[e.v as usize].push(i as EdgeId);
        }
        let g = WeightedGraph { n, edges: es, adj };
        if !g.is_connected() {
            return Err(Error::Validation("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id as usize]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn incident(&self, v: VertexId) -> &[EdgeId] {
        &self.adj[v as usize]
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        0..self.n as VertexId
    }

    fn is_connected(&self) -> bool {
        if self.n == 1 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0 as VertexId];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &e in self.incident(v) {
                let u = self.edge(e).other(v);
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n
    }

    /// Hop distances from `s` (every edge counts 1).
    pub fn bfs_hops(&self, s: VertexId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n];
        let mut queue = std::collections::VecDeque::new();
        dist[s as usize] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &e in self.incident(v) {
                let u = self.edge(e).other(v);
                if dist[u as usize] == u32::MAX {
                    dist[u as usize] = dist[v as usize] + 1;
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// Hop diameter.
    pub fn hop_diameter(&self) -> u32 {
        self.vertices()
            .map(|v| self.bfs_hops(v).into_iter().max().unwrap())
            .max()
            .unwrap()
    }

    /// Edge set of a hop-BFS tree rooted at `s`.
    pub fn bfs_tree(&self, s: VertexId) -> Vec<EdgeId> {
        let mut seen = vec![false; self.n];
        let mut queue = std::collections::VecDeque::new();
        let mut tree = Vec::with_capacity(self.n.saturating_sub(1));
        seen[s as usize] = true;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &e in self.incident(v) {
                let u = self.edge(e).other(v);
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    tree.push(e);
                    queue.push_back(u);
                }
            }
        }
        tree
    }
}

/// Exact shortest distances from one source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathMetric {
    pub source: VertexId,
    pub dist: Vec<Fx>,
    pub parent_edge: Vec<Option<EdgeId>>,
}

/// Dijkstra over the full graph. Ties broken by (distance, vertex id) so the
/// parent structure is deterministic.
pub fn dijkstra(g: &WeightedGraph, s: VertexId) -> PathMetric {
    dijkstra_filtered(g, s, |_| true)
}

/// Dijkstra restricted to edges passing `keep` (used for tree metrics).
pub fn dijkstra_filtered(
    g: &WeightedGraph,
    s: VertexId,
    keep: impl Fn(EdgeId) -> bool,
) -> PathMetric {
    let mut dist = vec![Fx::INF; g.n()];
    let mut parent_edge = vec![None; g.n()];
    let mut heap = BinaryHeap::new();
    dist[s as usize] = Fx::ZERO;
    heap.push(Reverse((Fx::ZERO, s)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[v as usize] {
            continue;
        }
        for &e in g.incident(v) {
            if !keep(e) {
                continue;
            }
            let u = g.edge(e).other(v);
            let nd = d.sat_add(g.edge(e).w);
            if nd < dist[u as usize] {
                dist[u as usize] = nd;
                parent_edge[u as usize] = Some(e);
                heap.push(Reverse((nd, u)));
            }
        }
    }
    PathMetric {
        source: s,
        dist,
        parent_edge,
    }
}

/// Dijkstra under an override weight function (zero weights allowed).
pub fn dijkstra_weights(g: &WeightedGraph, s: VertexId, weights: &[Fx]) -> PathMetric {
    assert_eq!(weights.len(), g.m());
    let mut dist = vec![Fx::INF; g.n()];
    let mut parent_edge = vec![None; g.n()];
    let mut heap = BinaryHeap::new();
    dist[s as usize] = Fx::ZERO;
    heap.push(Reverse((Fx::ZERO, s)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[v as usize] {
            continue;
        }
        for &e in g.incident(v) {
            let u = g.edge(e).other(v);
            let nd = d.sat_add(weights[e as usize]);
            if nd < dist[u as usize] {
                dist[u as usize] = nd;
                parent_edge[u as usize] = Some(e);
                heap.push(Reverse((nd, u)));
            }
        }
    }
    PathMetric { source: s, dist, parent_edge }
}

pub fn max_weight(n: usize, exponent: u32) -> Fx {
    Fx::from_units((n as u64).pow(exponent))
}

/// How edge lengths are drawn by the generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightDist {
    Unit,
    /// Integer lengths uniform in [lo, hi] natural units.
    UniformInt { lo: u64, hi: u64 },
}

impl WeightDist {
    fn sample(&self, rng: &mut impl Rng) -> Fx {
        match *self {
            WeightDist::Unit => Fx::ONE,
            WeightDist::UniformInt { lo, hi } => Fx::from_units(rng.gen_range(lo..=hi)),
        }
    }
}

/// Deterministic graph recipe: identical spec and seed give the identical
/// graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum GraphSpec {
    Line { n: usize, weights: WeightDist },
    Grid { rows: usize, cols: usize, weights: WeightDist },
    ErdosRenyiConnected { n: usize, p: f64, weights: WeightDist },
    RandomGeometric { n: usize, radius: f64, weights: WeightDist },
    /// Paths of length about sqrt(n) hanging off a hub vertex; stresses the
    /// sqrt(n)+D shortcut regime.
    StarOfPaths { n: usize, weights: WeightDist },
    File { path: String },
}

const GENERATION_RETRIES: usize = 64;

/// Pure function of (spec, seed).
pub fn generate(spec: &GraphSpec, seed: u64) -> Result<WeightedGraph> {
    let src = RandomnessSource::new(seed);
    match spec {
        GraphSpec::Line { n, weights } => {
            require_n(*n)?;
            let mut rng = src.rng();
            let edges = (0..*n - 1)
                .map(|i| (i as VertexId, (i + 1) as VertexId, weights.sample(&mut rng)))
                .collect();
            WeightedGraph::new(*n, edges)
        }
        GraphSpec::Grid { rows, cols, weights } => {
            require_n(rows * cols)?;
            let mut rng = src.rng();
            let id = |r: usize, c: usize| (r * cols + c) as VertexId;
            let mut edges = Vec::new();
            for r in 0..*rows {
                for c in 0..*cols {
                    if c + 1 < *cols {
                        edges.push((id(r, c), id(r, c + 1), weights.sample(&mut rng)));
                    }
                    if r + 1 < *rows {
                        edges.push((id(r, c), id(r + 1, c), weights.sample(&mut rng)));
                    }
                }
            }
            WeightedGraph::new(rows * cols, edges)
        }
        GraphSpec::ErdosRenyiConnected { n, p, weights } => {
            require_n(*n)?;
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Validation(format!("p={p} outside [0,1]")));
            }
            for attempt in 0..GENERATION_RETRIES {
                let mut rng = src.trial(attempt as u64).rng();
                let mut edges = Vec::new();
                for u in 0..*n {
                    for v in u + 1..*n {
                        if rng.gen_bool(*p) {
                            edges.push((u as VertexId, v as VertexId, weights.sample(&mut rng)));
                        }
                    }
                }
                if let Ok(g) = WeightedGraph::new(*n, edges) {
                    return Ok(g);
                }
            }
            Err(Error::GenerationFailure {
                attempts: GENERATION_RETRIES,
                msg: format!("no connected G({n},{p}) sample"),
            })
        }
        GraphSpec::RandomGeometric { n, radius, weights } => {
            require_n(*n)?;
            for attempt in 0..GENERATION_RETRIES {
                let mut rng = src.trial(attempt as u64).rng();
                let pts: Vec<(f64, f64)> =
                    (0..*n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
                let mut edges = Vec::new();
                for u in 0..*n {
                    for v in u + 1..*n {
                        let dx = pts[u].0 - pts[v].0;
                        let dy = pts[u].1 - pts[v].1;
                        if (dx * dx + dy * dy).sqrt() <= *radius {
                            edges.push((u as VertexId, v as VertexId, weights.sample(&mut rng)));
                        }
                    }
                }
                if let Ok(g) = WeightedGraph::new(*n, edges) {
                    return Ok(g);
                }
            }
            Err(Error::GenerationFailure {
                attempts: GENERATION_RETRIES,
                msg: format!("no connected RGG({n},{radius}) sample"),
            })
        }
        GraphSpec::StarOfPaths { n, weights } => {
            require_n(*n)?;
            let mut rng = src.rng();
            let k = ((*n as f64).sqrt().round() as usize).max(1);
            let mut edges = Vec::new();
            let mut next = 1u32;
            // distribute n-1 non-hub vertices over k paths
            for path in 0..k {
                let len = (n - 1) / k + usize::from(path < (n - 1) % k);
                let mut prev = 0u32; // hub
                for _ in 0..len {
                    edges.push((prev, next, weights.sample(&mut rng)));
                    prev = next;
                    next += 1;
                }
            }
            WeightedGraph::new(*n, edges)
        }
        GraphSpec::File { path } => load(Path::new(path)),
    }
}

fn require_n(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::Validation(format!("generator needs n >= 2, got {n}")))
    } else {
        Ok(())
    }
}

/// Edge-list text format: first line "n m", then m lines "u v w" with w a
/// decimal converted to fixed point.
pub fn parse_edge_list(text: &str) -> Result<WeightedGraph> {
    let mut lines = text.lines().enumerate();
    let (ln, header) = lines
        .next()
        .ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let mut it = header.split_whitespace();
    let n: usize = parse_tok(it.next(), ln, "n")?;
    let m: usize = parse_tok(it.next(), ln, "m")?;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, line) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: format!("expected {m} edge lines"),
        })?;
        let mut it = line.split_whitespace();
        let u: VertexId = parse_tok(it.next(), ln, "u")?;
        let v: VertexId = parse_tok(it.next(), ln, "v")?;
        let w_str = it.next().ok_or(Error::Parse {
            line: ln + 1,
            msg: "missing weight".into(),
        })?;
        let w = Fx::parse_decimal(w_str).map_err(|msg| Error::Parse { line: ln + 1, msg })?;
        edges.push((u, v, w));
    }
    WeightedGraph::new(n, edges)
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let tok = tok.ok_or(Error::Parse {
        line: line + 1,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|e| Error::Parse {
        line: line + 1,
        msg: format!("bad {what}: {e}"),
    })
}

pub fn to_edge_list(g: &WeightedGraph) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", g.n(), g.m()).unwrap();
    for e in g.edges() {
        writeln!(out, "{} {} {}", e.u, e.v, e.w.to_decimal_string()).unwrap();
    }
    out
}

pub fn load(path: &Path) -> Result<WeightedGraph> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

pub fn store(g: &WeightedGraph, path: &Path) -> Result<()> {
    std::fs::write(path, to_edge_list(g))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line4() -> WeightedGraph {
        generate(
            &GraphSpec::Line { n: 4, weights: WeightDist::Unit },
            0,
        )
        .unwrap()
    }

    #[test]
    fn line_graph_shape() {
        let g = line4();
        assert_eq!(g.n(), 4);
        let es: Vec<_> = g.edges().iter().map(|e| (e.u, e.v, e.w)).collect();
        assert_eq!(es, vec![(0, 1, Fx::ONE), (1, 2, Fx::ONE), (2, 3, Fx::ONE)]);
    }

    #[test]
    fn grid_2x2_shape() {
        let g = generate(
            &GraphSpec::Grid { rows: 2, cols: 2, weights: WeightDist::Unit },
            0,
        )
        .unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.m(), 4);
        assert_eq!(g.hop_diameter(), 2);
    }

    #[test]
    fn erdos_renyi_is_deterministic() {
        let spec = GraphSpec::ErdosRenyiConnected {
            n: 64,
            p: 0.2,
            weights: WeightDist::UniformInt { lo: 1, hi: 10 },
        };
        let a = generate(&spec, 7).unwrap();
        let b = generate(&spec, 7).unwrap();
        assert_eq!(a.edges(), b.edges());
        let c = generate(&spec, 8).unwrap();
        assert_ne!(a.edges(), c.edges());
    }

    #[test]
    fn star_of_paths_counts() {
        let g = generate(
            &GraphSpec::StarOfPaths { n: 64, weights: WeightDist::Unit },
            3,
        )
        .unwrap();
        assert_eq!(g.n(), 64);
        assert_eq!(g.m(), 63);
        assert_eq!(g.incident(0).len(), 8);
    }

    #[test]
    fn dijkstra_line() {
        let g = WeightedGraph::new(
            3,
            vec![(0, 1, Fx::ONE), (1, 2, Fx::from_units(5))],
        )
        .unwrap();
        let pm = dijkstra(&g, 0);
        assert_eq!(pm.dist, vec![Fx::ZERO, Fx::ONE, Fx::from_units(6)]);
    }

    #[test]
    fn parse_and_round_trip() {
        let g = parse_edge_list("3 2\n0 1 1\n1 2 5\n").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.m(), 2);

        let grid = generate(
            &GraphSpec::Grid { rows: 4, cols: 4, weights: WeightDist::UniformInt { lo: 1, hi: 9 } },
            11,
        )
        .unwrap();
        let back = parse_edge_list(&to_edge_list(&grid)).unwrap();
        assert_eq!(grid, back);
    }

    #[test]
    fn zero_weight_rejected() {
        let err = parse_edge_list("2 1\n0 1 0\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn disconnected_rejected() {
        assert!(WeightedGraph::new(4, vec![(0, 1, Fx::ONE), (2, 3, Fx::ONE)]).is_err());
    }

    #[test]
    fn triangle_inequality_over_edges() {
        let g = generate(
            &GraphSpec::ErdosRenyiConnected {
                n: 32,
                p: 0.2,
                weights: WeightDist::UniformInt { lo: 1, hi: 20 },
            },
            5,
        )
        .unwrap();
        let pm = dijkstra(&g, 0);
        for e in g.edges() {
            let du = pm.dist[e.u as usize];
            let dv = pm.dist[e.v as usize];
            let gap = if du > dv { du - dv } else { dv - du };
            assert!(gap <= e.w);
        }
    }
}
