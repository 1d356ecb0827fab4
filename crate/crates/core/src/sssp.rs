//! The reweighting main loop: one decomposition level per call, geometric R
//! growth, distance extraction over the resulting forest, and the boosted
//! spanning tree.

use crate::cluster::{
    aggregate_path_to_root, assign_cluster_roots, heads_tails, Fidelity, RootedTree,
    ShortcutProvider,
};
use crate::error::{Error, Result};
use crate::fixed::Fx;
use crate::graph::{dijkstra_filtered, EdgeId, VertexId, WeightedGraph};
use crate::ldd::{decompose_contracted, ContractedGraph, DecompositionParams};
use crate::partwise::{AggOp, AggregateSpec, ValidPartition};
use crate::rng::RandomnessSource;

/// The implementation's pinned constants for the asymptotic knobs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AlgorithmConstants {
    /// Reweighting increment constant (edges cut by a level gain
    /// (c1/beta) ln n times the level's R).
    pub c1: f64,
    /// Expected per-level stretch constant; only enters the level-count
    /// formula for the stretch bound.
    pub c2: f64,
    /// Main loop runs while R < n^c.
    pub termination_exponent: f64,
    /// Repetition counts are ceil(gamma * log2 n).
    pub gamma: f64,
}

impl Default for AlgorithmConstants {
    fn default() -> Self {
        AlgorithmConstants {
            c1: crate::config::DEFAULT_C1,
            c2: crate::config::DEFAULT_C2,
            termination_exponent: crate::config::DEFAULT_TERMINATION_EXPONENT,
            gamma: crate::config::DEFAULT_GAMMA,
        }
    }
}

impl AlgorithmConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 >= self.c2 && self.c2 >= 1.0) {
            return Err(Error::Validation(format!(
                "need c1 >= c2 >= 1, got c1={} c2={}",
                self.c1, self.c2
            )));
        }
        if self.termination_exponent <= 0.0 || self.gamma <= 0.0 {
            return Err(Error::Validation("exponent and gamma must be positive".into()));
        }
        Ok(())
    }

    /// R multiplier per level: (c1/beta) ln n.
    pub fn growth_factor(&self, n: usize, beta: f64) -> f64 {
        self.c1 / beta * (n.max(2) as f64).ln()
    }

    pub fn repetitions(&self, n: usize) -> usize {
        (self.gamma * (n.max(2) as f64).log2()).ceil() as usize
    }

    /// Loop termination threshold n^c.
    pub fn termination_threshold(&self, n: usize) -> Fx {
        Fx::from_f64_ceil((n as f64).powf(self.termination_exponent))
    }
}

/// Level needed for the stretch bound at distance m (natural units):
/// ceil(log(2m) / (log(c1/c2) + log(1/beta))).
pub fn stretch_level(m_natural: f64, k: &AlgorithmConstants, beta: f64) -> u32 {
    if m_natural <= 0.0 {
        return 0;
    }
    let denom = (k.c1 / k.c2).ln() + (1.0 / beta).ln();
    ((2.0 * m_natural).ln() / denom).ceil().max(1.0) as u32
}

/// ((c1 ln n) / beta)^t, the distance bound after t levels from R_0 = 1.
pub fn stretch_bound(n: usize, k: &AlgorithmConstants, beta: f64, t: u32) -> f64 {
    k.growth_factor(n, beta).powi(t as i32)
}

/// The pair (w, T) plus the scale R it is claimed to satisfy the invariant
/// with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubroutineState {
    pub weights: Vec<Fx>,
    pub forest: Vec<bool>,
    pub scale: Fx,
}

impl SubroutineState {
    pub fn initial(g: &WeightedGraph, r0: Fx) -> Self {
        SubroutineState {
            weights: g.edges().iter().map(|e| e.w).collect(),
            forest: vec![false; g.m()],
            scale: r0,
        }
    }

    pub fn forest_edges(&self) -> Vec<EdgeId> {
        self.forest
            .iter()
            .enumerate()
            .filter_map(|(i, &inf)| inf.then_some(i as EdgeId))
            .collect()
    }

    /// Distances within the forest, original weights.
    pub fn forest_metric(&self, g: &WeightedGraph, s: VertexId) -> Vec<Fx> {
        dijkstra_filtered(g, s, |e| self.forest[e as usize]).dist
    }
}

/// Machine check of the five-clause invariant, each clause independently.
pub fn check_invariant(g: &WeightedGraph, state: &SubroutineState) -> Result<()> {
    let cg = ContractedGraph::from_zero_components(g, &state.weights);
    let r = state.scale;

    // clause 2: edges inside a part weigh zero
    for (i, e) in g.edges().iter().enumerate() {
        let same = cg.part_of[e.u as usize] == cg.part_of[e.v as usize];
        if same && state.weights[i] != Fx::ZERO {
            return Err(Error::InvariantViolation {
                clause: 2,
                msg: format!("edge {i} inside a part has weight {}", state.weights[i]),
            });
        }
        // clause 3: inter-part edges weigh at least R
        if !same && state.weights[i] < r {
            return Err(Error::InvariantViolation {
                clause: 3,
                msg: format!("edge {i} between parts has weight {} < {r}", state.weights[i]),
            });
        }
    }

    // clause 5: forest spans each part, no inter-part edges
    for (i, &inf) in state.forest.iter().enumerate() {
        if !inf {
            continue;
        }
        let e = g.edge(i as EdgeId);
        if cg.part_of[e.u as usize] != cg.part_of[e.v as usize] {
            return Err(Error::InvariantViolation {
                clause: 5,
                msg: format!("forest edge {i} crosses parts"),
            });
        }
    }
    for part in &cg.parts {
        let count = spanning_check(g, state, part)?;
        if count != part.len() {
            return Err(Error::InvariantViolation {
                clause: 5,
                msg: format!("forest does not span part of size {} (reached {count})", part.len()),
            });
        }
    }

    // clause 1 + 4: diameters within parts (induced metric vs forest metric)
    for part in &cg.parts {
        if part.len() <= 1 {
            continue;
        }
        let inset: std::collections::HashSet<VertexId> = part.iter().copied().collect();
        for &x in part {
            let induced = dijkstra_in_set(g, x, &inset, |_| true);
            let via_forest = dijkstra_in_set(g, x, &inset, |e| state.forest[e as usize]);
            for &y in part {
                let d1 = induced[&y];
                if d1 > r {
                    return Err(Error::InvariantViolation {
                        clause: 1,
                        msg: format!("d_G[C]({x},{y}) = {d1} > R = {r}"),
                    });
                }
                let d4 = via_forest[&y];
                if d4 > r {
                    return Err(Error::InvariantViolation {
                        clause: 4,
                        msg: format!("d_T({x},{y}) = {d4} > R = {r}"),
                    });
                }
            }
        }
    }
    Ok(())
}

fn spanning_check(g: &WeightedGraph, state: &SubroutineState, part: &[VertexId]) -> Result<usize> {
    let inset: std::collections::HashSet<VertexId> = part.iter().copied().collect();
    let mut seen = std::collections::HashSet::new();
    let mut stack = vec![part[0]];
    seen.insert(part[0]);
    while let Some(v) = stack.pop() {
        for &e in g.incident(v) {
            if !state.forest[e as usize] {
                continue;
            }
            let u = g.edge(e).other(v);
            if inset.contains(&u) && seen.insert(u) {
                stack.push(u);
            }
        }
    }
    Ok(seen.len())
}

fn dijkstra_in_set(
    g: &WeightedGraph,
    s: VertexId,
    inset: &std::collections::HashSet<VertexId>,
    keep: impl Fn(EdgeId) -> bool,
) -> std::collections::HashMap<VertexId, Fx> {
    use std::cmp::Reverse;
    let mut dist: std::collections::HashMap<VertexId, Fx> = Default::default();
    let mut heap = std::collections::BinaryHeap::new();
    dist.insert(s, Fx::ZERO);
    heap.push(Reverse((Fx::ZERO, s)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[&v] {
            continue;
        }
        for &e in g.incident(v) {
            if !keep(e) {
                continue;
            }
            let u = g.edge(e).other(v);
            if !inset.contains(&u) {
                continue;
            }
            let nd = d + g.edge(e).w;
            if dist.get(&u).is_none_or(|&cur| nd < cur) {
                dist.insert(u, nd);
                heap.push(Reverse((nd, u)));
            }
        }
    }
    // unreachable members count as infinitely far
    let mut out = dist;
    for &v in inset {
        out.entry(v).or_insert(Fx::INF);
    }
    out
}

#[derive(Debug, Clone)]
pub struct LevelInfo {
    /// Parts of the contracted graph before this level ran.
    pub parts_before: usize,
    pub parts_after: usize,
    pub charged_rounds: u64,
    pub flagged_retries: usize,
    /// R the output claims the invariant with.
    pub scale_after: Fx,
}

/// One reweighting level: contract zero components, decompose at cut rate
/// beta on scale R, zero the merged inter-part edges, raise the cut ones by
/// (c1/beta)(ln n) R, and absorb the BFS-tree edges into the forest. The
/// output satisfies the invariant with parameter (c1/beta)(ln n) R.
pub fn ldd_subroutine(
    g: &WeightedGraph,
    state: &SubroutineState,
    beta: f64,
    k: &AlgorithmConstants,
    provider: ShortcutProvider,
    src: &RandomnessSource,
) -> Result<(SubroutineState, LevelInfo)> {
    let cg = ContractedGraph::from_zero_components(g, &state.weights);
    let partition = ValidPartition::new(g, cg.parts.clone())?;
    let sc = provider.provide(g, &partition);
    let params = DecompositionParams::new(beta)
        .with_scale(state.scale)
        .with_horizon_n(g.n());

    let mut flagged_retries = 0;
    let contracted = loop {
        match decompose_contracted(g, &cg, &params, &sc, &src.trial(flagged_retries as u64)) {
            Ok(c) => break c,
            Err(Error::FlaggedTrial) if flagged_retries < crate::config::RETRY_BUDGET => {
                flagged_retries += 1;
            }
            Err(e) => return Err(e),
        }
    };

    let increment = state.scale.mul_real_ceil(k.growth_factor(g.n(), beta));
    let mut weights = state.weights.clone();
    let mut forest = state.forest.clone();
    for &(pu, pv, _, host_edge) in &cg.h_edges {
        let same = contracted.result.root[pu as usize] == contracted.result.root[pv as usize];
        if same {
            weights[host_edge as usize] = Fx::ZERO;
        } else {
            weights[host_edge as usize] += increment;
        }
    }
    for &h_edge in &contracted.result.tree_edges {
        forest[cg.host_edge(h_edge) as usize] = true;
    }
    let parts_after = {
        let mut roots: Vec<VertexId> = contracted.result.root.clone();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    };
    let info = LevelInfo {
        parts_before: cg.parts.len(),
        parts_after,
        charged_rounds: contracted.charged_rounds,
        flagged_retries,
        scale_after: increment,
    };
    Ok((
        SubroutineState { weights, forest, scale: increment },
        info,
    ))
}

#[derive(Debug, Clone)]
pub struct ForestRun {
    /// Snapshot after every level, for invariant auditing.
    pub levels: Vec<(SubroutineState, LevelInfo)>,
    pub forest_edges: Vec<EdgeId>,
    pub charged_rounds: u64,
}

impl ForestRun {
    pub fn final_state(&self) -> &SubroutineState {
        &self.levels.last().expect("at least one level runs").0
    }

    /// True when the forest is one spanning tree.
    pub fn spans(&self, g: &WeightedGraph) -> bool {
        self.forest_edges.len() == g.n() - 1
            && RootedTree::new(g, 0, self.forest_edges.clone()).is_ok()
    }
}

/// Iterate the subroutine with R growing by (c1/beta) ln n per level until
/// R >= n^c.
pub fn expected_sp_forest(
    g: &WeightedGraph,
    beta: f64,
    r0: Fx,
    k: &AlgorithmConstants,
    provider: ShortcutProvider,
    src: &RandomnessSource,
) -> Result<ForestRun> {
    k.validate()?;
    if r0 == Fx::ZERO {
        return Err(Error::Validation("R_0 must be positive".into()));
    }
    let threshold = k.termination_threshold(g.n());
    let mut state = SubroutineState::initial(g, r0);
    let mut levels = Vec::new();
    let mut charged_rounds = 0u64;
    let mut level_idx = 0u64;
    while state.scale < threshold {
        let (next, info) =
            ldd_subroutine(g, &state, beta, k, provider, &src.trial(level_idx))?;
        charged_rounds += info.charged_rounds;
        state = next;
        levels.push((state.clone(), info));
        level_idx += 1;
        if level_idx > 10_000 {
            return Err(Error::Internal("runaway level loop".into()));
        }
    }
    if levels.is_empty() {
        // R_0 already past the threshold: run one level anyway so a forest
        // exists
        let (next, info) = ldd_subroutine(g, &state, beta, k, provider, &src.trial(0))?;
        charged_rounds += info.charged_rounds;
        state = next;
        levels.push((state.clone(), info));
    }
    let forest_edges = state.forest_edges();
    Ok(ForestRun { levels, forest_edges, charged_rounds })
}

/// Approximate-SSSP output: estimates, parents and the tree (or forest)
/// behind them.
#[derive(Debug, Clone)]
pub struct SsspResult {
    pub source: VertexId,
    pub dist: Vec<Fx>,
    pub parent: Vec<Option<(VertexId, EdgeId)>>,
    pub tree_edges: Vec<EdgeId>,
    pub charged_rounds: u64,
    pub fidelity: Fidelity,
}

impl SsspResult {
    /// Dump format: one line "v d_min parent" per vertex (parent -1 at the
    /// source and outside the tree).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (v, d) in self.dist.iter().enumerate() {
            let p = self.parent[v].map_or(-1i64, |(u, _)| u as i64);
            let d_str = if d.is_inf() { "inf".to_string() } else { d.to_decimal_string() };
            out.push_str(&format!("{v} {d_str} {p}\n"));
        }
        out
    }
}

/// Distances from s over one forest: depth extraction, parent derivation by
/// depths, then a weight fold along root paths. Vertices outside s's
/// component get the infinite sentinel.
pub fn expected_sp_distance(
    g: &WeightedGraph,
    beta: f64,
    s: VertexId,
    k: &AlgorithmConstants,
    provider: ShortcutProvider,
    src: &RandomnessSource,
    fidelity: Fidelity,
) -> Result<SsspResult> {
    let run = expected_sp_forest(g, beta, Fx::ONE, k, provider, &src.trial(0))?;
    let mut res = forest_distance(g, s, &run.forest_edges, provider, &src.trial(1), fidelity)?;
    res.charged_rounds += run.charged_rounds;
    Ok(res)
}

/// The distance-extraction stage alone, over a given forest.
pub fn forest_distance(
    g: &WeightedGraph,
    s: VertexId,
    forest_edges: &[EdgeId],
    provider: ShortcutProvider,
    src: &RandomnessSource,
    fidelity: Fidelity,
) -> Result<SsspResult> {
    let mut rounds = 0u64;
    let tree = RootedTree::from_forest_component(g, s, forest_edges)?;
    sp_distance_over_tree(g, s, &tree, provider, src, fidelity, &mut rounds)
}

fn sp_distance_over_tree(
    g: &WeightedGraph,
    s: VertexId,
    tree: &RootedTree,
    provider: ShortcutProvider,
    src: &RandomnessSource,
    fidelity: Fidelity,
    rounds: &mut u64,
) -> Result<SsspResult> {
    let ht = heads_tails(g, tree, provider, src, fidelity)?;
    *rounds += ht.rounds;
    let roots = assign_cluster_roots(tree, &ht.hierarchy);

    // depths: fold 1 along the path to the root
    let ones = vec![1u64; g.n()];
    let depth_run = aggregate_path_to_root(
        g,
        tree,
        &ht.hierarchy,
        &roots,
        AggregateSpec::new(AggOp::Sum, 32),
        &ones,
        provider,
        fidelity,
    )?;
    *rounds += depth_run.rounds;

    // each non-source tree vertex finds the one tree neighbor with smaller
    // depth
    let mut parent: Vec<Option<(VertexId, EdgeId)>> = vec![None; g.n()];
    for &v in tree.vertices() {
        if v == s {
            continue;
        }
        let dv = depth_run.values[v as usize];
        let up = tree
            .neighbors(v)
            .iter()
            .find(|&&(u, _)| depth_run.values[u as usize] == dv - 1);
        match up {
            Some(&(u, e)) => parent[v as usize] = Some((u, e)),
            None => {
                return Err(Error::Internal(format!(
                    "tree vertex {v} has no neighbor one level up"
                )))
            }
        }
    }

    // distances: fold the parent-edge weight along the path to the root
    let xs: Vec<u64> = g
        .vertices()
        .map(|v| parent[v as usize].map_or(0, |(_, e)| g.edge(e).w.0))
        .collect();
    let dist_run = aggregate_path_to_root(
        g,
        tree,
        &ht.hierarchy,
        &roots,
        AggregateSpec::new(AggOp::Sum, 64),
        &xs,
        provider,
        fidelity,
    )?;
    *rounds += dist_run.rounds;

    let mut dist = vec![Fx::INF; g.n()];
    for &v in tree.vertices() {
        dist[v as usize] = Fx(dist_run.values[v as usize]);
    }
    Ok(SsspResult {
        source: s,
        dist,
        parent,
        tree_edges: tree.edge_ids().to_vec(),
        charged_rounds: *rounds,
        fidelity,
    })
}

/// Boosted spanning tree: ceil(gamma log2 n) independent distance runs,
/// pointwise minimum, then for every vertex one relaxation edge to a
/// neighbor u with d_min(u) + w <= d_min(v) (minimum neighbor id).
pub fn sssp_tree(
    g: &WeightedGraph,
    beta: f64,
    s: VertexId,
    k: &AlgorithmConstants,
    provider: ShortcutProvider,
    src: &RandomnessSource,
    fidelity: Fidelity,
) -> Result<SsspResult> {
    k.validate()?;
    let reps = k.repetitions(g.n());
    let mut d_min = vec![Fx::INF; g.n()];
    let mut rounds = 0u64;
    for rep in 0..reps {
        let run = expected_sp_distance(g, beta, s, k, provider, &src.trial(rep as u64), fidelity)?;
        rounds += run.charged_rounds;
        for (dm, d) in d_min.iter_mut().zip(&run.dist) {
            *dm = (*dm).min(*d);
        }
    }
    build_relaxation_tree(g, s, d_min, rounds, fidelity)
}

/// The relaxation-edge construction shared by sssp_tree and tests.
pub fn build_relaxation_tree(
    g: &WeightedGraph,
    s: VertexId,
    d_min: Vec<Fx>,
    charged_rounds: u64,
    fidelity: Fidelity,
) -> Result<SsspResult> {
    let mut parent: Vec<Option<(VertexId, EdgeId)>> = vec![None; g.n()];
    let mut tree_edges = Vec::with_capacity(g.n() - 1);
    for v in g.vertices() {
        if v == s {
            continue;
        }
        if d_min[v as usize].is_inf() {
            return Err(Error::Internal(format!(
                "vertex {v} unreached in every repetition"
            )));
        }
        let mut choice: Option<(VertexId, EdgeId)> = None;
        for &e in g.incident(v) {
            let u = g.edge(e).other(v);
            if d_min[u as usize].sat_add(g.edge(e).w) <= d_min[v as usize]
                && choice.is_none_or(|(cu, _)| u < cu) {
                    choice = Some((u, e));
                }
        }
        match choice {
            Some((u, e)) => {
                parent[v as usize] = Some((u, e));
                tree_edges.push(e);
            }
            None => {
                return Err(Error::Internal(format!(
                    "no relaxation neighbor at vertex {v}"
                )))
            }
        }
    }
    // parents strictly decrease d_min, so these edges form a spanning tree
    // rooted at s; make that structural claim concrete
    RootedTree::new(g, s, tree_edges.clone())?;
    Ok(SsspResult {
        source: s,
        dist: d_min,
        parent,
        tree_edges,
        charged_rounds,
        fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{dijkstra, generate, GraphSpec, WeightDist, WeightedGraph};

    fn consts() -> AlgorithmConstants {
        AlgorithmConstants::default()
    }

    #[test]
    fn initial_state_satisfies_invariant() {
        let g = generate(
            &GraphSpec::ErdosRenyiConnected { n: 32, p: 0.2, weights: WeightDist::UniformInt { lo: 1, hi: 9 } },
            3,
        )
        .unwrap();
        let state = SubroutineState::initial(&g, Fx::ONE);
        check_invariant(&g, &state).unwrap();
        // also with the sub-unit R_0 values the labeling pass uses
        let state = SubroutineState::initial(&g, Fx(Fx::ONE.0 >> 3));
        check_invariant(&g, &state).unwrap();
    }

    #[test]
    fn single_edge_merge_zeroes_and_spans() {
        let g = WeightedGraph::new(2, vec![(0, 1, Fx::from_units(5))]).unwrap();
        let k = consts();
        // find a seed where the first level merges the two endpoints
        let mut merged_seen = false;
        for seed in 0..40u64 {
            let state = SubroutineState::initial(&g, Fx::ONE);
            let (next, _) = ldd_subroutine(
                &g,
                &state,
                0.5,
                &k,
                ShortcutProvider::Empty,
                &RandomnessSource::new(seed),
            )
            .unwrap();
            if next.weights[0] == Fx::ZERO {
                merged_seen = true;
                assert!(next.forest[0], "merged endpoints must share a tree edge");
                check_invariant(&g, &next).unwrap();
                break;
            }
        }
        assert!(merged_seen, "no merging seed found in 40 tries");
    }

    #[test]
    fn subroutine_preserves_invariant_random() {
        for seed in 0..6u64 {
            let g = generate(
                &GraphSpec::ErdosRenyiConnected {
                    n: 64,
                    p: 0.1,
                    weights: WeightDist::UniformInt { lo: 1, hi: 20 },
                },
                seed,
            )
            .unwrap();
            let k = consts();
            let mut state = SubroutineState::initial(&g, Fx::ONE);
            check_invariant(&g, &state).unwrap();
            for lvl in 0..3 {
                let (next, _) = ldd_subroutine(
                    &g,
                    &state,
                    0.125,
                    &k,
                    ShortcutProvider::Empty,
                    &RandomnessSource::new(seed * 100 + lvl),
                )
                .unwrap();
                check_invariant(&g, &next).unwrap();
                state = next;
            }
        }
    }

    #[test]
    fn forest_run_terminates_and_is_sound() {
        let g = generate(
            &GraphSpec::Grid { rows: 8, cols: 8, weights: WeightDist::Unit },
            5,
        )
        .unwrap();
        let k = consts();
        let run = expected_sp_forest(
            &g,
            0.125,
            Fx::ONE,
            &k,
            ShortcutProvider::Empty,
            &RandomnessSource::new(11),
        )
        .unwrap();
        // iteration count matches the closed form
        let rho = k.growth_factor(g.n(), 0.125);
        let want_levels = ((g.n() as f64).powf(k.termination_exponent).ln() / rho.ln()).ceil();
        assert_eq!(run.levels.len() as f64, want_levels);
        // soundness at every level: finite forest distances dominate the metric
        let metric = dijkstra(&g, 0);
        for (state, _) in &run.levels {
            let td = state.forest_metric(&g, 0);
            for v in g.vertices() {
                if !td[v as usize].is_inf() {
                    assert!(td[v as usize] >= metric.dist[v as usize], "vertex {v}");
                }
            }
        }
    }

    #[test]
    fn two_vertex_forest_spans() {
        let g = WeightedGraph::new(2, vec![(0, 1, Fx::ONE)]).unwrap();
        let run = expected_sp_forest(
            &g,
            0.5,
            Fx::ONE,
            &consts(),
            ShortcutProvider::Empty,
            &RandomnessSource::new(2),
        )
        .unwrap();
        assert!(run.spans(&g), "the single edge must eventually merge");
        assert_eq!(run.forest_edges, vec![0]);
    }

    #[test]
    fn per_level_mean_stretch_bounded() {
        use rand::Rng;
        let g = generate(
            &GraphSpec::ErdosRenyiConnected { n: 48, p: 0.12, weights: WeightDist::UniformInt { lo: 1, hi: 8 } },
            21,
        )
        .unwrap();
        let k = consts();
        let kappa = crate::config::KAPPA_STRETCH * (g.n() as f64).ln();
        let mut rng = RandomnessSource::new(77).rng();
        let pairs: Vec<(u32, u32)> = (0..40)
            .map(|_| (rng.gen_range(0..48u32), rng.gen_range(0..48u32)))
            .filter(|(a, b)| a != b)
            .collect();
        // distances under the current reweighting
        let dist_under = |w: &Vec<Fx>, a: u32, b: u32| -> f64 {
            crate::graph::dijkstra_weights(&g, a, w).dist[b as usize].to_f64()
        };
        // sample-mean over pairs and independent trials, per level
        for lvl in 0..3u64 {
            let mut ratios = Vec::new();
            for trial in 0..8u64 {
                let mut state = SubroutineState::initial(&g, Fx::ONE);
                for sub in 0..=lvl {
                    let (next, _) = ldd_subroutine(
                        &g,
                        &state,
                        0.125,
                        &k,
                        ShortcutProvider::Empty,
                        &RandomnessSource::new(900 + 100 * trial + sub),
                    )
                    .unwrap();
                    if sub == lvl {
                        for &(a, b) in &pairs {
                            let before = dist_under(&state.weights, a, b);
                            let after = dist_under(&next.weights, a, b);
                            if before > 0.0 {
                                ratios.push(after / before);
                            }
                        }
                    }
                    state = next;
                }
            }
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            assert!(mean <= kappa, "level {lvl}: mean stretch {mean} > {kappa}");
        }
    }

    #[test]
    fn distance_extraction_matches_tree_metric() {
        let g = generate(
            &GraphSpec::ErdosRenyiConnected { n: 64, p: 0.1, weights: WeightDist::UniformInt { lo: 1, hi: 9 } },
            31,
        )
        .unwrap();
        let res = expected_sp_distance(
            &g,
            0.125,
            0,
            &consts(),
            ShortcutProvider::Empty,
            &RandomnessSource::new(4),
            Fidelity::RoundAccounted,
        )
        .unwrap();
        assert_eq!(res.dist[0], Fx::ZERO);
        // distances equal Dijkstra restricted to the tree component
        let in_tree: std::collections::HashSet<EdgeId> =
            res.tree_edges.iter().copied().collect();
        let oracle = dijkstra_filtered(&g, 0, |e| in_tree.contains(&e)).dist;
        for v in g.vertices() {
            if res.dist[v as usize].is_inf() {
                assert!(oracle[v as usize].is_inf());
            } else {
                assert_eq!(res.dist[v as usize], oracle[v as usize], "vertex {v}");
                // parent relation is exact along the tree
                if let Some((u, e)) = res.parent[v as usize] {
                    assert_eq!(
                        res.dist[v as usize],
                        res.dist[u as usize] + g.edge(e).w
                    );
                }
            }
        }
    }

    #[test]
    fn path_tree_distances_by_hand() {
        let g = WeightedGraph::new(
            3,
            vec![(0, 1, Fx::from_units(2)), (1, 2, Fx::from_units(3))],
        )
        .unwrap();
        let res = forest_distance(
            &g,
            0,
            &[0, 1],
            ShortcutProvider::Empty,
            &RandomnessSource::new(9),
            Fidelity::RoundAccounted,
        )
        .unwrap();
        assert_eq!(res.dist, vec![Fx::ZERO, Fx::from_units(2), Fx::from_units(5)]);
    }

    #[test]
    fn isolated_source_gets_only_itself() {
        let g = WeightedGraph::new(
            3,
            vec![(0, 1, Fx::from_units(2)), (1, 2, Fx::from_units(3))],
        )
        .unwrap();
        // empty forest: s is alone in its component
        let res = forest_distance(
            &g,
            1,
            &[],
            ShortcutProvider::Empty,
            &RandomnessSource::new(9),
            Fidelity::RoundAccounted,
        )
        .unwrap();
        assert_eq!(res.dist[1], Fx::ZERO);
        assert!(res.dist[0].is_inf());
        assert!(res.dist[2].is_inf());
    }

    #[test]
    fn sssp_tree_on_a_tree_is_exact() {
        let g = generate(&GraphSpec::Line { n: 12, weights: WeightDist::UniformInt { lo: 1, hi: 5 } }, 3)
            .unwrap();
        let res = sssp_tree(
            &g,
            0.25,
            0,
            &consts(),
            ShortcutProvider::Empty,
            &RandomnessSource::new(5),
            Fidelity::RoundAccounted,
        )
        .unwrap();
        let metric = dijkstra(&g, 0);
        assert_eq!(res.dist, metric.dist, "tree input forces exact distances");
        assert_eq!(res.tree_edges.len(), g.n() - 1);
    }

    #[test]
    fn sssp_triangle_avoids_heavy_edge() {
        let g = WeightedGraph::new(
            3,
            vec![
                (0, 1, Fx::ONE),
                (1, 2, Fx::ONE),
                (0, 2, Fx::from_units(10)),
            ],
        )
        .unwrap();
        let res = sssp_tree(
            &g,
            0.5,
            0,
            &consts(),
            ShortcutProvider::Empty,
            &RandomnessSource::new(77),
            Fidelity::RoundAccounted,
        )
        .unwrap();
        // 3-vertex enumeration: exact distances and the 10-edge excluded
        assert_eq!(res.dist, dijkstra(&g, 0).dist);
        assert!(!res.tree_edges.contains(&2));
    }

    #[test]
    fn sssp_soundness_and_telescoping() {
        let g = generate(
            &GraphSpec::Grid { rows: 6, cols: 6, weights: WeightDist::UniformInt { lo: 1, hi: 4 } },
            8,
        )
        .unwrap();
        let res = sssp_tree(
            &g,
            0.125,
            0,
            &consts(),
            ShortcutProvider::Empty,
            &RandomnessSource::new(6),
            Fidelity::RoundAccounted,
        )
        .unwrap();
        let metric = dijkstra(&g, 0);
        let in_tree: std::collections::HashSet<EdgeId> =
            res.tree_edges.iter().copied().collect();
        let tree_dist = dijkstra_filtered(&g, 0, |e| in_tree.contains(&e)).dist;
        for v in g.vertices() {
            // soundness with zero tolerance
            assert!(tree_dist[v as usize] >= metric.dist[v as usize], "vertex {v}");
            // telescoped relaxations bound the tree path by d_min
            assert!(tree_dist[v as usize] <= res.dist[v as usize], "vertex {v}");
            assert!(res.dist[v as usize] >= metric.dist[v as usize]);
        }
    }

    #[test]
    fn fidelities_agree_on_distances() {
        let g = generate(
            &GraphSpec::ErdosRenyiConnected { n: 32, p: 0.2, weights: WeightDist::UniformInt { lo: 1, hi: 6 } },
            44,
        )
        .unwrap();
        let k = consts();
        let run = |f: Fidelity| {
            expected_sp_distance(
                &g,
                0.2,
                0,
                &k,
                ShortcutProvider::Empty,
                &RandomnessSource::new(12),
                f,
            )
            .unwrap()
        };
        let accounted = run(Fidelity::RoundAccounted);
        let faithful = run(Fidelity::MessageFaithful);
        assert_eq!(accounted.dist, faithful.dist);
        assert_eq!(accounted.parent, faithful.parent);
    }

    #[test]
    fn d_min_is_monotone_in_repetitions() {
        let g = generate(
            &GraphSpec::Grid { rows: 4, cols: 4, weights: WeightDist::Unit },
            2,
        )
        .unwrap();
        let k = consts();
        let src = RandomnessSource::new(3);
        let mut d_min = vec![Fx::INF; g.n()];
        let mut prev_sum = u128::MAX;
        for rep in 0..6u64 {
            let run = expected_sp_distance(
                &g,
                0.25,
                0,
                &k,
                ShortcutProvider::Empty,
                &src.trial(rep),
                Fidelity::RoundAccounted,
            )
            .unwrap();
            for (dm, d) in d_min.iter_mut().zip(&run.dist) {
                *dm = (*dm).min(*d);
            }
            let sum: u128 = d_min.iter().map(|d| d.0 as u128).sum();
            assert!(sum <= prev_sum, "d_min grew after repetition {rep}");
            prev_sum = sum;
        }
    }
}
