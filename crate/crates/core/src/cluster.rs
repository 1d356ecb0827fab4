//! Heads/Tails low-diameter hierarchical clustering and the two
//! tree-aggregation primitives built on it.
//!
//! Both consumers (shortest-path distance extraction and transshipment) need
//! the same setup, so the hierarchy is built once and the two sub-algorithms
//! are exposed independently.

use crate::config::{HT_LEVEL_SLACK, RETRY_BUDGET};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, VertexId, WeightedGraph};
use crate::partwise::{
    aggregate_round_bound, partwise_aggregate_with_budget, partwise_broadcast, quality,
    AggOp, AggregateSpec, Shortcut, ValidPartition,
};
use crate::rng::RandomnessSource;
use rand::Rng;
use std::collections::VecDeque;

/// Which execution fidelity produced a result: primitives genuinely run on
/// the simulator, or a global orchestrator that computes the same values and
/// charges rounds at the Õ(Q)-per-aggregate rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fidelity {
    MessageFaithful,
    RoundAccounted,
}

/// How intra-cluster shortcuts are chosen per level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShortcutProvider {
    /// No extra edges; parts communicate over their induced subgraphs.
    Empty,
    /// Large parts get the global BFS tree (the sqrt(n)+D construction).
    TrivialBfs,
}

impl ShortcutProvider {
    pub fn provide(&self, g: &WeightedGraph, p: &ValidPartition) -> Shortcut {
        match self {
            ShortcutProvider::Empty => Shortcut::empty(p),
            ShortcutProvider::TrivialBfs => crate::partwise::trivial_shortcut(g, p),
        }
    }
}

/// A tree embedded in the host graph: edges are host edges, the vertex set
/// may be a strict subset of V.
#[derive(Debug, Clone)]
pub struct RootedTree {
    root: VertexId,
    vertices: Vec<VertexId>,
    edge_ids: Vec<EdgeId>,
    member: Vec<bool>,
    parent: Vec<Option<(VertexId, EdgeId)>>,
    depth: Vec<u32>,
    /// tree adjacency: (neighbor, host edge id)
    adj: Vec<Vec<(VertexId, EdgeId)>>,
}

impl RootedTree {
    /// Build from explicit tree edges; validates shape.
    pub fn new(g: &WeightedGraph, root: VertexId, edge_ids: Vec<EdgeId>) -> Result<Self> {
        let mut member = vec![false; g.n()];
        member[root as usize] = true;
        let mut adj: Vec<Vec<(VertexId, EdgeId)>> = vec![Vec::new(); g.n()];
        for &e in &edge_ids {
            let edge = g.edge(e);
            member[edge.u as usize] = true;
            member[edge.v as usize] = true;
            adj[edge.u as usize].push((edge.v, e));
            adj[edge.v as usize].push((edge.u, e));
        }
        let vertices: Vec<VertexId> =
            g.vertices().filter(|&v| member[v as usize]).collect();
        if vertices.len() != edge_ids.len() + 1 {
            return Err(Error::Validation(format!(
                "{} edges cannot form a tree on {} vertices",
                edge_ids.len(),
                vertices.len()
            )));
        }
        let mut parent = vec![None; g.n()];
        let mut depth = vec![0u32; g.n()];
        let mut seen = vec![false; g.n()];
        seen[root as usize] = true;
        let mut q = VecDeque::from([root]);
        let mut reached = 1;
        while let Some(v) = q.pop_front() {
            for &(u, e) in &adj[v as usize] {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    parent[u as usize] = Some((v, e));
                    depth[u as usize] = depth[v as usize] + 1;
                    reached += 1;
                    q.push_back(u);
                }
            }
        }
        if reached != vertices.len() {
            return Err(Error::Validation("tree edges are not connected".into()));
        }
        Ok(RootedTree { root, vertices, edge_ids, member, parent, depth, adj })
    }

    /// The component of `forest_edges` containing `root`.
    pub fn from_forest_component(
        g: &WeightedGraph,
        root: VertexId,
        forest_edges: &[EdgeId],
    ) -> Result<Self> {
        let mut adj: Vec<Vec<EdgeId>> = vec![Vec::new(); g.n()];
        for &e in forest_edges {
            adj[g.edge(e).u as usize].push(e);
            adj[g.edge(e).v as usize].push(e);
        }
        let mut seen = vec![false; g.n()];
        seen[root as usize] = true;
        let mut q = VecDeque::from([root]);
        let mut edges = Vec::new();
        while let Some(v) = q.pop_front() {
            for &e in &adj[v as usize] {
                let u = g.edge(e).other(v);
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    edges.push(e);
                    q.push_back(u);
                }
            }
        }
        RootedTree::new(g, root, edges)
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edge_ids(&self) -> &[EdgeId] {
        &self.edge_ids
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.member[v as usize]
    }

    pub fn parent(&self, v: VertexId) -> Option<(VertexId, EdgeId)> {
        self.parent[v as usize]
    }

    pub fn depth(&self, v: VertexId) -> u32 {
        self.depth[v as usize]
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.adj[v as usize]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// A sequence of partitions P_0 (singletons) .. P_K (one cluster), each
/// refining the next, with O(1) contracted diameter per merge.
#[derive(Debug, Clone)]
pub struct ClusterHierarchy {
    /// levels[i] = clusters of P_i, each a sorted vertex list.
    levels: Vec<Vec<Vec<VertexId>>>,
    /// cluster index of each tree vertex per level (host-sized, members only).
    cluster_of: Vec<Vec<u32>>,
}

impl ClusterHierarchy {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// K: index of the last level.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, i: usize) -> &[Vec<VertexId>] {
        &self.levels[i]
    }

    pub fn cluster_of(&self, level: usize, v: VertexId) -> u32 {
        self.cluster_of[level][v as usize]
    }

    /// Check the three defining properties against the tree it was built on.
    pub fn verify(&self, t: &RootedTree) -> Result<()> {
        let k = self.depth();
        // property 2: endpoints
        let p0 = &self.levels[0];
        if p0.len() != t.len() || p0.iter().any(|c| c.len() != 1) {
            return Err(Error::Validation("P_0 is not the singleton partition".into()));
        }
        if self.levels[k].len() != 1 || self.levels[k][0].len() != t.len() {
            return Err(Error::Validation("P_K is not a single cluster".into()));
        }
        for (i, level) in self.levels.iter().enumerate() {
            let mut seen = 0usize;
            for cluster in level {
                seen += cluster.len();
                // property 1: connected within the tree
                if !cluster_connected(t, cluster) {
                    return Err(Error::Validation(format!(
                        "cluster {cluster:?} at level {i} is not connected"
                    )));
                }
            }
            if seen != t.len() {
                return Err(Error::Validation(format!("level {i} does not partition V")));
            }
        }
        // property 3: each merge group, contracted, has diameter <= 2
        for i in 0..k {
            for (cj, cluster) in self.levels[i + 1].iter().enumerate() {
                let children: Vec<u32> = child_clusters(self, i, cluster);
                let diam = contracted_diameter(self, t, i, &children);
                match diam {
                    Some(d) if d <= 2 => {}
                    other => {
                        return Err(Error::Validation(format!(
                            "merge group for cluster {cj} at level {} has contracted diameter {other:?}",
                            i + 1
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

fn cluster_connected(t: &RootedTree, cluster: &[VertexId]) -> bool {
    if cluster.len() <= 1 {
        return true;
    }
    let inset: std::collections::HashSet<VertexId> = cluster.iter().copied().collect();
    let mut seen = std::collections::HashSet::new();
    let mut q = VecDeque::from([cluster[0]]);
    seen.insert(cluster[0]);
    while let Some(v) = q.pop_front() {
        for &(u, _) in t.neighbors(v) {
            if inset.contains(&u) && seen.insert(u) {
                q.push_back(u);
            }
        }
    }
    seen.len() == cluster.len()
}

/// Indices of level-i clusters contained in the given level-(i+1) cluster.
fn child_clusters(h: &ClusterHierarchy, i: usize, cluster: &[VertexId]) -> Vec<u32> {
    let mut out: Vec<u32> = cluster.iter().map(|&v| h.cluster_of(i, v)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Hop diameter of the graph on `children` with adjacency via tree edges
/// (None when disconnected).
fn contracted_diameter(
    h: &ClusterHierarchy,
    t: &RootedTree,
    level: usize,
    children: &[u32],
) -> Option<u32> {
    if children.len() <= 1 {
        return Some(0);
    }
    let pos = |c: u32| children.binary_search(&c).ok();
    let mut adj = vec![Vec::new(); children.len()];
    for &v in t.vertices() {
        for &(u, _) in t.neighbors(v) {
            if v >= u {
                continue;
            }
            let (cu, cv) = (h.cluster_of(level, u), h.cluster_of(level, v));
            if cu == cv {
                continue;
            }
            if let (Some(pu), Some(pv)) = (pos(cu), pos(cv)) {
                adj[pu].push(pv);
                adj[pv].push(pu);
            }
        }
    }
    let mut diameter = 0;
    for s in 0..children.len() {
        let mut dist = vec![u32::MAX; children.len()];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &u in &adj[v] {
                if dist[u] == u32::MAX {
                    dist[u] = dist[v] + 1;
                    q.push_back(u);
                }
            }
        }
        let far = *dist.iter().max().unwrap();
        if far == u32::MAX {
            return None;
        }
        diameter = diameter.max(far);
    }
    Some(diameter)
}

#[derive(Debug, Clone)]
pub struct HtOutcome {
    pub hierarchy: ClusterHierarchy,
    /// Simulator rounds (or charged rounds) per level.
    pub level_rounds: Vec<u64>,
    /// Measured shortcut quality per level.
    pub level_quality: Vec<u64>,
    pub rounds: u64,
    pub attempts: usize,
    pub fidelity: Fidelity,
}

/// Heads/Tails clustering of the tree `t`. Per iteration each cluster leader
/// (minimum vertex id) flips a fair coin; a Tails cluster with at least one
/// Heads neighbor merges into the cluster of the minimum lexicographic
/// (h, t) cross-edge message.
pub fn heads_tails(
    g: &WeightedGraph,
    t: &RootedTree,
    provider: ShortcutProvider,
    src: &RandomnessSource,
    fidelity: Fidelity,
) -> Result<HtOutcome> {
    let mut last_err = None;
    for attempt in 0..RETRY_BUDGET {
        match heads_tails_once(g, t, provider, &src.trial(attempt as u64), fidelity) {
            Ok(mut out) => {
                out.attempts = attempt + 1;
                return Ok(out);
            }
            Err(e @ Error::LevelBudget { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Internal("heads/tails retry loop".into())))
}

pub fn ht_level_budget(n: usize) -> usize {
    ((n.max(2) as f64).ln() / (4f64 / 3f64).ln()).ceil() as usize + HT_LEVEL_SLACK
}

fn heads_tails_once(
    g: &WeightedGraph,
    t: &RootedTree,
    provider: ShortcutProvider,
    src: &RandomnessSource,
    fidelity: Fidelity,
) -> Result<HtOutcome> {
    let budget = ht_level_budget(t.len());
    let mut clusters: Vec<Vec<VertexId>> = t.vertices().iter().map(|&v| vec![v]).collect();
    let mut levels = vec![clusters.clone()];
    let mut level_rounds = Vec::new();
    let mut level_quality = Vec::new();

    // per-vertex private coin streams; a leader consumes one flip per level
    let mut coin_rngs: Vec<Option<rand_chacha::ChaCha8Rng>> = (0..g.n() as u32)
        .map(|v| t.contains(v).then(|| src.vertex_rng(v)))
        .collect();

    while clusters.len() > 1 {
        if levels.len() > budget {
            return Err(Error::LevelBudget { budget });
        }
        let coins: Vec<bool> = clusters
            .iter()
            .map(|c| {
                let leader = c[0];
                coin_rngs[leader as usize].as_mut().unwrap().gen::<bool>()
            })
            .collect();

        let (next, rounds, q) = ht_level(
            g,
            t,
            &clusters,
            &coins,
            provider,
            fidelity,
            |candidates| *candidates.iter().min().unwrap(),
        )?;
        level_rounds.push(rounds);
        level_quality.push(q);
        clusters = next;
        levels.push(clusters.clone());
    }

    let cluster_of = levels
        .iter()
        .map(|level| {
            let mut of = vec![u32::MAX; g.n()];
            for (i, c) in level.iter().enumerate() {
                for &v in c {
                    of[v as usize] = i as u32;
                }
            }
            of
        })
        .collect();
    let rounds = level_rounds.iter().sum();
    Ok(HtOutcome {
        hierarchy: ClusterHierarchy { levels, cluster_of },
        level_rounds,
        level_quality,
        rounds,
        attempts: 1,
        fidelity,
    })
}

/// One Heads/Tails iteration. `choose` picks the winning (h, t) message for
/// a Tails cluster from the candidate cross edges; production code passes
/// lexicographic min, the sample-graph test injects the published choices.
fn ht_level(
    g: &WeightedGraph,
    t: &RootedTree,
    clusters: &[Vec<VertexId>],
    coins: &[bool],
    provider: ShortcutProvider,
    fidelity: Fidelity,
    choose: impl Fn(&[(VertexId, VertexId)]) -> (VertexId, VertexId),
) -> Result<(Vec<Vec<VertexId>>, u64, u64)> {
    let mut cluster_of = vec![u32::MAX; g.n()];
    for (i, c) in clusters.iter().enumerate() {
        for &v in c {
            cluster_of[v as usize] = i as u32;
        }
    }

    let partition = ValidPartition::new(g, clusters.to_vec())?;
    let sc = provider.provide(g, &partition);
    let q = quality(g, &partition, &sc);
    let agg_bound = aggregate_round_bound(g, &q)?.max(8);
    let q_val = q.quality().unwrap_or(0);

    let mut rounds: u64 = 0;
    let mut charge = |r: u64| rounds += r;

    // leader-id aggregate (leaders are min-id; run keeps the accounting honest)
    match fidelity {
        Fidelity::MessageFaithful => {
            let ids: Vec<u64> = (0..g.n() as u64).collect();
            let out = partwise_aggregate_with_budget(
                g,
                &partition,
                &sc,
                AggregateSpec::new(AggOp::Min, 32),
                &ids,
                agg_bound,
            )?;
            for (i, c) in clusters.iter().enumerate() {
                debug_assert_eq!(out.values[c[0] as usize], clusters[i][0] as u64);
            }
            charge(out.stats.rounds);
        }
        Fidelity::RoundAccounted => charge(agg_bound),
    }

    // coin broadcast
    match fidelity {
        Fidelity::MessageFaithful => {
            let msgs: Vec<u64> = coins.iter().map(|&b| b as u64).collect();
            let out = partwise_broadcast(g, &partition, &sc, 1, &msgs)?;
            charge(out.stats.rounds);
            for (i, c) in clusters.iter().enumerate() {
                for &v in c {
                    debug_assert_eq!(out.values[v as usize], Some(coins[i] as u64));
                }
            }
        }
        Fidelity::RoundAccounted => charge(agg_bound),
    }

    // cross-edge exchange: one round
    charge(1);
    // (h, t) candidates per Tails cluster
    let mut candidates: Vec<Vec<(VertexId, VertexId)>> = vec![Vec::new(); clusters.len()];
    for &e in t.edge_ids() {
        let (u, v) = {
            let edge = g.edge(e);
            (edge.u, edge.v)
        };
        let (cu, cv) = (cluster_of[u as usize], cluster_of[v as usize]);
        if cu == cv {
            continue;
        }
        // heads -> tails direction only
        if coins[cu as usize] && !coins[cv as usize] {
            candidates[cv as usize].push((u, v));
        }
        if coins[cv as usize] && !coins[cu as usize] {
            candidates[cu as usize].push((v, u));
        }
    }

    // min-lexicographic message aggregate within Tails clusters
    match fidelity {
        Fidelity::MessageFaithful => {
            let mut xs = vec![u64::MAX; g.n()];
            for cands in candidates.iter() {
                for &(h, tv) in cands {
                    let enc = ((h as u64) << 32) | tv as u64;
                    xs[tv as usize] = xs[tv as usize].min(enc);
                }
            }
            let out = partwise_aggregate_with_budget(
                g,
                &partition,
                &sc,
                AggregateSpec::new(AggOp::Min, 64),
                &xs,
                agg_bound,
            )?;
            charge(out.stats.rounds);
        }
        Fidelity::RoundAccounted => charge(agg_bound),
    }

    // size aggregate (termination check)
    charge(match fidelity {
        Fidelity::MessageFaithful => {
            let ones = vec![1u64; g.n()];
            let out = partwise_aggregate_with_budget(
                g,
                &partition,
                &sc,
                AggregateSpec::new(AggOp::Sum, 32),
                &ones,
                agg_bound,
            )?;
            out.stats.rounds
        }
        Fidelity::RoundAccounted => agg_bound,
    });

    // merge bookkeeping
    let mut merged_into: Vec<u32> = (0..clusters.len() as u32).collect();
    for (ci, cands) in candidates.iter().enumerate() {
        if coins[ci] || cands.is_empty() {
            continue;
        }
        let (h, _t) = choose(cands);
        merged_into[ci] = cluster_of[h as usize];
    }
    let mut groups: std::collections::BTreeMap<u32, Vec<VertexId>> = Default::default();
    for (ci, cluster) in clusters.iter().enumerate() {
        groups
            .entry(merged_into[ci])
            .or_default()
            .extend(cluster.iter().copied());
    }
    let mut next: Vec<Vec<VertexId>> = groups
        .into_values()
        .map(|mut vs| {
            vs.sort_unstable();
            vs
        })
        .collect();
    // canonical cluster order: by minimum member (the cluster id)
    next.sort_unstable_by_key(|c| c[0]);
    Ok((next, rounds, q_val))
}

/// Cluster roots with respect to the tree's own root: the top cluster is
/// rooted at t.root(), and each child cluster is rooted at its attachment
/// vertex toward the parent cluster in the contracted BFS.
///
/// Returns roots[level][cluster] and, for every non-top cluster, the
/// attachment edge (u, v) with u in the BFS-parent cluster and v = root.
pub struct HierarchyRoots {
    pub root_of: Vec<Vec<VertexId>>,
    /// attach[level][cluster] = Some((u, v)) for clusters whose root was set
    /// via the contracted BFS at the level above; None for root-containing
    /// clusters.
    pub attach: Vec<Vec<Option<(VertexId, VertexId)>>>,
    /// BFS depth of each cluster inside its merge group.
    pub wave_depth: Vec<Vec<u32>>,
}

pub fn assign_cluster_roots(t: &RootedTree, h: &ClusterHierarchy) -> HierarchyRoots {
    let k = h.depth();
    let mut root_of: Vec<Vec<VertexId>> =
        (0..=k).map(|i| vec![u32::MAX; h.level(i).len()]).collect();
    let mut attach: Vec<Vec<Option<(VertexId, VertexId)>>> =
        (0..=k).map(|i| vec![None; h.level(i).len()]).collect();
    let mut wave_depth: Vec<Vec<u32>> =
        (0..=k).map(|i| vec![0; h.level(i).len()]).collect();
    root_of[k][0] = t.root();

    for lvl in (0..k).rev() {
        for (cj, cluster) in h.level(lvl + 1).iter().enumerate() {
            let r = root_of[lvl + 1][cj];
            debug_assert_ne!(r, u32::MAX);
            let children = child_clusters(h, lvl, cluster);
            // contracted adjacency with the witnessing tree edge endpoints
            let pos = |c: u32| children.binary_search(&c).unwrap();
            let mut adj: Vec<Vec<(usize, VertexId, VertexId)>> =
                vec![Vec::new(); children.len()];
            for &v in cluster {
                for &(u, _) in t.neighbors(v) {
                    if h.cluster_of(lvl + 1, u) != cj as u32 {
                        continue;
                    }
                    let (cv, cu) = (h.cluster_of(lvl, v), h.cluster_of(lvl, u));
                    if cv != cu {
                        adj[pos(cv)].push((pos(cu), v, u));
                    }
                }
            }
            let start = pos(h.cluster_of(lvl, r));
            root_of[lvl][children[start] as usize] = r;
            let mut depth = vec![u32::MAX; children.len()];
            depth[start] = 0;
            let mut q = VecDeque::from([start]);
            while let Some(c) = q.pop_front() {
                let mut nbrs = adj[c].clone();
                nbrs.sort_unstable_by_key(|&(p, _, _)| p);
                for (p, from_v, to_u) in nbrs {
                    if depth[p] == u32::MAX {
                        depth[p] = depth[c] + 1;
                        root_of[lvl][children[p] as usize] = to_u;
                        attach[lvl][children[p] as usize] = Some((from_v, to_u));
                        wave_depth[lvl][children[p] as usize] = depth[p];
                        q.push_back(p);
                    }
                }
            }
        }
    }
    HierarchyRoots { root_of, attach, wave_depth }
}

#[derive(Debug, Clone)]
pub struct AggregateRun {
    /// Host-sized; meaningful at tree vertices.
    pub values: Vec<u64>,
    pub rounds: u64,
}

/// Every tree vertex ends with the fold of x over its subtree.
#[allow(clippy::too_many_arguments)]
pub fn aggregate_subtree(
    g: &WeightedGraph,
    t: &RootedTree,
    h: &ClusterHierarchy,
    roots: &HierarchyRoots,
    spec: AggregateSpec,
    xs: &[u64],
    provider: ShortcutProvider,
    fidelity: Fidelity,
) -> Result<AggregateRun> {
    debug_assert_eq!(h.level(0).len(), t.len(), "hierarchy built on this tree");
    let mut x = xs.to_vec();
    let mut rounds = 0u64;
    let k = h.depth();
    for lvl in (0..k).rev() {
        let max_wave = roots.wave_depth[lvl].iter().copied().max().unwrap_or(0);
        for wave in (1..=max_wave).rev() {
            let wave_clusters: Vec<u32> = (0..h.level(lvl).len() as u32)
                .filter(|&c| roots.wave_depth[lvl][c as usize] == wave)
                .collect();
            if wave_clusters.is_empty() {
                continue;
            }
            let folds = run_wave_aggregate(
                g, h, lvl, &wave_clusters, spec, &x, provider, fidelity, &mut rounds,
            )?;
            // cross sends: one round for all disjoint attachment edges
            rounds += 1;
            for (ci, fold) in wave_clusters.iter().zip(folds) {
                let (u, _v) = roots.attach[lvl][*ci as usize]
                    .expect("non-root wave clusters have an attachment edge");
                x[u as usize] = spec.op.apply(x[u as usize], fold);
            }
        }
    }
    Ok(AggregateRun { values: x, rounds })
}

/// Every tree vertex ends with the fold of x along its path to the root
/// (inclusive).
#[allow(clippy::too_many_arguments)]
pub fn aggregate_path_to_root(
    g: &WeightedGraph,
    t: &RootedTree,
    h: &ClusterHierarchy,
    roots: &HierarchyRoots,
    spec: AggregateSpec,
    xs: &[u64],
    provider: ShortcutProvider,
    fidelity: Fidelity,
) -> Result<AggregateRun> {
    debug_assert_eq!(h.level(0).len(), t.len(), "hierarchy built on this tree");
    let mut x = xs.to_vec();
    let mut rounds = 0u64;
    let k = h.depth();
    for lvl in 0..k {
        let max_wave = roots.wave_depth[lvl].iter().copied().max().unwrap_or(0);
        for wave in 1..=max_wave {
            let wave_clusters: Vec<u32> = (0..h.level(lvl).len() as u32)
                .filter(|&c| roots.wave_depth[lvl][c as usize] == wave)
                .collect();
            if wave_clusters.is_empty() {
                continue;
            }
            // value of the parent-side attachment endpoint crosses the edge,
            // then is broadcast through the cluster
            rounds += 1;
            let msgs: Vec<u64> = wave_clusters
                .iter()
                .map(|&ci| {
                    let (u, _v) = roots.attach[lvl][ci as usize].unwrap();
                    x[u as usize]
                })
                .collect();
            run_wave_broadcast(
                g, h, lvl, &wave_clusters, spec, &msgs, &mut x, provider, fidelity,
                &mut rounds,
            )?;
        }
    }
    Ok(AggregateRun { values: x, rounds })
}

#[allow(clippy::too_many_arguments)]
fn run_wave_aggregate(
    g: &WeightedGraph,
    h: &ClusterHierarchy,
    lvl: usize,
    wave_clusters: &[u32],
    spec: AggregateSpec,
    x: &[u64],
    provider: ShortcutProvider,
    fidelity: Fidelity,
    rounds: &mut u64,
) -> Result<Vec<u64>> {
    match fidelity {
        Fidelity::RoundAccounted => {
            let parts: Vec<Vec<VertexId>> = wave_clusters
                .iter()
                .map(|&c| h.level(lvl)[c as usize].clone())
                .collect();
            let p = ValidPartition::new(g, parts)?;
            let sc = provider.provide(g, &p);
            let q = quality(g, &p, &sc);
            *rounds += aggregate_round_bound(g, &q)?;
            Ok(wave_clusters
                .iter()
                .map(|&c| {
                    let members = &h.level(lvl)[c as usize];
                    let mut it = members.iter().map(|&v| x[v as usize]);
                    let first = it.next().unwrap();
                    it.fold(first, |a, b| spec.op.apply(a, b))
                })
                .collect())
        }
        Fidelity::MessageFaithful => {
            let parts: Vec<Vec<VertexId>> = wave_clusters
                .iter()
                .map(|&c| h.level(lvl)[c as usize].clone())
                .collect();
            let p = ValidPartition::new(g, parts)?;
            let sc = provider.provide(g, &p);
            let q = quality(g, &p, &sc);
            let bound = aggregate_round_bound(g, &q)?.max(8);
            let out = partwise_aggregate_with_budget(g, &p, &sc, spec, x, bound)?;
            *rounds += out.stats.rounds;
            Ok((0..wave_clusters.len() as u32)
                .map(|i| {
                    let member = p.parts()[i as usize][0];
                    out.values[member as usize]
                })
                .collect())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_wave_broadcast(
    g: &WeightedGraph,
    h: &ClusterHierarchy,
    lvl: usize,
    wave_clusters: &[u32],
    spec: AggregateSpec,
    msgs: &[u64],
    x: &mut [u64],
    provider: ShortcutProvider,
    fidelity: Fidelity,
    rounds: &mut u64,
) -> Result<()> {
    match fidelity {
        Fidelity::RoundAccounted => {
            let parts: Vec<Vec<VertexId>> = wave_clusters
                .iter()
                .map(|&c| h.level(lvl)[c as usize].clone())
                .collect();
            let p = ValidPartition::new(g, parts)?;
            let sc = provider.provide(g, &p);
            let q = quality(g, &p, &sc);
            *rounds += aggregate_round_bound(g, &q)?;
            for (ci, &m) in wave_clusters.iter().zip(msgs) {
                for &v in &h.level(lvl)[*ci as usize] {
                    x[v as usize] = spec.op.apply(x[v as usize], m);
                }
            }
            Ok(())
        }
        Fidelity::MessageFaithful => {
            let parts: Vec<Vec<VertexId>> = wave_clusters
                .iter()
                .map(|&c| h.level(lvl)[c as usize].clone())
                .collect();
            let p = ValidPartition::new(g, parts)?;
            let sc = provider.provide(g, &p);
            let out = partwise_broadcast(g, &p, &sc, spec.payload_bits, msgs)?;
            *rounds += out.stats.rounds;
            for (i, _) in wave_clusters.iter().enumerate() {
                for &v in &p.parts()[i] {
                    let m = out.values[v as usize]
                        .ok_or_else(|| Error::Internal("broadcast missed a member".into()))?;
                    x[v as usize] = spec.op.apply(x[v as usize], m);
                }
            }
            Ok(())
        }
    }
}
