//! Approximate distance labels: repeated forest runs at shrinking R_0 dump
//! every zero-component they form into the member vertices' labels, and a
//! label-only query returns the smallest R of a shared cluster.
//!
//! Soundness is exact: a shared cluster with parameter R has weighted
//! diameter at most R, so the estimate upper-bounds the true distance.

use crate::cluster::ShortcutProvider;
use crate::error::{Error, Result};
use crate::fixed::Fx;
use crate::graph::{VertexId, WeightedGraph};
use crate::ldd::ContractedGraph;
use crate::rng::RandomnessSource;
use crate::sssp::{expected_sp_forest, AlgorithmConstants};

/// Per-vertex set of (cluster id, R) pairs, sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DistanceLabel {
    pub entries: Vec<(u64, Fx)>,
}

impl DistanceLabel {
    fn push(&mut self, id: u64, r: Fx) {
        self.entries.push((id, r));
    }

    fn finish(&mut self) {
        self.entries.sort_unstable();
        self.entries.dedup();
    }

    /// Bits under the wire encoding the budget is stated for: 64-bit ids,
    /// 64-bit fixed-point radii.
    pub fn bit_size(&self) -> u64 {
        self.entries.len() as u64 * 128
    }
}

#[derive(Debug, Clone)]
pub struct LabelSet {
    pub labels: Vec<DistanceLabel>,
    pub charged_rounds: u64,
    /// (number of R_0 values, repetitions per value, max levels seen).
    pub shape: (usize, usize, usize),
}

impl LabelSet {
    pub fn max_entries(&self) -> usize {
        self.labels.iter().map(|l| l.entries.len()).max().unwrap_or(0)
    }

    /// Closed-form budget: (#R_0 values) * reps * (levels + 1).
    pub fn entry_budget(&self) -> usize {
        self.shape.0 * self.shape.1 * (self.shape.2 + 1)
    }
}

fn cluster_id(t: usize, rep: usize, level: usize, root: VertexId) -> u64 {
    // splitmix-style mix of the four coordinates; collisions are negligible
    // at desk scale
    let mut x = (t as u64) << 48 ^ (rep as u64) << 32 ^ (level as u64) << 24 ^ root as u64;
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Number of R_0 scales: ceil(log2(c1/c2) + log2(1/beta)).
pub fn scale_count(k: &AlgorithmConstants, beta: f64) -> usize {
    ((k.c1 / k.c2).log2() + (1.0 / beta).log2()).ceil().max(1.0) as usize
}

/// For each t in 1..=scale_count and each of ceil(gamma log2 n) repetitions,
/// run the forest loop with R_0 = 2^-t and record every cluster at every
/// level (level 0 contributes the singletons at R_0).
pub fn build_labels(
    g: &WeightedGraph,
    beta: f64,
    k: &AlgorithmConstants,
    provider: ShortcutProvider,
    src: &RandomnessSource,
) -> Result<LabelSet> {
    k.validate()?;
    let t_max = scale_count(k, beta);
    let reps = k.repetitions(g.n());
    let mut labels = vec![DistanceLabel::default(); g.n()];
    let mut charged_rounds = 0u64;
    let mut max_levels = 0usize;
    for t in 1..=t_max {
        let r0 = Fx(Fx::ONE.0 >> t.min(16));
        if r0 == Fx::ZERO {
            return Err(Error::Validation(format!("R_0 = 2^-{t} underflows the fixed point")));
        }
        for rep in 0..reps {
            let trial = src.trial((t * 10_000 + rep) as u64);
            let run = expected_sp_forest(g, beta, r0, k, provider, &trial)?;
            charged_rounds += run.charged_rounds;
            max_levels = max_levels.max(run.levels.len());
            for v in g.vertices() {
                labels[v as usize].push(cluster_id(t, rep, 0, v), r0);
            }
            for (level, (state, _)) in run.levels.iter().enumerate() {
                let cg = ContractedGraph::from_zero_components(g, &state.weights);
                for part in &cg.parts {
                    let id = cluster_id(t, rep, level + 1, part[0]);
                    for &v in part {
                        labels[v as usize].push(id, state.scale);
                    }
                }
            }
        }
    }
    for l in &mut labels {
        l.finish();
    }
    Ok(LabelSet {
        labels,
        charged_rounds,
        shape: (t_max, reps, max_levels),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelQueryResult {
    /// Upper-bound estimate: the smallest shared R.
    pub estimate: Fx,
    /// The witnessing cluster id.
    pub witness: u64,
}

/// Label-only distance query: minimum R over the clusters both labels
/// contain. Sees nothing but the two labels.
pub fn query(a: &DistanceLabel, b: &DistanceLabel) -> Result<LabelQueryResult> {
    let mut best: Option<LabelQueryResult> = None;
    let ids: std::collections::HashMap<u64, Fx> = a.entries.iter().copied().collect();
    for &(id, r) in &b.entries {
        if ids.contains_key(&id) && best.is_none_or(|cur| r < cur.estimate) {
            best = Some(LabelQueryResult { estimate: r, witness: id });
        }
    }
    best.ok_or(Error::NoSharedCluster)
}

/// Label file: per vertex one line "v k id_1 R_1 ... id_k R_k".
pub fn labels_to_string(set: &LabelSet) -> String {
    let mut out = String::new();
    for (v, label) in set.labels.iter().enumerate() {
        out.push_str(&format!("{v} {}", label.entries.len()));
        for &(id, r) in &label.entries {
            out.push_str(&format!(" {id} {}", r.to_decimal_string()));
        }
        out.push('\n');
    }
    out
}

pub fn parse_labels(text: &str) -> Result<Vec<DistanceLabel>> {
    let mut labels = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let v: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Parse { line: ln + 1, msg: "bad vertex".into() })?;
        if v != labels.len() {
            return Err(Error::Parse { line: ln + 1, msg: "vertices must be in order".into() });
        }
        let count: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Parse { line: ln + 1, msg: "bad entry count".into() })?;
        let mut label = DistanceLabel::default();
        for _ in 0..count {
            let id: u64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or(Error::Parse { line: ln + 1, msg: "bad cluster id".into() })?;
            let r = it
                .next()
                .map(Fx::parse_decimal)
                .transpose()
                .map_err(|msg| Error::Parse { line: ln + 1, msg })?
                .ok_or(Error::Parse { line: ln + 1, msg: "missing radius".into() })?;
            label.push(id, r);
        }
        label.finish();
        labels.push(label);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphSpec, WeightDist, WeightedGraph};

    fn small_build(n_seed: u64) -> (WeightedGraph, LabelSet) {
        let g = generate(
            &GraphSpec::ErdosRenyiConnected {
                n: 24,
                p: 0.2,
                weights: WeightDist::UniformInt { lo: 1, hi: 6 },
            },
            n_seed,
        )
        .unwrap();
        let set = build_labels(
            &g,
            0.25,
            &AlgorithmConstants::default(),
            ShortcutProvider::Empty,
            &RandomnessSource::new(n_seed + 9),
        )
        .unwrap();
        (g, set)
    }

    #[test]
    fn self_query_is_tiny() {
        let (_, set) = small_build(1);
        let t_max = scale_count(&AlgorithmConstants::default(), 0.25);
        for label in set.labels.iter().take(4) {
            let q = query(label, label).unwrap();
            // the singleton cluster at the smallest R_0 wins
            assert_eq!(q.estimate, Fx(Fx::ONE.0 >> t_max));
        }
    }

    #[test]
    fn two_vertex_radius_dominates_edge() {
        let g = WeightedGraph::new(2, vec![(0, 1, Fx::from_units(5))]).unwrap();
        // few levels exist at n=2, so boost the repetition count to make the
        // merge near-certain
        let k = AlgorithmConstants { gamma: 16.0, ..AlgorithmConstants::default() };
        let set = build_labels(
            &g,
            0.5,
            &k,
            ShortcutProvider::Empty,
            &RandomnessSource::new(3),
        )
        .unwrap();
        let q = query(&set.labels[0], &set.labels[1]).unwrap();
        assert!(q.estimate >= Fx::from_units(5), "shared cluster must cover the edge");
    }

    #[test]
    fn soundness_all_pairs() {
        let (g, set) = small_build(5);
        let table = crate::oracle::apsp(&g).unwrap();
        for x in g.vertices() {
            for y in g.vertices() {
                if x == y {
                    continue;
                }
                let q = query(&set.labels[x as usize], &set.labels[y as usize]).unwrap();
                assert!(
                    q.estimate >= table[x as usize][y as usize],
                    "pair ({x},{y}): estimate {} below distance {}",
                    q.estimate,
                    table[x as usize][y as usize]
                );
            }
        }
    }

    #[test]
    fn symmetry() {
        let (g, set) = small_build(7);
        for (x, y) in [(0u32, 5u32), (3, 9), (11, 2)] {
            let a = query(&set.labels[x as usize], &set.labels[y as usize]).unwrap();
            let b = query(&set.labels[y as usize], &set.labels[x as usize]).unwrap();
            assert_eq!(a, b);
            let _ = g.n();
        }
    }

    #[test]
    fn entry_count_within_budget() {
        let (_, set) = small_build(11);
        assert!(set.max_entries() <= set.entry_budget());
    }

    #[test]
    fn single_vertex_label() {
        let g = WeightedGraph::new(1, vec![]).unwrap();
        let set = build_labels(
            &g,
            0.5,
            &AlgorithmConstants::default(),
            ShortcutProvider::Empty,
            &RandomnessSource::new(1),
        )
        .unwrap();
        assert_eq!(set.labels.len(), 1);
        let q = query(&set.labels[0], &set.labels[0]).unwrap();
        assert!(q.estimate < Fx::ONE, "self estimate stays below one unit");
    }

    #[test]
    fn label_file_round_trip() {
        let (_, set) = small_build(13);
        let text = labels_to_string(&set);
        let back = parse_labels(&text).unwrap();
        assert_eq!(back.len(), set.labels.len());
        for (a, b) in back.iter().zip(&set.labels) {
            assert_eq!(a, b);
        }
    }
}
