//! Batch experiment runner: build instances, run algorithm suites across
//! seeds, emit machine-readable records with guarantee-check verdicts.
//!
//! Records are fully determined by (spec, seed): reruns are byte-identical.

use congestlab::cluster::{heads_tails, Fidelity, RootedTree, ShortcutProvider};
use congestlab::config;
use congestlab::graph::{dijkstra, generate, GraphSpec, WeightDist, WeightedGraph};
use congestlab::labeling::{build_labels, query};
use congestlab::ldd::{
    cut_probability_harness, decompose, sample_start_times, DecompositionParams,
};
use congestlab::oracle;
use congestlab::partwise::{
    aggregate_round_bound, partwise_aggregate, quality, random_partition, random_shortcut,
    AggOp, AggregateSpec,
};
use congestlab::rng::RandomnessSource;
use congestlab::sssp::{sssp_tree, stretch_bound, stretch_level, AlgorithmConstants};
use congestlab::transshipment::{boosted_ts, tree_flow_optimality_check, DemandVector};
use congestlab::{Error, Fx, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Ldd,
    Sssp,
    Labels,
    Transshipment,
    Partwise,
    HeadsTails,
}

impl std::str::FromStr for Algo {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ldd" => Ok(Algo::Ldd),
            "sssp" => Ok(Algo::Sssp),
            "labels" => Ok(Algo::Labels),
            "transshipment" => Ok(Algo::Transshipment),
            "partwise" => Ok(Algo::Partwise),
            "heads-tails" => Ok(Algo::HeadsTails),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub graph: GraphSpec,
    pub algo: Algo,
    pub beta: f64,
    pub trials: u64,
    pub seed: u64,
    pub constants: AlgorithmConstants,
    pub kappa_bits: u32,
    pub fidelity: Fidelity,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Validation(format!("beta={} outside (0,1)", self.beta)));
        }
        if self.trials == 0 {
            return Err(Error::Validation("trials must be positive".into()));
        }
        self.constants.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub trial: u64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Half-width of a normal-approximation 95% interval on the mean.
    pub ci_half: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub schema_version: String,
    pub spec: ExperimentSpec,
    pub trials: Vec<TrialRecord>,
    pub summary: BTreeMap<String, MetricSummary>,
    pub verdicts: Vec<Verdict>,
}

impl ResultRecord {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<ResultRecord> {
        let record: ResultRecord = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("record does not match schema: {e}")))?;
        if record.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "schema version {} unsupported (want {SCHEMA_VERSION})",
                record.schema_version
            )));
        }
        Ok(record)
    }

    /// Per-trial CSV: header of sorted metric names, one row per trial.
    pub fn to_csv(&self) -> String {
        let mut keys: Vec<&String> = self
            .trials
            .iter()
            .flat_map(|t| t.metrics.keys())
            .collect();
        keys.sort();
        keys.dedup();
        let mut out = String::from("trial");
        for k in &keys {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for t in &self.trials {
            out.push_str(&t.trial.to_string());
            for k in &keys {
                out.push(',');
                if let Some(v) = t.metrics.get(*k) {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn summarize(trials: &[TrialRecord]) -> BTreeMap<String, MetricSummary> {
    let mut per_key: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for t in trials {
        for (k, v) in &t.metrics {
            per_key.entry(k.clone()).or_default().push(*v);
        }
    }
    per_key
        .into_iter()
        .map(|(k, vs)| {
            let n = vs.len() as f64;
            let mean = vs.iter().sum::<f64>() / n;
            let var = vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n.max(1.0);
            let ci_half = 1.96 * (var / n).sqrt();
            let min = vs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (k, MetricSummary { mean, min, max, ci_half })
        })
        .collect()
}

/// Execute the experiment. Verdicts realize the statistical checks the
/// algorithm's guarantees translate to at this instance size.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultRecord> {
    spec.validate()?;
    let g = generate(&spec.graph, spec.seed)?;
    let src = RandomnessSource::new(spec.seed);
    let (trials, verdicts) = match spec.algo {
        Algo::Ldd => run_ldd(spec, &g, &src)?,
        Algo::Sssp => run_sssp(spec, &g, &src)?,
        Algo::Labels => run_labels(spec, &g, &src)?,
        Algo::Transshipment => run_transshipment(spec, &g, &src)?,
        Algo::Partwise => run_partwise(spec, &g, &src)?,
        Algo::HeadsTails => run_heads_tails(spec, &g, &src)?,
    };
    let summary = summarize(&trials);
    Ok(ResultRecord {
        schema_version: SCHEMA_VERSION.to_string(),
        spec: spec.clone(),
        trials,
        summary,
        verdicts,
    })
}

fn run_ldd(
    spec: &ExperimentSpec,
    g: &WeightedGraph,
    src: &RandomnessSource,
) -> Result<(Vec<TrialRecord>, Vec<Verdict>)> {
    let params = DecompositionParams::new(spec.beta);
    params.validate(g.n())?;
    let bound = params.start_c / spec.beta * (g.n() as f64).ln();
    let mut trials = Vec::new();
    let mut flagged = 0u64;
    let mut radius_ok = true;
    for t in 0..spec.trials {
        let trial_src = src.trial(t);
        let mut metrics = BTreeMap::new();
        match decompose(g, &params, &trial_src) {
            Ok(res) => {
                let starts = sample_start_times(g.n(), &params, &trial_src);
                let radius = res.max_radius(&starts).to_f64();
                radius_ok &= radius <= bound;
                metrics.insert("radius".into(), radius);
                metrics.insert("components".into(), res.components.len() as f64);
                metrics.insert("rounds".into(), res.rounds as f64);
                metrics.insert("flagged".into(), 0.0);
            }
            Err(Error::FlaggedTrial) => {
                flagged += 1;
                metrics.insert("flagged".into(), 1.0);
            }
            Err(e) => return Err(e),
        }
        trials.push(TrialRecord { trial: t, metrics });
    }
    let flag_rate = flagged as f64 / spec.trials as f64;
    let verdicts = vec![
        Verdict {
            name: "ldd-radius-bound".into(),
            pass: radius_ok,
            detail: format!("all un-flagged radii <= (c/beta) ln n = {bound:.2}"),
        },
        Verdict {
            name: "ldd-flag-rate".into(),
            pass: flag_rate <= 0.01,
            detail: format!("flag rate {flag_rate:.4} <= 0.01"),
        },
    ];
    Ok((trials, verdicts))
}

fn run_sssp(
    spec: &ExperimentSpec,
    g: &WeightedGraph,
    src: &RandomnessSource,
) -> Result<(Vec<TrialRecord>, Vec<Verdict>)> {
    let metric = dijkstra(g, 0);
    let mut trials = Vec::new();
    let mut sound = true;
    let mut bound_ok_runs = 0u64;
    for t in 0..spec.trials {
        let res = sssp_tree(
            g,
            spec.beta,
            0,
            &spec.constants,
            ShortcutProvider::Empty,
            &src.trial(t),
            spec.fidelity,
        )?;
        let in_tree: std::collections::HashSet<u32> = res.tree_edges.iter().copied().collect();
        let tree_dist = congestlab::graph::dijkstra_filtered(g, 0, |e| in_tree.contains(&e)).dist;
        let mut max_stretch = 1.0f64;
        let mut all_within_bound = true;
        for v in g.vertices() {
            let d_true = metric.dist[v as usize];
            let d_tree = tree_dist[v as usize];
            sound &= d_tree >= d_true;
            if v != 0 {
                max_stretch = max_stretch.max(d_tree.to_f64() / d_true.to_f64());
                let t_m = stretch_level(d_true.to_f64(), &spec.constants, spec.beta);
                let bound = stretch_bound(g.n(), &spec.constants, spec.beta, t_m);
                all_within_bound &= d_tree.to_f64() <= bound;
            }
        }
        if all_within_bound {
            bound_ok_runs += 1;
        }
        let mut metrics = BTreeMap::new();
        metrics.insert("max_stretch".into(), max_stretch);
        metrics.insert("rounds".into(), res.charged_rounds as f64);
        metrics.insert("bound_ok".into(), if all_within_bound { 1.0 } else { 0.0 });
        trials.push(TrialRecord { trial: t, metrics });
    }
    let frac = bound_ok_runs as f64 / spec.trials as f64;
    let verdicts = vec![
        Verdict {
            name: "sssp-soundness".into(),
            pass: sound,
            detail: "tree distances never undercut the metric".into(),
        },
        Verdict {
            name: "sssp-stretch-bound".into(),
            pass: frac >= 0.95,
            detail: format!("whole-run bound satisfied in {frac:.3} of runs (need 0.95)"),
        },
    ];
    Ok((trials, verdicts))
}

fn run_labels(
    spec: &ExperimentSpec,
    g: &WeightedGraph,
    src: &RandomnessSource,
) -> Result<(Vec<TrialRecord>, Vec<Verdict>)> {
    let table = cached_apsp(g, &spec_cache_key(&spec.graph, spec.seed))?;
    let mut trials = Vec::new();
    let mut sound = true;
    let mut size_ok = true;
    let log2n = (g.n().max(2) as f64).log2();
    let entry_budget = config::KAPPA_LABEL_ENTRIES * log2n.powi(4);
    let bit_budget = config::KAPPA_LABEL_BITS * log2n.powi(4);
    for t in 0..spec.trials {
        let set = build_labels(
            g,
            spec.beta,
            &spec.constants,
            ShortcutProvider::Empty,
            &src.trial(t),
        )?;
        let mut max_ratio = 1.0f64;
        for x in g.vertices() {
            for y in g.vertices() {
                if x >= y {
                    continue;
                }
                let q = query(&set.labels[x as usize], &set.labels[y as usize])?;
                let d = table[x as usize][y as usize];
                sound &= q.estimate >= d;
                max_ratio = max_ratio.max(q.estimate.to_f64() / d.to_f64());
            }
        }
        let entries = set.max_entries() as f64;
        let bits = set.labels.iter().map(|l| l.bit_size()).max().unwrap_or(0) as f64;
        size_ok &= entries <= entry_budget && bits <= bit_budget;
        let mut metrics = BTreeMap::new();
        metrics.insert("max_entries".into(), entries);
        metrics.insert("max_bits".into(), bits);
        metrics.insert("max_stretch".into(), max_ratio);
        metrics.insert("rounds".into(), set.charged_rounds as f64);
        trials.push(TrialRecord { trial: t, metrics });
    }
    let verdicts = vec![
        Verdict {
            name: "label-soundness".into(),
            pass: sound,
            detail: "estimates upper-bound the metric for every pair".into(),
        },
        Verdict {
            name: "label-size".into(),
            pass: size_ok,
            detail: format!("entries <= {entry_budget:.0} and bits <= {bit_budget:.0}"),
        },
    ];
    Ok((trials, verdicts))
}

fn run_transshipment(
    spec: &ExperimentSpec,
    g: &WeightedGraph,
    src: &RandomnessSource,
) -> Result<(Vec<TrialRecord>, Vec<Verdict>)> {
    use rand::Rng;
    let mut trials = Vec::new();
    let mut conservation = true;
    let mut never_beats_optimum = true;
    for t in 0..spec.trials {
        let trial_src = src.trial(t);
        let mut rng = trial_src.rng();
        let mut raw: Vec<i64> = (0..g.n())
            .map(|_| rng.gen_range(-4..=4i64) * Fx::ONE.0 as i64)
            .collect();
        let s: i64 = raw.iter().sum();
        raw[0] -= s;
        let demands = DemandVector::new(raw)?;
        let flow = boosted_ts(
            g,
            &demands,
            spec.beta,
            &spec.constants,
            ShortcutProvider::Empty,
            &trial_src,
            spec.fidelity,
        )?;
        let tree = RootedTree::new(g, flow.root, flow.tree_edges.clone())?;
        conservation &= tree_flow_optimality_check(g, &tree, &demands, &flow).is_ok();
        let mut metrics = BTreeMap::new();
        metrics.insert("cost".into(), flow.cost_f64());
        metrics.insert("rounds".into(), flow.charged_rounds as f64);
        if g.n() <= config::ORACLE_FLOW_CAP {
            let optimal = oracle::min_cost_flow(g, &demands.demands)?;
            never_beats_optimum &= flow.cost >= optimal.cost;
            if optimal.cost > 0 {
                metrics.insert(
                    "cost_ratio".into(),
                    flow.cost as f64 / optimal.cost as f64,
                );
            }
        }
        trials.push(TrialRecord { trial: t, metrics });
    }
    let verdicts = vec![
        Verdict {
            name: "ts-conservation".into(),
            pass: conservation,
            detail: "exact conservation and tree-flow uniqueness".into(),
        },
        Verdict {
            name: "ts-cost-dominates-optimum".into(),
            pass: never_beats_optimum,
            detail: "tree routing never beats the min-cost oracle".into(),
        },
    ];
    Ok((trials, verdicts))
}

fn run_partwise(
    spec: &ExperimentSpec,
    g: &WeightedGraph,
    src: &RandomnessSource,
) -> Result<(Vec<TrialRecord>, Vec<Verdict>)> {
    use rand::Rng;
    let mut trials = Vec::new();
    let mut equal = true;
    let mut rounds_ok = true;
    for t in 0..spec.trials {
        let mut rng = src.trial(t).rng();
        let parts = 2 + (rng.gen_range(0..6usize)).min(g.n() / 2);
        let p = random_partition(g, &mut rng, parts, 0.8);
        let sc = random_shortcut(g, &p, &mut rng);
        let q = quality(g, &p, &sc);
        let ops = [AggOp::Min, AggOp::Max, AggOp::Sum, AggOp::Or];
        let op = ops[rng.gen_range(0..4)];
        let xs: Vec<u64> = (0..g.n()).map(|_| rng.gen_range(0..1u64 << 30)).collect();
        let out = partwise_aggregate(g, &p, &sc, AggregateSpec::new(op, 32), &xs)?;
        let expect = oracle::direct_reduce(&p, op, &xs);
        for v in g.vertices() {
            let want = match p.part_of(v) {
                Some(i) => expect[i as usize],
                None => xs[v as usize],
            };
            equal &= out.values[v as usize] == want;
        }
        let bound = aggregate_round_bound(g, &q)?;
        rounds_ok &= out.stats.rounds <= bound;
        let mut metrics = BTreeMap::new();
        metrics.insert("rounds".into(), out.stats.rounds as f64);
        metrics.insert("quality".into(), q.quality().unwrap_or(0) as f64);
        metrics.insert("violations".into(), out.stats.violations.len() as f64);
        trials.push(TrialRecord { trial: t, metrics });
    }
    let verdicts = vec![
        Verdict {
            name: "partwise-exact".into(),
            pass: equal,
            detail: "aggregates equal the direct per-part reduction".into(),
        },
        Verdict {
            name: "partwise-rounds".into(),
            pass: rounds_ok,
            detail: format!(
                "rounds <= {} * (c+d) * ceil(log2 n) on every case",
                config::AGG_ALPHA
            ),
        },
    ];
    Ok((trials, verdicts))
}

fn run_heads_tails(
    spec: &ExperimentSpec,
    g: &WeightedGraph,
    src: &RandomnessSource,
) -> Result<(Vec<TrialRecord>, Vec<Verdict>)> {
    let tree_edges = g.bfs_tree(0);
    let tree = RootedTree::new(g, 0, tree_edges)?;
    let budget = congestlab::cluster::ht_level_budget(tree.len());
    let mut trials = Vec::new();
    let mut depth_ok = true;
    let mut stars_ok = true;
    for t in 0..spec.trials {
        let out = heads_tails(
            g,
            &tree,
            ShortcutProvider::Empty,
            &src.trial(t),
            spec.fidelity,
        )?;
        depth_ok &= out.hierarchy.depth() <= budget && out.attempts == 1;
        stars_ok &= out.hierarchy.verify(&tree).is_ok();
        let mut metrics = BTreeMap::new();
        metrics.insert("depth".into(), out.hierarchy.depth() as f64);
        metrics.insert("rounds".into(), out.rounds as f64);
        trials.push(TrialRecord { trial: t, metrics });
    }
    let verdicts = vec![
        Verdict {
            name: "ht-depth".into(),
            pass: depth_ok,
            detail: format!("depth <= ceil(log_4/3 n) + slack = {budget} on the first attempt"),
        },
        Verdict {
            name: "ht-structure".into(),
            pass: stars_ok,
            detail: "hierarchy invariants hold at every level".into(),
        },
    ];
    Ok((trials, verdicts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub field: String,
    pub a: String,
    pub b: String,
}

/// Structural diff of two records' specs, summaries and verdicts.
pub fn compare(a: &ResultRecord, b: &ResultRecord) -> Result<Vec<DiffEntry>> {
    if a.schema_version != b.schema_version {
        return Err(Error::Validation("schema versions differ".into()));
    }
    let mut out = Vec::new();
    let spec_a = serde_json::to_value(&a.spec).unwrap();
    let spec_b = serde_json::to_value(&b.spec).unwrap();
    if let (serde_json::Value::Object(oa), serde_json::Value::Object(ob)) = (&spec_a, &spec_b) {
        for (k, va) in oa {
            let vb = &ob[k];
            if va != vb {
                out.push(DiffEntry {
                    field: format!("spec.{k}"),
                    a: va.to_string(),
                    b: vb.to_string(),
                });
            }
        }
    }
    let keys: std::collections::BTreeSet<&String> =
        a.summary.keys().chain(b.summary.keys()).collect();
    for k in keys {
        match (a.summary.get(k), b.summary.get(k)) {
            (Some(ma), Some(mb)) => {
                if ma.mean != mb.mean {
                    out.push(DiffEntry {
                        field: format!("summary.{k}.mean"),
                        a: format!("{}", ma.mean),
                        b: format!("{}", mb.mean),
                    });
                }
            }
            (ma, mb) => out.push(DiffEntry {
                field: format!("summary.{k}"),
                a: ma.map_or("absent".into(), |m| format!("{}", m.mean)),
                b: mb.map_or("absent".into(), |m| format!("{}", m.mean)),
            }),
        }
    }
    for (va, vb) in a.verdicts.iter().zip(&b.verdicts) {
        if va.pass != vb.pass {
            out.push(DiffEntry {
                field: format!("verdict.{}", va.name),
                a: va.pass.to_string(),
                b: vb.pass.to_string(),
            });
        }
    }
    Ok(out)
}

/// Grammar: kind:args[:weights] where weights is "unit" or "uniform:lo:hi".
///   line:N | grid:RxC | er:N:P | rgg:N:RADIUS | star:N | file:PATH
pub fn parse_graph_spec(s: &str) -> Result<GraphSpec> {
    let bad = |msg: &str| Error::Validation(format!("graph spec {s:?}: {msg}"));
    let mut it = s.splitn(2, ':');
    let kind = it.next().unwrap_or_default();
    let rest = it.next().unwrap_or_default();
    let parse_weights = |toks: &[&str]| -> Result<WeightDist> {
        match toks {
            [] | ["unit"] => Ok(WeightDist::Unit),
            ["uniform", lo, hi] => Ok(WeightDist::UniformInt {
                lo: lo.parse().map_err(|_| bad("bad uniform lo"))?,
                hi: hi.parse().map_err(|_| bad("bad uniform hi"))?,
            }),
            _ => Err(bad("bad weight distribution")),
        }
    };
    match kind {
        "file" => Ok(GraphSpec::File { path: rest.to_string() }),
        "line" => {
            let toks: Vec<&str> = rest.split(':').filter(|t| !t.is_empty()).collect();
            let n = toks.first().ok_or_else(|| bad("missing n"))?;
            Ok(GraphSpec::Line {
                n: n.parse().map_err(|_| bad("bad n"))?,
                weights: parse_weights(&toks[1..])?,
            })
        }
        "grid" => {
            let toks: Vec<&str> = rest.split(':').filter(|t| !t.is_empty()).collect();
            let dims = toks.first().ok_or_else(|| bad("missing RxC"))?;
            let (r, c) = dims.split_once('x').ok_or_else(|| bad("want RxC"))?;
            Ok(GraphSpec::Grid {
                rows: r.parse().map_err(|_| bad("bad rows"))?,
                cols: c.parse().map_err(|_| bad("bad cols"))?,
                weights: parse_weights(&toks[1..])?,
            })
        }
        "er" => {
            let toks: Vec<&str> = rest.split(':').filter(|t| !t.is_empty()).collect();
            if toks.len() < 2 {
                return Err(bad("want er:N:P"));
            }
            Ok(GraphSpec::ErdosRenyiConnected {
                n: toks[0].parse().map_err(|_| bad("bad n"))?,
                p: toks[1].parse().map_err(|_| bad("bad p"))?,
                weights: parse_weights(&toks[2..])?,
            })
        }
        "rgg" => {
            let toks: Vec<&str> = rest.split(':').filter(|t| !t.is_empty()).collect();
            if toks.len() < 2 {
                return Err(bad("want rgg:N:RADIUS"));
            }
            Ok(GraphSpec::RandomGeometric {
                n: toks[0].parse().map_err(|_| bad("bad n"))?,
                radius: toks[1].parse().map_err(|_| bad("bad radius"))?,
                weights: parse_weights(&toks[2..])?,
            })
        }
        "star" => {
            let toks: Vec<&str> = rest.split(':').filter(|t| !t.is_empty()).collect();
            let n = toks.first().ok_or_else(|| bad("missing n"))?;
            Ok(GraphSpec::StarOfPaths {
                n: n.parse().map_err(|_| bad("bad n"))?,
                weights: parse_weights(&toks[1..])?,
            })
        }
        _ => Err(bad("unknown generator")),
    }
}

/// All-pairs oracle with an optional disk cache under $CONGESTLAB_CACHE.
pub fn cached_apsp(g: &WeightedGraph, key: &str) -> Result<Vec<Vec<Fx>>> {
    if let Ok(dir) = std::env::var("CONGESTLAB_CACHE") {
        let path = std::path::Path::new(&dir).join(format!("apsp-{key}.json"));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(raw) = serde_json::from_str::<Vec<Vec<u64>>>(&text) {
                return Ok(raw
                    .into_iter()
                    .map(|row| row.into_iter().map(Fx).collect())
                    .collect());
            }
        }
        let table = oracle::apsp(g)?;
        let raw: Vec<Vec<u64>> = table
            .iter()
            .map(|row| row.iter().map(|d| d.0).collect())
            .collect();
        std::fs::create_dir_all(&dir)?;
        std::fs::write(&path, serde_json::to_string(&raw).unwrap())?;
        return Ok(table);
    }
    oracle::apsp(g)
}

/// Stable cache key for (spec, seed).
pub fn spec_cache_key(spec: &GraphSpec, seed: u64) -> String {
    let text = serde_json::to_string(spec).unwrap();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes().chain(seed.to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    format!("{h:016x}")
}

/// Write the algorithm-specific dump files for trial 0 of the spec:
/// decomposition "v root arrival", distances "v d_min parent" plus a level
/// trace, the label file, the flow "u v f", or the partition assignment.
pub fn write_artifacts(spec: &ExperimentSpec, dir: &std::path::Path) -> Result<Vec<String>> {
    use std::fmt::Write as _;
    let g = generate(&spec.graph, spec.seed)?;
    let src = RandomnessSource::new(spec.seed).trial(0);
    let mut written = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<()> {
        std::fs::write(dir.join(name), text)?;
        written.push(name.to_string());
        Ok(())
    };
    match spec.algo {
        Algo::Ldd => {
            let params = DecompositionParams::new(spec.beta);
            let res = decompose(&g, &params, &src)?;
            emit("decomposition.txt", res.dump())?;
        }
        Algo::Sssp => {
            let res = sssp_tree(
                &g,
                spec.beta,
                0,
                &spec.constants,
                ShortcutProvider::Empty,
                &src,
                spec.fidelity,
            )?;
            emit("result.txt", res.dump())?;
            let run = congestlab::sssp::expected_sp_forest(
                &g,
                spec.beta,
                Fx::ONE,
                &spec.constants,
                ShortcutProvider::Empty,
                &src,
            )?;
            let mut trace = String::new();
            for (lvl, (state, info)) in run.levels.iter().enumerate() {
                writeln!(
                    trace,
                    "level {} R {} parts {} -> {} rounds {}",
                    lvl + 1,
                    state.scale.to_decimal_string(),
                    info.parts_before,
                    info.parts_after,
                    info.charged_rounds
                )
                .unwrap();
            }
            emit("trace.txt", trace)?;
        }
        Algo::Labels => {
            let set = build_labels(
                &g,
                spec.beta,
                &spec.constants,
                ShortcutProvider::Empty,
                &src,
            )?;
            emit("labels.txt", congestlab::labeling::labels_to_string(&set))?;
        }
        Algo::Transshipment => {
            use rand::Rng;
            let mut rng = src.rng();
            let mut raw: Vec<i64> = (0..g.n())
                .map(|_| rng.gen_range(-4..=4i64) * Fx::ONE.0 as i64)
                .collect();
            let s: i64 = raw.iter().sum();
            raw[0] -= s;
            let demands = DemandVector::new(raw)?;
            emit(
                "demands.txt",
                congestlab::transshipment::demands_to_string(&demands),
            )?;
            let flow = boosted_ts(
                &g,
                &demands,
                spec.beta,
                &spec.constants,
                ShortcutProvider::Empty,
                &src,
                spec.fidelity,
            )?;
            let tree = RootedTree::new(&g, flow.root, flow.tree_edges.clone())?;
            emit("flow.txt", flow.dump(&tree))?;
        }
        Algo::Partwise => {
            
            let mut rng = src.rng();
            let p = random_partition(&g, &mut rng, 4, 0.8);
            emit("partition.txt", congestlab::partwise::partition_to_string(&p))?;
        }
        Algo::HeadsTails => {}
    }
    Ok(written)
}

/// Separation rates for 0-to-d pairs on a unit path graph.
pub fn path_cut_rates(
    n: usize,
    beta: f64,
    distances: &[u64],
    trials: u64,
    seed: u64,
) -> Result<Vec<congestlab::ldd::PairCutStats>> {
    let g = generate(&GraphSpec::Line { n, weights: WeightDist::Unit }, seed)?;
    let pairs: Vec<(u32, u32)> = distances.iter().map(|&d| (0u32, d as u32)).collect();
    let params = DecompositionParams::new(beta);
    cut_probability_harness(&g, &params, &pairs, trials, &RandomnessSource::new(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(algo: Algo, graph: GraphSpec, beta: f64, trials: u64, seed: u64) -> ExperimentSpec {
        ExperimentSpec {
            graph,
            algo,
            beta,
            trials,
            seed,
            constants: AlgorithmConstants::default(),
            kappa_bits: config::DEFAULT_KAPPA_BITS,
            fidelity: Fidelity::RoundAccounted,
        }
    }

    #[test]
    fn graph_spec_grammar() {
        assert!(matches!(
            parse_graph_spec("grid:4x4").unwrap(),
            GraphSpec::Grid { rows: 4, cols: 4, weights: WeightDist::Unit }
        ));
        assert!(matches!(
            parse_graph_spec("er:64:0.2:uniform:1:9").unwrap(),
            GraphSpec::ErdosRenyiConnected { n: 64, .. }
        ));
        assert!(parse_graph_spec("er:64").is_err());
        assert!(parse_graph_spec("blob:3").is_err());
    }

    #[test]
    fn ldd_experiment_record() {
        let s = spec(
            Algo::Ldd,
            GraphSpec::Grid { rows: 16, cols: 16, weights: WeightDist::Unit },
            0.1,
            200,
            7,
        );
        let record = run_experiment(&s).unwrap();
        assert!(record.all_pass(), "{:?}", record.verdicts);
        assert_eq!(record.trials.len(), 200);
        assert!(record.summary.contains_key("radius"));
        assert!(record
            .verdicts
            .iter()
            .any(|v| v.name == "ldd-radius-bound" && v.pass));
    }

    #[test]
    fn records_are_byte_identical() {
        let s = spec(
            Algo::Partwise,
            GraphSpec::ErdosRenyiConnected { n: 24, p: 0.2, weights: WeightDist::Unit },
            0.1,
            5,
            3,
        );
        let a = run_experiment(&s).unwrap().to_json();
        let b = run_experiment(&s).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn compare_identical_is_empty() {
        let s = spec(
            Algo::HeadsTails,
            GraphSpec::Grid { rows: 4, cols: 4, weights: WeightDist::Unit },
            0.1,
            3,
            5,
        );
        let a = run_experiment(&s).unwrap();
        let b = run_experiment(&s).unwrap();
        assert!(compare(&a, &b).unwrap().is_empty());
        // a different seed shows up in the diff
        let mut s2 = s.clone();
        s2.seed = 6;
        let c = run_experiment(&s2).unwrap();
        let diff = compare(&a, &c).unwrap();
        assert!(!diff.is_empty());
    }

    #[test]
    fn invalid_beta_is_usage_error() {
        let s = spec(
            Algo::Ldd,
            GraphSpec::Line { n: 8, weights: WeightDist::Unit },
            1.5,
            3,
            5,
        );
        assert!(run_experiment(&s).is_err());
    }

    #[test]
    fn record_round_trips_schema() {
        let s = spec(
            Algo::HeadsTails,
            GraphSpec::Grid { rows: 4, cols: 4, weights: WeightDist::Unit },
            0.1,
            2,
            5,
        );
        let record = run_experiment(&s).unwrap();
        let text = record.to_json();
        let back = ResultRecord::from_json(&text).unwrap();
        assert_eq!(record, back);
        // unknown fields are rejected (the schema is closed)
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v.as_object_mut().unwrap().insert("bogus".into(), 1.into());
        assert!(ResultRecord::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn beta_tradeoff_direction() {
        // smaller beta buys lower stretch for more rounds
        let mk = |beta: f64| {
            spec(
                Algo::Sssp,
                GraphSpec::Grid { rows: 6, cols: 8, weights: WeightDist::Unit },
                beta,
                4,
                17,
            )
        };
        let coarse = run_experiment(&mk(0.25)).unwrap();
        let fine = run_experiment(&mk(0.0625)).unwrap();
        let diff = compare(&coarse, &fine).unwrap();
        assert!(diff.iter().any(|d| d.field == "summary.rounds.mean"));
        assert!(
            fine.summary["max_stretch"].mean <= coarse.summary["max_stretch"].mean,
            "stretch: beta=1/16 {} vs beta=1/4 {}",
            fine.summary["max_stretch"].mean,
            coarse.summary["max_stretch"].mean
        );
        assert!(
            fine.summary["rounds"].mean >= coarse.summary["rounds"].mean,
            "rounds: beta=1/16 {} vs beta=1/4 {}",
            fine.summary["rounds"].mean,
            coarse.summary["rounds"].mean
        );
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = spec(
            Algo::Ldd,
            GraphSpec::Line { n: 16, weights: WeightDist::Unit },
            0.2,
            4,
            1,
        );
        let record = run_experiment(&s).unwrap();
        let csv = record.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("trial,"));
    }
}
