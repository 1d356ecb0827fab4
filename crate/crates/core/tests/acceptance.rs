//! Acceptance suite: finite-size instantiations of every guarantee, with the
//! constants pinned in `congestlab::config` and below. One test per
//! criterion; each prints a single PASS line (failures panic with details).

use congestlab::cluster::{
    aggregate_path_to_root, aggregate_subtree, assign_cluster_roots, heads_tails,
    ht_level_budget, Fidelity, RootedTree, ShortcutProvider,
};
use congestlab::config;
use congestlab::graph::{
    dijkstra, dijkstra_filtered, generate, GraphSpec, WeightDist, WeightedGraph,
};
use congestlab::labeling::{build_labels, query};
use congestlab::ldd::{
    cut_probability_harness, decompose, decompose_contracted, decompose_with_starts,
    sample_start_times, ContractedGraph, DecompositionParams, GraphView,
};
use congestlab::oracle;
use congestlab::partwise::{
    aggregate_round_bound, partwise_aggregate, quality, random_partition, random_shortcut,
    AggOp, AggregateSpec, Shortcut, ValidPartition,
};
use congestlab::rng::RandomnessSource;
use congestlab::sssp::{
    check_invariant, expected_sp_forest, sssp_tree, stretch_bound, stretch_level,
    AlgorithmConstants, SubroutineState,
};
use congestlab::transshipment::{boosted_ts, tree_flow_optimality_check, DemandVector};
use congestlab::{Error, Fx};
use rand::Rng;
use std::time::Instant;

fn consts() -> AlgorithmConstants {
    AlgorithmConstants { c1: 4.0, c2: 2.0, termination_exponent: 4.0, gamma: 2.0 }
}

/// Mixed desk-scale graph corpus.
fn graph_mix(max_n: usize, count: usize, seed0: u64) -> Vec<WeightedGraph> {
    let mut out = Vec::new();
    let mut i = 0u64;
    while out.len() < count {
        let seed = seed0 + i;
        i += 1;
        let mut rng = RandomnessSource::new(seed).rng();
        let n = rng.gen_range(12..=max_n);
        let spec = match i % 5 {
            0 => GraphSpec::ErdosRenyiConnected {
                n,
                p: rng.gen_range(0.08..0.3),
                weights: WeightDist::UniformInt { lo: 1, hi: 12 },
            },
            1 => GraphSpec::Grid {
                rows: (n as f64).sqrt().max(2.0) as usize,
                cols: (n as f64).sqrt().max(2.0) as usize,
                weights: WeightDist::UniformInt { lo: 1, hi: 6 },
            },
            2 => GraphSpec::Line { n, weights: WeightDist::UniformInt { lo: 1, hi: 9 } },
            3 => GraphSpec::StarOfPaths { n, weights: WeightDist::Unit },
            _ => GraphSpec::RandomGeometric {
                n: n.min(64),
                radius: 0.35,
                weights: WeightDist::UniformInt { lo: 1, hi: 7 },
            },
        };
        if let Ok(g) = generate(&spec, seed) {
            out.push(g);
        }
    }
    out
}

#[test]
fn criterion_01_ldd_diameter() {
    let t0 = Instant::now();
    let beta = 0.1;
    let params = DecompositionParams::new(beta);
    let trials = 200u64;
    for (name, spec) in [
        (
            "grid 16x16",
            GraphSpec::Grid { rows: 16, cols: 16, weights: WeightDist::Unit },
        ),
        (
            "erdos-renyi n=256",
            GraphSpec::ErdosRenyiConnected { n: 256, p: 0.05, weights: WeightDist::Unit },
        ),
    ] {
        let g = generate(&spec, 42).unwrap();
        let bound = params.start_c / beta * (g.n() as f64).ln();
        let src = RandomnessSource::new(1);
        let mut flagged = 0u64;
        for t in 0..trials {
            match decompose(&g, &params, &src.trial(t)) {
                Ok(res) => {
                    let starts = sample_start_times(g.n(), &params, &src.trial(t));
                    let radius = res.max_radius(&starts).to_f64();
                    assert!(
                        radius <= bound,
                        "{name}: trial {t} radius {radius} > {bound}"
                    );
                }
                Err(Error::FlaggedTrial) => flagged += 1,
                Err(e) => panic!("{e}"),
            }
        }
        let unflagged = (trials - flagged) as f64 / trials as f64;
        assert!(unflagged >= 0.99, "{name}: only {unflagged} un-flagged");
    }
    println!(
        "criterion 01 PASS: ldd weighted radius <= (c/beta) ln n on every un-flagged trial \
         ({}s)",
        t0.elapsed().as_secs_f32()
    );
}

#[test]
fn criterion_02_ldd_cut_probability() {
    let t0 = Instant::now();
    let beta = 0.1;
    let g = generate(&GraphSpec::Line { n: 64, weights: WeightDist::Unit }, 0).unwrap();
    let base = 20u32;
    let pairs: Vec<(u32, u32)> = [1u32, 2, 4, 8].iter().map(|d| (base, base + d)).collect();
    let trials = 2000u64;
    let stats = cut_probability_harness(
        &g,
        &DecompositionParams::new(beta),
        &pairs,
        trials,
        &RandomnessSource::new(7),
    )
    .unwrap();
    for s in &stats {
        let d = s.dist.to_f64();
        let separation = 1.0 - s.rate;
        let slack = 3.0 * (separation * (1.0 - separation) / s.trials as f64).sqrt();
        let bound = beta * (2.0 * d + 1.0) + slack;
        assert!(
            separation <= bound,
            "pair at d={d}: separation {separation:.4} > {bound:.4}"
        );
    }
    println!(
        "criterion 02 PASS: separation rate <= beta(2d+1) + 3 sigma at d in {{1,2,4,8}} ({}s)",
        t0.elapsed().as_secs_f32()
    );
}

#[test]
fn criterion_03_subroutine_invariant() {
    let t0 = Instant::now();
    let k = consts();
    let beta = 0.125;
    let graphs = graph_mix(128, 50, 300);
    let mut levels_checked = 0usize;
    for (i, g) in graphs.iter().enumerate() {
        let initial = SubroutineState::initial(g, Fx::ONE);
        check_invariant(g, &initial).unwrap();
        let run = expected_sp_forest(
            g,
            beta,
            Fx::ONE,
            &k,
            ShortcutProvider::Empty,
            &RandomnessSource::new(9000 + i as u64),
        )
        .unwrap();
        for (lvl, (state, _)) in run.levels.iter().enumerate() {
            if let Err(e) = check_invariant(g, state) {
                panic!("graph {i} level {lvl}: {e}");
            }
            levels_checked += 1;
        }
    }
    println!(
        "criterion 03 PASS: all five invariant clauses hold after {levels_checked} levels \
         across 50 graphs ({}s)",
        t0.elapsed().as_secs_f32()
    );
}

#[test]
fn criterion_04_sssp_soundness() {
    let t0 = Instant::now();
    let k = consts();
    let graphs = graph_mix(100, 12, 1200);
    for (i, g) in graphs.iter().enumerate() {
        let beta = 0.125f64.max(1.2 / g.n() as f64);
        let res = sssp_tree(
            g,
            beta,
            0,
            &k,
            ShortcutProvider::Empty,
            &RandomnessSource::new(80 + i as u64),
            Fidelity::RoundAccounted,
        )
        .unwrap();
        let metric = dijkstra(g, 0);
        let in_tree: std::collections::HashSet<u32> = res.tree_edges.iter().copied().collect();
        let tree_dist = dijkstra_filtered(g, 0, |e| in_tree.contains(&e)).dist;
        for v in g.vertices() {
            assert!(
                tree_dist[v as usize] >= metric.dist[v as usize],
                "graph {i} vertex {v}: {} < {}",
                tree_dist[v as usize],
                metric.dist[v as usize]
            );
            assert!(tree_dist[v as usize] <= res.dist[v as usize]);
        }
    }
    println!(
        "criterion 04 PASS: d_T(s,v) >= d_G(s,v) exactly on every run and vertex ({}s)",
        t0.elapsed().as_secs_f32()
    );
}

#[test]
fn criterion_05_sssp_stretch_bound() {
    let t0 = Instant::now();
    let k = consts();
    let beta = 0.125;
    let g = generate(&GraphSpec::Grid { rows: 16, cols: 16, weights: WeightDist::Unit }, 0)
        .unwrap();
    let metric = dijkstra(&g, 0);
    let runs = 50u64;
    let mut ok_runs = 0u64;
    for r in 0..runs {
        let res = sssp_tree(
            &g,
            beta,
            0,
            &k,
            ShortcutProvider::Empty,
            &RandomnessSource::new(5000 + r),
            Fidelity::RoundAccounted,
        )
        .unwrap();
        let in_tree: std::collections::HashSet<u32> = res.tree_edges.iter().copied().collect();
        let tree_dist = dijkstra_filtered(&g, 0, |e| in_tree.contains(&e)).dist;
        let all_ok = g.vertices().filter(|&v| v != 0).all(|v| {
            let m = metric.dist[v as usize].to_f64();
            let t = stretch_level(m, &k, beta);
            tree_dist[v as usize].to_f64() <= stretch_bound(g.n(), &k, beta, t)
        });
        if all_ok {
            ok_runs += 1;
        }
    }
    let frac = ok_runs as f64 / runs as f64;
    assert!(
        frac >= 0.95,
        "only {frac} of runs satisfied the bound at every vertex"
    );
    println!(
        "criterion 05 PASS: whole-run stretch bound held in {ok_runs}/{runs} runs ({}s)",
        t0.elapsed().as_secs_f32()
    );
}

#[test]
fn criterion_06_constant_probability_clause() {
    let t0 = Instant::now();
    let k = consts();
    let beta = 0.125;
    let g = generate(&GraphSpec::Grid { rows: 16, cols: 16, weights: WeightDist::Unit }, 0)
        .unwrap();
    let table = oracle::apsp(&g).unwrap();
    let mut pair_rng = RandomnessSource::new(606).rng();
    let pairs: Vec<(u32, u32)> = (0..100)
        .map(|_| {
            (
                pair_rng.gen_range(0..g.n() as u32),
                pair_rng.gen_range(0..g.n() as u32),
            )
        })
        .filter(|(a, b)| a != b)
        .collect();
    let trials = 50u64;
    let mut fraction_sum = 0.0;
    for t in 0..trials {
        let run = expected_sp_forest(
            &g,
            beta,
            Fx::ONE,
            &k,
            ShortcutProvider::Empty,
            &RandomnessSource::new(7000 + t),
        )
        .unwrap();
        let forest: std::collections::HashSet<u32> =
            run.forest_edges.iter().copied().collect();
        let mut metric_cache: std::collections::HashMap<u32, Vec<Fx>> = Default::default();
        let mut good = 0usize;
        for &(x, y) in &pairs {
            let d_t = metric_cache
                .entry(x)
                .or_insert_with(|| dijkstra_filtered(&g, x, |e| forest.contains(&e)).dist)
                [y as usize];
            let m = table[x as usize][y as usize].to_f64();
            let lvl = stretch_level(m, &k, beta);
            if !d_t.is_inf() && d_t.to_f64() <= stretch_bound(g.n(), &k, beta, lvl) {
                good += 1;
            }
        }
        fraction_sum += good as f64 / pairs.len() as f64;
    }
    let avg = fraction_sum / trials as f64;
    assert!(avg >= 0.40, "average per-trial pass fraction {avg} < 0.40");
    println!(
        "criterion 06 PASS: single-run bound held for {avg:.3} of sampled pairs on average \
         ({}s)",
        t0.elapsed().as_secs_f32()
    );
}

#[test]
fn criterion_07_heads_tails_termination() {
    let t0 = Instant::now();
    let n = 1024usize;
    let budget = ht_level_budget(n);
    for trial in 0..100u64 {
        let mut rng = RandomnessSource::new(4000 + trial).rng();
        let edges: Vec<(u32, u32, Fx)> = (1..n as u32)
            .map(|v| (v, rng.gen_range(0..v), Fx::ONE))
            .collect();
        let g = WeightedGraph::new(n, edges).unwrap();
        let ids: Vec<u32> = (0..g.m() as u32).collect();
        let t = RootedTree::new(&g, 0, ids).unwrap();
        let out = heads_tails(
            &g,
            &t,
            ShortcutProvider::Empty,
            &RandomnessSource::new(trial),
            Fidelity::RoundAccounted,
        )
        .unwrap();
        assert_eq!(out.attempts, 1, "trial {trial} needed a retry");
        assert!(
            out.hierarchy.depth() <= budget,
            "trial {trial}: depth {} > {budget}",
            out.hierarchy.depth()
        );
        out.hierarchy.verify(&t).unwrap();
    }
    println!(
        "criterion 07 PASS: 100 hierarchies within {budget} levels, star property at every \
         level ({}s)",
        t0.elapsed().as_secs_f32()
    );
}

#[test]
fn criterion_08_tree_aggregation_oracles() {
    let t0 = Instant::now();
    let mut cases = 0usize;
    let mut case_rng = RandomnessSource::new(808).rng();
    while cases < 1000 {
        let n = case_rng.gen_range(2..=96usize);
        let seed = case_rng.gen::<u64>();
        let mut rng = RandomnessSource::new(seed).rng();
        let edges: Vec<(u32, u32, Fx)> = (1..n as u32)
            .map(|v| {
                (
                    v,
                    rng.gen_range(0..v),
                    Fx::from_units(rng.gen_range(1..=5u64)),
                )
            })
            .collect();
        let g = WeightedGraph::new(n, edges).unwrap();
        let ids: Vec<u32> = (0..g.m() as u32).collect();
        let root = rng.gen_range(0..n as u32);
        let t = RootedTree::new(&g, root, ids).unwrap();
        let ht = heads_tails(
            &g,
            &t,
            ShortcutProvider::Empty,
            &RandomnessSource::new(seed ^ 0xaaaa),
            Fidelity::RoundAccounted,
        )
        .unwrap();
        let roots = assign_cluster_roots(&t, &ht.hierarchy);
        let ops = [AggOp::Min, AggOp::Max, AggOp::Sum, AggOp::Or];
        let op = ops[rng.gen_range(0..4)];
        let spec = AggregateSpec::new(op, 32);
        let xs: Vec<u64> = (0..n).map(|_| rng.gen_range(0..1u64 << 20)).collect();
        let sub = aggregate_subtree(
            &g, &t, &ht.hierarchy, &roots, spec, &xs,
            ShortcutProvider::Empty, Fidelity::RoundAccounted,
        )
        .unwrap();
        let want_sub = oracle::subtree_sums(&t, op, &xs);
        for (i, &v) in t.vertices().iter().enumerate() {
            assert_eq!(sub.values[v as usize], want_sub[i], "case {cases} subtree at {v}");
        }
        let path = aggregate_path_to_root(
            &g, &t, &ht.hierarchy, &roots, spec, &xs,
            ShortcutProvider::Empty, Fidelity::RoundAccounted,
        )
        .unwrap();
        let want_path = oracle::path_to_root_sums(&t, op, &xs);
        for (i, &v) in t.vertices().iter().enumerate() {
            assert_eq!(path.values[v as usize], want_path[i], "case {cases} path at {v}");
        }
        cases += 1;
    }
    println!(
        "criterion 08 PASS: both aggregates equal their recursive oracles on 1000 cases ({}s)",
        t0.elapsed().as_secs_f32()
    );
}

#[test]
fn criterion_09_partwise_aggregation() {
    let t0 = Instant::now();
    let mut case_rng = RandomnessSource::new(909).rng();
    for case in 0..200 {
        let n = case_rng.gen_range(8..=64usize);
        let seed = case_rng.gen::<u64>();
        let g = match generate(
            &GraphSpec::ErdosRenyiConnected {
                n,
                p: 0.15,
                weights: WeightDist::UniformInt { lo: 1, hi: 5 },
            },
            seed,
        ) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let mut rng = RandomnessSource::new(seed ^ 0x5555).rng();
        let p = random_partition(&g, &mut rng, 1 + case % 6, 0.85);
        let sc = random_shortcut(&g, &p, &mut rng);
        let q = quality(&g, &p, &sc);
        let ops = [AggOp::Min, AggOp::Max, AggOp::Sum, AggOp::Or];
        let op = ops[rng.gen_range(0..4)];
        let xs: Vec<u64> = (0..g.n()).map(|_| rng.gen_range(0..1u64 << 30)).collect();
        let out = partwise_aggregate(&g, &p, &sc, AggregateSpec::new(op, 32), &xs).unwrap();
        let expect = oracle::direct_reduce(&p, op, &xs);
        for v in g.vertices() {
            let want = match p.part_of(v) {
                Some(i) => expect[i as usize],
                None => xs[v as usize],
            };
            assert_eq!(out.values[v as usize], want, "case {case} vertex {v}");
        }
        let bound = aggregate_round_bound(&g, &q).unwrap();
        assert!(
            out.stats.rounds <= bound,
            "case {case}: rounds {} > alpha(c+d)log2n = {bound}",
            out.stats.rounds
        );
    }
    println!(
        "criterion 09 PASS: 200 cases exact, rounds within alpha(c+d)ceil(log2 n) at alpha = {} \
         ({}s)",
        config::AGG_ALPHA,
        t0.elapsed().as_secs_f32()
    );
}

#[test]
fn criterion_10_contracted_ldd_coupling() {
    let t0 = Instant::now();
    let mut done = 0usize;
    let mut case_rng = RandomnessSource::new(1010).rng();
    while done < 100 {
        let n = case_rng.gen_range(16..=128usize);
        let seed = case_rng.gen::<u64>();
        let g = match generate(
            &GraphSpec::ErdosRenyiConnected {
                n,
                p: 0.12,
                weights: WeightDist::UniformInt { lo: 1, hi: 8 },
            },
            seed,
        ) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let mut rng = RandomnessSource::new(seed ^ 0x1234).rng();
        let scale = Fx::from_units(2);
        let weights: Vec<Fx> = g
            .edges()
            .iter()
            .map(|e| if rng.gen_bool(0.45) { Fx::ZERO } else { e.w + scale })
            .collect();
        let cg = ContractedGraph::from_zero_components(&g, &weights);
        let params = DecompositionParams::new(0.2)
            .with_scale(scale)
            .with_horizon_n(g.n());
        let src = RandomnessSource::new(seed ^ 0x9876);
        let p = ValidPartition::new(&g, cg.parts.clone()).unwrap();
        let sc = Shortcut::empty(&p);
        let got = match decompose_contracted(&g, &cg, &params, &sc, &src) {
            Ok(r) => r,
            Err(Error::FlaggedTrial) => continue,
            Err(e) => panic!("{e}"),
        };
        // explicit contraction built independently
        let mut h_edges = Vec::new();
        for (i, e) in g.edges().iter().enumerate() {
            if weights[i] == Fx::ZERO {
                continue;
            }
            let (pu, pv) = (cg.part_of[e.u as usize], cg.part_of[e.v as usize]);
            if pu != pv {
                h_edges.push((pu, pv, weights[i]));
            }
        }
        let view = GraphView::from_edges(cg.parts.len(), h_edges);
        let starts = sample_start_times(cg.parts.len(), &params, &src);
        let want = decompose_with_starts(&view, &params, &starts);
        assert_eq!(got.result.root, want.root, "case {done}");
        assert_eq!(got.result.arrival, want.arrival, "case {done}");
        done += 1;
    }
    println!(
        "criterion 10 PASS: shared-randomness coupling exact on 100 contracted cases ({}s)",
        t0.elapsed().as_secs_f32()
    );
}

#[test]
fn criterion_11_transshipment() {
    let t0 = Instant::now();
    let k = consts();
    let mut ratios = Vec::new();
    let mut case_rng = RandomnessSource::new(1111).rng();
    let mut done = 0usize;
    while done < 50 {
        let n = case_rng.gen_range(8..=64usize);
        let seed = case_rng.gen::<u64>();
        let g = match generate(
            &GraphSpec::ErdosRenyiConnected {
                n,
                p: 0.2,
                weights: WeightDist::UniformInt { lo: 1, hi: 9 },
            },
            seed,
        ) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let beta = 0.2f64.max(1.2 / n as f64);
        let mut rng = RandomnessSource::new(seed ^ 0xfeed).rng();
        let mut raw: Vec<i64> = (0..n)
            .map(|_| rng.gen_range(-5..=5i64) * Fx::ONE.0 as i64)
            .collect();
        let s: i64 = raw.iter().sum();
        raw[0] -= s;
        let demands = DemandVector::new(raw).unwrap();
        let flow = boosted_ts(
            &g,
            &demands,
            beta,
            &k,
            ShortcutProvider::Empty,
            &RandomnessSource::new(seed ^ 0xabcd),
            Fidelity::RoundAccounted,
        )
        .unwrap();
        let tree = RootedTree::new(&g, flow.root, flow.tree_edges.clone()).unwrap();
        tree_flow_optimality_check(&g, &tree, &demands, &flow).unwrap();
        let optimal = oracle::min_cost_flow(&g, &demands.demands).unwrap();
        assert!(
            flow.cost >= optimal.cost,
            "case {done}: tree cost {} beats optimum {}",
            flow.cost,
            optimal.cost
        );
        if optimal.cost > 0 {
            ratios.push(flow.cost as f64 / optimal.cost as f64);
        }
        done += 1;
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = ratios[ratios.len() / 2];
    println!(
        "criterion 11 PASS: conservation exact, cost >= optimum on 50 instances; median \
         cost ratio {median:.3} (informational) ({}s)",
        t0.elapsed().as_secs_f32()
    );
}

#[test]
fn criterion_12_label_soundness() {
    let t0 = Instant::now();
    let k = consts();
    let beta = 0.125;
    let g = generate(
        &GraphSpec::ErdosRenyiConnected {
            n: 128,
            p: 0.06,
            weights: WeightDist::UniformInt { lo: 1, hi: 10 },
        },
        12,
    )
    .unwrap();
    let set = build_labels(
        &g,
        beta,
        &k,
        ShortcutProvider::Empty,
        &RandomnessSource::new(121212),
    )
    .unwrap();
    let table = oracle::apsp(&g).unwrap();
    let mut stretches = Vec::new();
    for x in g.vertices() {
        for y in g.vertices() {
            if x >= y {
                continue;
            }
            let q = query(&set.labels[x as usize], &set.labels[y as usize]).unwrap();
            let d = table[x as usize][y as usize];
            assert!(
                q.estimate >= d,
                "pair ({x},{y}): estimate {} < distance {d}",
                q.estimate
            );
            stretches.push(q.estimate.to_f64() / d.to_f64());
        }
    }
    let log2n = (g.n() as f64).log2();
    let entry_budget = config::KAPPA_LABEL_ENTRIES * log2n.powi(4);
    let bit_budget = config::KAPPA_LABEL_BITS * log2n.powi(4);
    let entries = set.max_entries() as f64;
    let bits = set.labels.iter().map(|l| l.bit_size()).max().unwrap() as f64;
    assert!(entries <= entry_budget, "{entries} entries > {entry_budget}");
    assert!(bits <= bit_budget, "{bits} bits > {bit_budget}");
    stretches.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let decile = |q: f64| stretches[((stretches.len() - 1) as f64 * q) as usize];
    println!(
        "criterion 12 PASS: estimates sound on all {} pairs; max {entries} entries \
         (budget {entry_budget:.0}); stretch deciles p10 {:.2} p50 {:.2} p90 {:.2} ({}s)",
        stretches.len(),
        decile(0.1),
        decile(0.5),
        decile(0.9),
        t0.elapsed().as_secs_f32()
    );
}
