//! Property tests for structural invariants of the pipeline.

mod common;

use std::collections::BTreeSet;

use common::oracles::{brute_nw_score, brute_weighted_score};
use ghost_core::alignment::{
    dissimilarity_ratio, nw_align, relative_distance, render, weighted_prototype_score, ScoringScheme,
    WeightedMatchConstants,
};
use ghost_core::clustering::{
    bea_reorder, partition, render_image, vat_reorder_prim, Basis, ClusterSet, DissimilarityMatrix, PartitionConfig,
    Permutation,
};
use ghost_core::consensus::{
    build_guide_tree, derive_prototype, progressive_msa, ConsensusPrototype, ProtoSymbol,
};
use ghost_core::engine::{ModelCluster, ModelParams, ServiceModel, Strategy as MatchStrategy};
use ghost_core::evaluation::{
    categorize, fold_assignment, generate_library, inject_noise, Category, DirectoryProtocolSpec, GeneratorConfig,
};
use ghost_core::trace::{load_model, parse_trace_file, save_model, write_trace_file, Interaction, TraceLibrary};
use proptest::prelude::*;

fn symmetric(n: usize, vals: &[f64]) -> DissimilarityMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match i.cmp(&j) {
                    std::cmp::Ordering::Equal => 0.0,
                    std::cmp::Ordering::Less => vals[i * n + j],
                    std::cmp::Ordering::Greater => vals[j * n + i],
                })
                .collect()
        })
        .collect();
    DissimilarityMatrix::from_rows(&rows, Basis::Response).unwrap()
}

fn matrix_strategy(max_n: usize) -> impl Strategy<Value = DissimilarityMatrix> {
    (2..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(prop_oneof![Just(0.25), Just(0.5), 0.0..1.0f64], n * n)
            .prop_map(move |v| symmetric(n, &v))
    })
}

fn message(max: usize) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(proptest::sample::select(b"{}:,abAB01".as_slice()), 1..=max)
}

fn prototype() -> impl Strategy<Value = ConsensusPrototype> {
    let sym = prop_oneof![Just(ProtoSymbol::Wildcard), proptest::sample::select(b"ab:".as_slice()).prop_map(ProtoSymbol::Byte)];
    proptest::collection::vec((sym, 1e-5..1.0f64), 1..=6).prop_map(|cols| ConsensusPrototype {
        symbols: cols.iter().map(|c| c.0).collect(),
        weights: cols.iter().map(|c| c.1).collect(),
        f_used: 0.8,
        cluster: 0,
    })
}

/// Step-by-step replay of the ordering rule.
fn prim_replay(dm: &DissimilarityMatrix) -> Vec<usize> {
    let n = dm.n();
    let (mut seed, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..n {
            if dm.get(i, j) > best {
                best = dm.get(i, j);
                seed = i;
            }
        }
    }
    let mut order = vec![seed];
    while order.len() < n {
        let mut pick = None;
        for j in (0..n).filter(|j| !order.contains(j)) {
            let d = order.iter().map(|&p| dm.get(p, j)).fold(f64::INFINITY, f64::min);
            if pick.is_none_or(|(bd, _)| d < bd) {
                pick = Some((d, j));
            }
        }
        order.push(pick.unwrap().1);
    }
    order
}

fn is_partition(cs: &ClusterSet, n: usize) -> bool {
    let mut all: Vec<usize> = cs.clusters.iter().flatten().copied().collect();
    all.sort_unstable();
    cs.clusters.iter().all(|c| !c.is_empty()) && all == (0..n).collect::<Vec<_>>()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn alignment_rows_strip_to_inputs(a in message(8), b in message(8)) {
        for s in [ScoringScheme::MATCHING, ScoringScheme::SUBSTITUTION] {
            let al = nw_align(&a, &b, &s);
            prop_assert_eq!(al.a.len(), al.b.len());
            prop_assert!(al.a.iter().zip(&al.b).all(|(x, y)| x.is_some() || y.is_some()));
            let summed: f64 = al.a.iter().zip(&al.b).map(|(x, y)| match (x, y) {
                (Some(x), Some(y)) => s.pair(*x, *y),
                _ => s.g,
            }).sum();
            prop_assert_eq!(summed, al.score);
            prop_assert_eq!(render(&al.a).replace('-', ""), String::from_utf8_lossy(&a).replace('-', ""));
        }
    }

    #[test]
    fn nw_matches_brute_force_on_short_inputs(a in message(5), b in message(5)) {
        prop_assert_eq!(nw_align(&a, &b, &ScoringScheme::SUBSTITUTION).score, brute_nw_score(&a, &b, &ScoringScheme::SUBSTITUTION));
    }

    #[test]
    fn ratio_is_symmetric_and_bounded(a in message(10), b in message(10)) {
        let r = dissimilarity_ratio(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert_eq!(r, dissimilarity_ratio(&b, &a).unwrap());
        prop_assert_eq!(dissimilarity_ratio(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn relative_distance_in_unit_interval(p in prototype(), r in message(8)) {
        let k = WeightedMatchConstants::default();
        match relative_distance(&p, &r, &k) {
            Ok(d) => prop_assert!((0.0..=1.0).contains(&d)),
            Err(_) => prop_assert!(p.symbols.iter().all(|s| s.is_wildcard())),
        }
        prop_assert!((weighted_prototype_score(&p, &r, &k) - brute_weighted_score(&p, &r, &k)).abs() < 1e-9);
    }

    #[test]
    fn weight_scaling_keeps_distance(p in prototype(), r in message(8), scale in prop_oneof![Just(0.5), Just(2.0), Just(1.0 / 796.0), Just(10.0)]) {
        let k = WeightedMatchConstants::default();
        let mut q = p.clone();
        q.weights.iter_mut().for_each(|w| *w *= scale);
        match (relative_distance(&p, &r, &k), relative_distance(&q, &r, &k)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9),
            (a, b) => prop_assert_eq!(a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn prim_follows_the_greedy_rule(dm in matrix_strategy(8)) {
        let p = vat_reorder_prim(&dm);
        prop_assert!(p.is_valid());
        prop_assert_eq!(p.order, prim_replay(&dm));
    }

    #[test]
    fn bea_is_a_permutation(dm in matrix_strategy(8)) {
        let p = bea_reorder(&dm);
        prop_assert!(p.is_valid());
        prop_assert_eq!(p.order.len(), dm.n());
    }

    #[test]
    fn image_has_one_pixel_per_entry(dm in matrix_strategy(6)) {
        let img = render_image(&dm, &Permutation::identity(dm.n()));
        prop_assert_eq!((img.width, img.height), (dm.n(), dm.n()));
        prop_assert!((0..dm.n()).all(|i| img.pixel(i, i) == 0));
    }

    #[test]
    fn partitions_cover_every_index(
        dm in matrix_strategy(9),
        cuts in proptest::collection::btree_set(1usize..9, 0..4),
        tau in proptest::option::of(0.0..1.0f64),
    ) {
        let n = dm.n();
        let perm = vat_reorder_prim(&dm);
        let auto = partition(&dm, &perm, &PartitionConfig::Auto { tau }).unwrap();
        prop_assert!(is_partition(&auto, n));
        let cuts: Vec<usize> = cuts.into_iter().filter(|&c| c < n).collect();
        let fixed = partition(&dm, &perm, &PartitionConfig::Boundaries(cuts.clone())).unwrap();
        prop_assert!(is_partition(&fixed, n));
        prop_assert_eq!(fixed.clusters.len(), cuts.len() + 1);
    }

    #[test]
    fn msa_rows_strip_to_requests(reqs in proptest::collection::vec(message(7), 1..=5), vals in proptest::collection::vec(0.0..1.0f64, 25)) {
        let k = reqs.len();
        let dist = if k == 1 { vec![vec![0.0]] } else { symmetric(k, &vals).rows() };
        let tree = build_guide_tree(&dist);
        let mut leaves = tree.leaves();
        leaves.sort_unstable();
        prop_assert_eq!(leaves, (0..k).collect::<Vec<_>>());
        let refs: Vec<&[u8]> = reqs.iter().map(Vec::as_slice).collect();
        let profile = progressive_msa(&refs, &tree, &ScoringScheme::SUBSTITUTION);
        let w = profile.width();
        for (row, req) in profile.rows.iter().zip(&reqs) {
            prop_assert_eq!(row.len(), w);
            prop_assert_eq!(&row.iter().flatten().copied().collect::<Vec<u8>>(), req);
        }
        prop_assert!((0..w).all(|c| profile.column(c).any(|s| s.is_some())));
        let cons = derive_prototype(&profile, 0.8).unwrap();
        prop_assert!(cons.symbols.len() <= w);
    }

    #[test]
    fn trace_file_round_trips(items in proptest::collection::vec((proptest::collection::vec(any::<u8>(), 1..12), proptest::option::of(proptest::collection::vec(any::<u8>(), 0..12))), 0..8)) {
        let lib = TraceLibrary::new(items.into_iter().map(|(q, r)| match r {
            Some(r) => Interaction::new(q, r),
            None => Interaction::without_response(q),
        }).collect());
        let mut buf = Vec::new();
        write_trace_file(&lib, &mut buf).unwrap();
        let back = parse_trace_file(buf.as_slice()).unwrap();
        prop_assert_eq!(&back.interactions, &lib.interactions);
        let mut again = Vec::new();
        write_trace_file(&back, &mut again).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn fuzzed_models_round_trip(
        reqs in proptest::collection::vec(message(6), 1..7),
        groups in proptest::collection::vec(0usize..3, 7),
        strategy in prop_oneof![Just(MatchStrategy::Whole), Just(MatchStrategy::Centroid), Just(MatchStrategy::Consensus)],
        protos in proptest::collection::vec(prototype(), 3),
        weight in proptest::num::f64::NORMAL | proptest::num::f64::ZERO,
        f in 0.01..=1.0f64,
    ) {
        let n = reqs.len();
        let lib = TraceLibrary::new(reqs.iter().map(|q| Interaction::new(q.clone(), q.clone())).collect());
        let mut clusters = Vec::new();
        if strategy != MatchStrategy::Whole {
            for (g, proto) in protos.iter().enumerate() {
                let members: Vec<usize> = (0..n).filter(|&i| groups[i] == g).collect();
                if let Some(&centroid) = members.last() {
                    let prototype = (strategy == MatchStrategy::Consensus).then(|| {
                        let mut p = proto.clone();
                        p.weights[0] = weight;
                        p.f_used = f;
                        p.cluster = clusters.len();
                        p
                    });
                    clusters.push(ModelCluster { members, centroid, prototype });
                }
            }
        }
        let model = ServiceModel { strategy, params: ModelParams { f, ..ModelParams::default() }, library: lib, clusters };
        let mut buf = Vec::new();
        save_model(&model, &mut buf).unwrap();
        prop_assert_eq!(load_model(buf.as_slice()).unwrap(), model);
    }

    #[test]
    fn noise_preserves_membership(sizes in proptest::collection::vec(1usize..20, 2..6), ratio in 0.0..0.5f64, seed in any::<u64>()) {
        let mut next = 0;
        let clusters: Vec<Vec<usize>> = sizes.iter().map(|&s| { let c = (next..next + s).collect(); next += s; c }).collect();
        let cs = ClusterSet::new(clusters);
        let noisy = inject_noise(&cs, ratio, seed).unwrap();
        prop_assert!(is_partition(&noisy, next));
        prop_assert_eq!(noisy.clusters.iter().map(Vec::len).collect::<Vec<_>>(), sizes);
        prop_assert_eq!(inject_noise(&cs, ratio, seed).unwrap(), noisy);
    }

    #[test]
    fn folds_partition_the_library(n in 2usize..300, k in 2usize..12, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let folds = fold_assignment(n, k, seed);
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: BTreeSet<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn categorize_is_total_and_consistent(
        expected in proptest::option::of(message(30)),
        generated in proptest::option::of(message(30)),
        request in message(30),
    ) {
        let spec = DirectoryProtocolSpec::default();
        let c = categorize(expected.as_deref(), generated.as_deref(), &request, &spec);
        prop_assert!(Category::ALL.contains(&c));
        prop_assert_eq!(c == Category::Identical, expected == generated);
        let parses = generated.as_deref().and_then(|g| spec.parse_response(g)).is_some();
        if expected != generated && !parses {
            prop_assert_eq!(c, Category::Malformed);
        }
        prop_assert_eq!(categorize(generated.as_deref(), generated.as_deref(), &request, &spec), Category::Identical);
    }

    #[test]
    fn generator_follows_op_weights(seed in any::<u64>()) {
        let cfg = GeneratorConfig::default();
        let lib = generate_library(&cfg, 2000, seed).unwrap();
        let total: f64 = cfg.op_weights.iter().sum();
        for (op, w) in cfg.spec.ops.iter().map(|o| o.0.as_str()).zip(&cfg.op_weights) {
            let seen = lib.interactions.iter()
                .filter(|it| cfg.spec.parse_request(&it.request).is_some_and(|m| m.op == op))
                .count();
            let freq = seen as f64 / lib.len() as f64;
            prop_assert!((freq - w / total).abs() <= 0.05, "op {} at {:.3}, want {:.3}", op, freq, w / total);
        }
        let well_paired = lib.interactions.iter().all(|it| {
            let q = cfg.spec.parse_request(&it.request).unwrap();
            cfg.spec.parse_response(&it.response).is_some_and(|r| Some(r.op.as_str()) == cfg.spec.response_op(&q.op))
        });
        prop_assert!(well_paired);
    }
}
