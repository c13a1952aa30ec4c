mod common;

use common::*;
use lfsgg_core::retrieval::{rank, rank_pruned, Gallery};
use lfsgg_core::synth::{adversarial_tie_case, generate, AdversarialConfig, SynthConfig};
use lfsgg_core::{exhaustive_match, first_order_match, hts_match, MatchConfig};
use proptest::prelude::*;

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        n_images: 30,
        nodes_per_image: (3, 8),
        max_instances_per_class: 3,
        quintuples_per_image: (4, 12),
        ..SynthConfig::default()
    }
}

#[test]
fn clean_corpus_is_fully_recovered() {
    for p in generate(&small(4)).unwrap() {
        assert_eq!(exhaustive_match(&p.gt, &p.pred).unwrap().recall, 1.0, "{}", p.gt.image_id);
        assert_eq!(p.planted.recall, 1.0);
        // The planted permutation is one of the optimal mappings.
        assert_eq!(matched_under(&p.gt, &p.pred, &p.planted.pairs, false), p.gt.len());
    }
}

#[test]
fn oracle_never_falls_below_planted_mapping() {
    let cfg = SynthConfig {
        edge_drop: 0.3,
        edge_add: 0.2,
        label_noise: 0.1,
        ..small(8)
    };
    for p in generate(&cfg).unwrap() {
        let exact = exhaustive_match(&p.gt, &p.pred).unwrap();
        assert!(exact.matched >= p.planted.matched);
        assert_eq!(p.planted.matched, matched_under(&p.gt, &p.pred, &p.planted.pairs, false));
    }
}

#[test]
fn adversarial_cases_separate_first_order_from_search() {
    for seed in 0..5 {
        let (gt, pred) = adversarial_tie_case(seed, &AdversarialConfig::default()).unwrap();
        let exact = exhaustive_match(&gt, &pred).unwrap();
        assert!(first_order_match(&gt, &pred).recall < exact.recall);
        assert_eq!(hts_match(&gt, &pred, &MatchConfig::with_branching_factor(2)).unwrap().recall, exact.recall);
        assert_eq!(brute_force(&gt, &pred, false).0, exact.matched);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn pruned_ranking_equals_full_ranking(
        graphs in prop::collection::vec(small_graph(3, 2, 3, 6), 1..80),
        q in 0usize..80,
        top_n in 1usize..6,
    ) {
        let graphs: Vec<_> = graphs
            .into_iter()
            .enumerate()
            .map(|(i, g)| lfsgg_core::SceneGraph::new(format!("g{i:03}"), g.quintuples))
            .collect();
        let query = graphs[q % graphs.len()].clone();
        let gallery = Gallery::from_graphs(graphs).unwrap();
        let cfg = MatchConfig::default();
        prop_assert_eq!(rank_pruned(&query, &gallery, &cfg, top_n).unwrap(), rank(&query, &gallery, &cfg, top_n).unwrap());
    }
}
