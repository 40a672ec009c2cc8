//! Cross-module properties: round-trips, identities between the series,
//! automaton and brute-force views, and pipeline determinism.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treekernel::datagen::{generate_corpus_pair, GenSpec};
use treekernel::parallel::{parallel_build_rwta, parallel_intersect, PipelineConfig};
use treekernel::rwta::{brute_force_kernel, build_rwta, intersect, kernel, kernel_of};
use treekernel::series::{language_series, prefix_set, subtree_series};
use treekernel::tree::{write_tree_file, Symbol, Tree};

fn sym(name: &str, arity: usize) -> Symbol {
    Symbol::new(name, arity).unwrap()
}

fn node(name: &str, children: Vec<Tree>) -> Tree {
    Tree::new(sym(name, children.len()), children).unwrap()
}

/// Random trees over the fixed alphabet {a/0, b/0, c/0, g/1, h/1, f/2}.
fn arb_tree() -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![
        Just(node("a", vec![])),
        Just(node("b", vec![])),
        Just(node("c", vec![])),
    ];
    leaf.prop_recursive(6, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|c| node("g", vec![c])),
            inner.clone().prop_map(|c| node("h", vec![c])),
            (inner.clone(), inner).prop_map(|(l, r)| node("f", vec![l, r])),
        ]
    })
}

proptest! {
    #[test]
    fn parse_print_roundtrip(t in arb_tree()) {
        let text = t.canonical().into_string();
        let back = Tree::parse(&text).unwrap();
        prop_assert_eq!(&back, &t);
        let reprinted = back.canonical();
        prop_assert_eq!(reprinted.as_str(), text.as_str());
    }

    #[test]
    fn canonical_text_is_a_sound_key(t1 in arb_tree(), t2 in arb_tree()) {
        let same_tree = t1 == t2;
        let same_text = t1.canonical() == t2.canonical();
        prop_assert_eq!(same_tree, same_text);
    }

    #[test]
    fn node_count_recurrence(t in arb_tree()) {
        let children_total: usize = t.children().iter().map(|c| c.node_count()).sum();
        prop_assert_eq!(t.node_count(), 1 + children_total);
    }

    #[test]
    fn series_mass_is_node_count(t in arb_tree()) {
        let series = subtree_series(&t).unwrap();
        prop_assert_eq!(series.total().unwrap(), t.node_count() as u64);
    }

    #[test]
    fn automaton_realizes_the_series(ts in prop::collection::vec(arb_tree(), 1..8), probe in arb_tree()) {
        let series = language_series(&ts).unwrap();
        let automaton = build_rwta(&ts).unwrap();
        // weight of any tree = its coefficient in the language series
        let text = probe.canonical();
        prop_assert_eq!(
            automaton.tree_weight(&probe).unwrap(),
            series.coefficient(text.as_str())
        );
        // subtree automata are deterministic: at most one reached state
        prop_assert!(automaton.eval_delta(&probe).len() <= 1);
    }

    #[test]
    fn prefix_count_matches_the_product_rule(t in arb_tree()) {
        // only small trees: the prefix set is multiplicative in size
        prop_assume!(t.node_count() <= 14);
        fn expected(t: &treekernel::tree::SubtreeRef<'_>) -> u128 {
            if t.root().arity() == 0 {
                1
            } else {
                t.children().iter().map(|c| expected(c) + 1).product()
            }
        }
        let want = expected(&t.as_ref());
        prop_assume!(want <= 4096);
        let prefixes = prefix_set(&t);
        prop_assert_eq!(prefixes.len() as u128, want);
        // every member is a genuine prefix and never the bare placeholder
        for p in &prefixes {
            prop_assert!(!p.is_bottom());
            prop_assert!(is_prefix_of(p, &t.as_ref()));
        }
    }
}

/// Independent prefix check: equal roots, children pairwise `⊥` or
/// prefixes again.
fn is_prefix_of(p: &treekernel::tree::BottomTree, t: &treekernel::tree::SubtreeRef<'_>) -> bool {
    if p.is_bottom() {
        return false;
    }
    if p.root().name() != t.root().name() || p.root().arity() != t.root().arity() {
        return false;
    }
    p.children()
        .iter()
        .zip(t.children())
        .all(|(pc, tc)| pc.is_bottom() || is_prefix_of(pc, &tc))
}

/// Literal quadratic reference: compare every node pair directly.
fn quadratic_kernel(xs: &[Tree], ys: &[Tree]) -> u64 {
    let collect = |trees: &[Tree]| -> Vec<String> {
        trees
            .iter()
            .flat_map(|t| t.subtrees().map(|s| s.canonical().into_string()))
            .collect()
    };
    let nx = collect(xs);
    let ny = collect(ys);
    let mut total = 0u64;
    for x in &nx {
        for y in &ny {
            if x == y {
                total += 1;
            }
        }
    }
    total
}

fn small_corpus(seed: u64) -> (Vec<Tree>, Vec<Tree>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = GenSpec {
        n_trees: rng.random_range(1..=50),
        alphabet_size: (2, 6),
        arity_range: (1, 3),
        depth_range: (1, 8),
        seed: rng.random(),
    };
    let (_, xs, ys) = generate_corpus_pair(&spec, None).unwrap();
    (xs, ys)
}

#[test]
fn automaton_kernel_agrees_with_both_reference_routes() {
    for seed in 0..200u64 {
        let (xs, ys) = small_corpus(seed);
        let via_automaton = kernel_of(&xs, &ys).unwrap().0;
        let via_merge = brute_force_kernel(&xs, &ys).unwrap().0;
        assert_eq!(via_automaton, via_merge, "seed {seed}");
        if xs.iter().map(Tree::node_count).sum::<usize>() <= 400
            && ys.iter().map(Tree::node_count).sum::<usize>() <= 400
        {
            assert_eq!(via_merge, quadratic_kernel(&xs, &ys), "seed {seed}");
        }
    }
}

#[test]
fn kernel_is_symmetric_on_random_corpora() {
    for seed in 300..340u64 {
        let (xs, ys) = small_corpus(seed);
        assert_eq!(
            kernel_of(&xs, &ys).unwrap(),
            kernel_of(&ys, &xs).unwrap(),
            "seed {seed}"
        );
    }
}

#[test]
fn self_kernel_is_at_least_the_node_count() {
    for seed in 400..430u64 {
        let (xs, _) = small_corpus(seed);
        let nodes: u64 = xs.iter().map(|t| t.node_count() as u64).sum();
        assert!(kernel_of(&xs, &xs).unwrap().0 >= nodes, "seed {seed}");
    }
}

/// The worked small corpus pair used by the pipeline grid tests.
fn d_small() -> (String, String) {
    let spec = GenSpec {
        n_trees: 60,
        alphabet_size: (2, 6),
        arity_range: (1, 3),
        depth_range: (2, 8),
        seed: 42,
    };
    let (_, xs, ys) = generate_corpus_pair(&spec, None).unwrap();
    (write_tree_file(&xs), write_tree_file(&ys))
}

#[test]
fn pipeline_outputs_are_identical_across_the_config_grid() {
    let (x_text, y_text) = d_small();
    let xs = treekernel::tree::parse_tree_file(&x_text).unwrap();
    let ys = treekernel::tree::parse_tree_file(&y_text).unwrap();
    let seq_x = build_rwta(&xs).unwrap();
    let seq_y = build_rwta(&ys).unwrap();
    let seq_xy = intersect(&seq_x, &seq_y).unwrap();
    let want_build = seq_x.to_file_string().unwrap();
    let want_inter = seq_xy.to_file_string().unwrap();
    for workers in [1, 2, 4] {
        for partitions in [1, 3, 16] {
            for chunk in [1, 64, 4096] {
                let config = PipelineConfig::new(workers, partitions, chunk);
                let (px, _) = parallel_build_rwta(&x_text, &config).unwrap();
                let (py, _) = parallel_build_rwta(&y_text, &config).unwrap();
                let (pxy, _) = parallel_intersect(&px, &py, &config).unwrap();
                assert_eq!(
                    px.to_file_string().unwrap(),
                    want_build,
                    "build under {config:?}"
                );
                assert_eq!(
                    pxy.to_file_string().unwrap(),
                    want_inter,
                    "intersect under {config:?}"
                );
                assert_eq!(kernel(&pxy).unwrap(), kernel(&seq_xy).unwrap());
            }
        }
    }
}

#[test]
fn pipeline_is_insensitive_to_input_permutation() {
    // reversing the lines permutes every reducer's value list
    let (x_text, _) = d_small();
    let reversed: String = x_text
        .lines()
        .rev()
        .map(|l| format!("{l}\n"))
        .collect();
    let config = PipelineConfig::new(4, 8, 2);
    let (a, _) = parallel_build_rwta(&x_text, &config).unwrap();
    let (b, _) = parallel_build_rwta(&reversed, &config).unwrap();
    assert_eq!(
        a.to_file_string().unwrap(),
        b.to_file_string().unwrap()
    );
}

#[test]
fn parallel_kernel_equals_sequential_kernel_on_d_small() {
    let (x_text, y_text) = d_small();
    let xs = treekernel::tree::parse_tree_file(&x_text).unwrap();
    let ys = treekernel::tree::parse_tree_file(&y_text).unwrap();
    let seq = kernel_of(&xs, &ys).unwrap();
    let config = PipelineConfig::new(4, 16, 8);
    let (par, stats) = treekernel::parallel::parallel_kernel(&x_text, &y_text, &config).unwrap();
    assert_eq!(par, seq);
    // construction shuffles one record per node occurrence, twice (X and Y),
    // plus one per automaton state in the intersection job
    let nodes: usize = xs.iter().chain(&ys).map(Tree::node_count).sum();
    assert!(stats.records_shuffled > nodes);
}
