//! Reference evaluation for tests: a plain recursive counter that shares no
//! code with [`super::satisfies`], exhaustive truth tables over the leaf
//! universe, and a random policy generator.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{AttributeName, AttributeSet, PolicyNode, PolicyTree};

/// Counts satisfied children at each gate.
pub fn evaluate(node: &PolicyNode, attrs: &AttributeSet) -> bool {
    match node {
        PolicyNode::Leaf(a) => attrs.iter().any(|x| x == a),
        PolicyNode::Gate { threshold, children } => {
            let mut count = 0;
            for c in children {
                if evaluate(c, attrs) {
                    count += 1;
                }
            }
            count >= *threshold
        }
    }
}

/// Every subset of the tree's vocabulary paired with its truth value.
/// Subsets are enumerated by bitmask over the sorted vocabulary.
pub fn truth_table(tree: &PolicyTree) -> Vec<(AttributeSet, bool)> {
    let universe: Vec<AttributeName> = tree.vocabulary().into_iter().collect();
    assert!(universe.len() <= 16, "truth table over {} attributes is too large", universe.len());
    (0u32..1 << universe.len())
        .map(|mask| {
            let subset: AttributeSet =
                universe.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, a)| a.clone()).collect();
            let value = evaluate(tree.root(), &subset);
            (subset, value)
        })
        .collect()
}

/// Random subset of `universe`, each element kept with probability `p`.
pub fn random_subset<R: Rng + ?Sized>(rng: &mut R, universe: &[AttributeName], p: f64) -> AttributeSet {
    universe.iter().filter(|_| rng.gen_bool(p)).cloned().collect()
}

/// Random valid tree with at most `max_leaves` leaves and at most
/// `max_depth` gate levels, drawing leaf attributes from `universe`
/// (repeats allowed).
pub fn random_tree<R: Rng + ?Sized>(
    rng: &mut R,
    universe: &[AttributeName],
    max_leaves: usize,
    max_depth: usize,
) -> PolicyTree {
    assert!(!universe.is_empty() && max_leaves >= 1);
    let budget = rng.gen_range(1..=max_leaves);
    let root = random_node(rng, universe, budget, max_depth);
    PolicyTree::from_root(root).expect("generator emits valid trees")
}

fn random_node<R: Rng + ?Sized>(
    rng: &mut R,
    universe: &[AttributeName],
    budget: usize,
    depth_left: usize,
) -> PolicyNode {
    let make_leaf = budget == 1 && rng.gen_bool(0.5) || depth_left == 0;
    if make_leaf {
        return PolicyNode::Leaf(universe.choose(rng).expect("non-empty").clone());
    }
    // Split the leaf budget over 1..=min(budget, 5) children.
    let n = rng.gen_range(1..=budget.min(5));
    let mut shares = vec![1usize; n];
    for _ in 0..budget - n {
        shares[rng.gen_range(0..n)] += 1;
    }
    let children: Vec<PolicyNode> = shares.into_iter().map(|b| random_node(rng, universe, b, depth_left - 1)).collect();
    let threshold = rng.gen_range(1..=children.len());
    PolicyNode::Gate { threshold, children }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn universe(n: usize) -> Vec<AttributeName> {
        (0..n).map(|i| AttributeName::new(&format!("attr{i}")).unwrap()).collect()
    }

    #[test]
    fn truth_table_of_and_gate() {
        let t = parse_policy("a b 2of2").unwrap();
        let table = truth_table(&t);
        assert_eq!(table.len(), 4);
        assert_eq!(table.iter().filter(|(_, v)| *v).count(), 1);
    }

    #[test]
    fn satisfies_matches_truth_table_on_four_attributes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = universe(4);
        for _ in 0..300 {
            let t = random_tree(&mut rng, &u, 8, 3);
            for (subset, expected) in truth_table(&t) {
                assert_eq!(satisfies(&t, &subset).is_satisfied(), expected, "{t} with {subset:?}");
            }
        }
    }

    #[test]
    fn generator_respects_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = universe(6);
        for _ in 0..500 {
            let t = random_tree(&mut rng, &u, 16, 3);
            assert!(t.leaf_count() >= 1 && t.leaf_count() <= 16);
            assert!(t.depth() <= 3);
        }
    }

    fn tree_strategy() -> impl Strategy<Value = PolicyTree> {
        let leaf = (0usize..6).prop_map(|i| PolicyNode::Leaf(AttributeName::new(&format!("x{i}")).unwrap()));
        let node = leaf.prop_recursive(3, 8, 4, |inner| {
            proptest::collection::vec(inner, 1..4).prop_flat_map(|children| {
                let n = children.len();
                (Just(children), 1..=n).prop_map(|(children, threshold)| PolicyNode::Gate { threshold, children })
            })
        });
        node.prop_map(|n| PolicyTree::from_root(n).unwrap())
    }

    fn attr_subset() -> impl Strategy<Value = AttributeSet> {
        proptest::collection::btree_set((0usize..6).prop_map(|i| AttributeName::new(&format!("x{i}")).unwrap()), 0..6)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn parse_format_round_trip(t in tree_strategy()) {
            let text = format_policy(&t);
            let back = parse_policy(&text).unwrap();
            prop_assert_eq!(back.root(), t.root());
            prop_assert_eq!(format_policy(&back), text);
        }
    }

    proptest! {
        #[test]
        fn oracle_equivalence(t in tree_strategy()) {
            for (subset, expected) in truth_table(&t) {
                prop_assert_eq!(satisfies(&t, &subset).is_satisfied(), expected);
            }
        }

        #[test]
        fn monotone(t in tree_strategy(), a in attr_subset(), b in attr_subset()) {
            if satisfies(&t, &a).is_satisfied() {
                let union: AttributeSet = a.union(&b).cloned().collect();
                prop_assert!(satisfies(&t, &union).is_satisfied());
            }
        }

        #[test]
        fn selections_are_valid(t in tree_strategy(), a in attr_subset()) {
            if let Some(sel) = satisfies(&t, &a).selection {
                check_selection(t.root(), &sel, &a, &t);
            }
        }

        #[test]
        fn normalization_idempotent(s in "[A-Za-z0-9_:.-]{1,16}") {
            if let Ok(a) = AttributeName::new(&s) {
                prop_assert_eq!(AttributeName::new(a.as_str()).unwrap(), a);
            }
        }
    }

    // Leaf numbering of the selection must line up with PolicyTree::leaves.
    fn check_selection(node: &PolicyNode, sel: &Selection, attrs: &AttributeSet, tree: &PolicyTree) {
        let leaves = tree.leaves();
        match (node, sel) {
            (PolicyNode::Leaf(a), Selection::Leaf { leaf_index }) => {
                assert_eq!(leaves[*leaf_index], a);
                assert!(attrs.contains(a));
            }
            (PolicyNode::Gate { threshold, children }, Selection::Gate { children: chosen }) => {
                assert_eq!(chosen.len(), *threshold);
                assert!(chosen.windows(2).all(|w| w[0].0 < w[1].0));
                for (i, s) in chosen {
                    assert!(evaluate(&children[*i], attrs));
                    check_selection(&children[*i], s, attrs, tree);
                }
                // lowest-index first: every satisfied child before the last
                // chosen index must itself be chosen
                let last = chosen.last().unwrap().0;
                for (i, c) in children.iter().enumerate().take(last) {
                    if evaluate(c, attrs) {
                        assert!(chosen.iter().any(|(j, _)| *j == i));
                    }
                }
            }
            _ => panic!("selection shape does not match tree"),
        }
    }
}
