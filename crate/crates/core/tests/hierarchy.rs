use hswlm::{parse_hierarchy, Hierarchy, NodeId};
use proptest::prelude::*;

/// Random tree as a parent index per node; node 0 is the root and every
/// other node points at an earlier one.
fn arb_tree() -> impl Strategy<Value = Vec<usize>> {
    (1usize..40).prop_flat_map(|n| {
        (1..n)
            .map(|i| (0..i).boxed())
            .collect::<Vec<_>>()
            .prop_map(|parents| {
                let mut all = vec![0];
                all.extend(parents);
                all
            })
    })
}

fn build(parents: &[usize]) -> Hierarchy {
    let links = parents
        .iter()
        .enumerate()
        .map(|(i, &p)| (format!("n{i}"), (i > 0).then(|| format!("n{p}"))));
    Hierarchy::from_links(links.collect::<Vec<_>>()).unwrap()
}

fn to_tsv(parents: &[usize]) -> String {
    parents
        .iter()
        .enumerate()
        .map(|(i, &p)| if i == 0 { "n0\n".to_string() } else { format!("n{i}\tn{p}\n") })
        .collect()
}

/// Depth by walking parent pointers in the raw array.
fn oracle_depth(parents: &[usize], mut i: usize) -> usize {
    let mut d = 0;
    while i != 0 {
        i = parents[i];
        d += 1;
    }
    d
}

proptest! {
    #[test]
    fn formats_agree(parents in arb_tree()) {
        let h = build(&parents);
        let from_tsv = parse_hierarchy(&to_tsv(&parents)).unwrap();
        let from_json = parse_hierarchy(&h.to_json().to_string()).unwrap();
        prop_assert_eq!(&from_tsv, &h);
        prop_assert_eq!(&from_json, &h);
    }

    #[test]
    fn depths_match_parent_walk(parents in arb_tree()) {
        let h = build(&parents);
        for (i, _) in parents.iter().enumerate() {
            let node = h.get(&format!("n{i}")).unwrap();
            prop_assert_eq!(h.depth(node), oracle_depth(&parents, i));
        }
        let order: Vec<usize> = h.bfs().map(|n| h.depth(n)).collect();
        prop_assert!(order.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn descendants_and_ancestors_invert(parents in arb_tree()) {
        let h = build(&parents);
        for e in h.bfs() {
            for l in 1..=h.height(e) {
                let desc = h.descendants_at(e, l).unwrap();
                prop_assert!(!desc.is_empty());
                for d in desc {
                    prop_assert_eq!(h.ancestor_at(d, l).unwrap(), e);
                }
            }
        }
    }

    #[test]
    fn depth_plus_height_bounded_by_root_height(parents in arb_tree()) {
        let h = build(&parents);
        let total = h.height(h.root());
        prop_assert!(h.bfs().all(|n| h.depth(n) + h.height(n) <= total));
        prop_assert!(h.leaves().any(|l| h.depth(l) == total));
    }

    #[test]
    fn leaves_under_root_are_all_leaves(parents in arb_tree()) {
        let h = build(&parents);
        let mut under = h.leaves_under(h.root());
        under.sort();
        let mut all: Vec<NodeId> = h.leaves().collect();
        all.sort();
        prop_assert_eq!(under, all);
    }
}
