mod common;

use proptest::prelude::*;
use telegraphnet::network::{EdgeDescriptor, NetworkTopology};

use common::{random_tree, tree};

fn shuffled_and_flipped() -> impl Strategy<Value = (Vec<EdgeDescriptor>, Vec<EdgeDescriptor>)> {
    random_tree(9).prop_flat_map(|edges| {
        let n = edges.len();
        (
            Just(edges.clone()),
            Just(edges).prop_shuffle(),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(orig, mut perm, flips)| {
                for (e, f) in perm.iter_mut().zip(flips) {
                    if f {
                        std::mem::swap(&mut e.tail, &mut e.head);
                    }
                }
                (orig, perm)
            })
    })
}

proptest! {
    #[test]
    fn edge_order_and_orientation_do_not_matter((orig, perm) in shuffled_and_flipped()) {
        let a = tree(&orig);
        let b = tree(&perm);
        prop_assert_eq!(a.coordinates(), b.coordinates());
        prop_assert_eq!(a.edges(), b.edges());
        for v in 0..a.vertex_count() {
            prop_assert_eq!(a.initial_set(v), b.initial_set(v));
            prop_assert_eq!(a.terminal_set(v), b.terminal_set(v));
        }
        prop_assert_eq!(a.boundary_vertices(), b.boundary_vertices());
        prop_assert_eq!(a.interior_vertices(), b.interior_vertices());
    }

    #[test]
    fn coordinates_follow_edge_lengths(edges in random_tree(12)) {
        let net = tree(&edges);
        for e in net.edges() {
            // One rounding unit of the accumulated coordinate.
            let ulp = f64::EPSILON * e.x_terminal;
            prop_assert!((e.x_terminal - e.x_initial - e.length).abs() <= ulp);
            prop_assert_eq!(net.coordinate(e.initial), Some(e.x_initial));
            prop_assert_eq!(net.coordinate(e.terminal), Some(e.x_terminal));
        }
        // Walking up the parent chain from any vertex reaches the root and
        // accumulates its coordinate.
        for v in 0..net.vertex_count() {
            let (mut at, mut sum) = (v, 0.0);
            while let Some(k) = net.parent_edge(at) {
                let e = net.edges()[k];
                sum += e.length;
                at = e.initial;
            }
            prop_assert_eq!(at, net.root());
            let x = net.coordinate(v).unwrap();
            prop_assert!((x - sum).abs() <= 4.0 * f64::EPSILON * x.max(1.0));
        }
    }

    #[test]
    fn index_conditions_hold(edges in random_tree(12)) {
        let net = tree(&edges);
        prop_assert_eq!(net.verify_index_conditions(), Ok(()));
        let leaves = net.leaf_terminals();
        prop_assert_eq!(leaves.len() + 1, net.boundary_vertices().len());
        let out_degrees: usize = (0..net.vertex_count()).map(|v| net.initial_set(v).len()).sum();
        prop_assert_eq!(out_degrees, net.edge_count());
        prop_assert!((net.total_length() - edges.iter().map(|e| e.length).sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn file_round_trip_preserves_tree(edges in random_tree(8)) {
        let net = tree(&edges);
        let text = net.to_file().to_toml();
        let back = NetworkTopology::from_file(&telegraphnet::network::NetworkFile::parse(&text).unwrap()).unwrap();
        prop_assert_eq!(net.edges(), back.edges());
        prop_assert_eq!(net.coordinates(), back.coordinates());
    }
}

#[test]
fn non_trees_are_rejected() {
    let cycle = [
        EdgeDescriptor::new(1, 0, 1, 1.0),
        EdgeDescriptor::new(2, 1, 2, 1.0),
        EdgeDescriptor::new(3, 2, 1, 1.0),
    ];
    assert!(NetworkTopology::build(&cycle, 0).is_err());
    let branching_root = [EdgeDescriptor::new(1, 0, 1, 1.0), EdgeDescriptor::new(2, 0, 2, 1.0)];
    assert!(NetworkTopology::build(&branching_root, 0).is_err());
    let zero = [EdgeDescriptor::new(1, 0, 1, 0.0)];
    assert!(NetworkTopology::build(&zero, 0).is_err());
}
