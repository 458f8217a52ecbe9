use std::collections::BTreeSet;

use larstream::decomposition::{Decomposition, DecompositionError, NodeId};
use larstream::lars_lang::{ground, parse, GroundOptions, GroundProgram};
use larstream::scenarios::{gen_caching, gen_nqueens};
use larstream::Predicate;

fn decompose(text: &str) -> (GroundProgram, Result<Decomposition, DecompositionError>) {
    let g = ground(&parse(text).unwrap(), GroundOptions::default()).unwrap();
    let d = Decomposition::new(&g);
    (g, d)
}

fn preds(names: &[(&str, usize)]) -> BTreeSet<Predicate> {
    names.iter().map(|(n, a)| Predicate::new(n, *a)).collect()
}

/// Component holding the rule whose head is `pred`.
fn owner(g: &GroundProgram, d: &Decomposition, pred: &str) -> NodeId {
    let i = d
        .graph
        .components
        .iter()
        .position(|c| c.rules.iter().any(|r| g.templates[*r].head.as_ref().is_some_and(|h| &*h.atom().predicate().name == pred)))
        .unwrap_or_else(|| panic!("no component derives {pred}"));
    NodeId::Comp(i)
}

#[test]
fn caching_splits_at_box_windows() {
    let (g, d) = decompose(&gen_caching(18));
    let d = d.unwrap();
    assert_eq!(d.graph.components.len(), 2);
    let (lower, upper) = (owner(&g, &d, "high"), owner(&g, &d, "lfu"));
    assert_ne!(lower, upper);
    assert_eq!(owner(&g, &d, "mid"), lower);
    assert_eq!(owner(&g, &d, "random"), upper);
    let expected: BTreeSet<(NodeId, NodeId)> =
        [(NodeId::Master, lower), (lower, upper), (upper, NodeId::Master)].into();
    assert_eq!(d.graph.edges, expected);
    assert!(d.labels.listening(lower, upper).is_superset(&preds(&[("high", 0), ("mid", 0), ("low", 0)])));
    assert!(d.labels.listening(NodeId::Master, lower).contains(&Predicate::new("alpha", 1)));
    assert!(d.labels.listening(upper, NodeId::Master).contains(&Predicate::new("random", 0)));
}

#[test]
fn chained_queens_form_a_chain() {
    for stages in 1..=4 {
        let (g, d) = decompose(&gen_nqueens(6, stages));
        let d = d.unwrap();
        assert_eq!(d.graph.components.len(), stages);
        let comps: Vec<NodeId> = (1..=stages).map(|i| owner(&g, &d, &format!("send{i}"))).collect();
        for (i, c) in comps.iter().enumerate() {
            assert_eq!(owner(&g, &d, &format!("q{}", i + 1)), *c);
            assert_eq!(owner(&g, &d, &format!("placed{}", i + 1)), *c);
        }
        for (i, w) in comps.windows(2).enumerate() {
            assert!(d.graph.edges.contains(&(w[0], w[1])));
            assert!(d.labels.listening(w[0], w[1]).contains(&Predicate::new(&format!("send{}", i + 1), 1)));
        }
        // Only the first stage hears from the master; every stage reports back.
        let from_master: Vec<NodeId> = d.graph.successors(NodeId::Master).collect();
        assert_eq!(from_master, vec![comps[0]]);
        let non_master: usize = d.graph.edges.iter().filter(|(a, b)| *a != NodeId::Master && *b != NodeId::Master).count();
        assert_eq!(non_master, stages - 1);
    }
}

#[test]
fn window_cycle_is_not_stratified() {
    let (_, d) = decompose("a :- b in [2].\nb :- a in [2].\n");
    assert!(matches!(d, Err(DecompositionError::NotStratified(_))));
}

#[test]
fn plain_cycle_stays_in_one_component() {
    let (_, d) = decompose("#ext c/0.\na :- c in [3], not b.\nb :- not a.\n");
    assert_eq!(d.unwrap().graph.components.len(), 1);
}
