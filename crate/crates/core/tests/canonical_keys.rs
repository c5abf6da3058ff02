//! Canonical keys against a brute-force isomorphism check over every node
//! permutation (atom-only graphs, so ring sites play no part).

use std::collections::BTreeMap;
use std::sync::Arc;

use mimosa::{canonical_key, graph_isomorphic, BondType, Edge, MolGraph, SubstructureVocab};
use proptest::prelude::*;

fn vocab() -> Arc<SubstructureVocab> {
    Arc::new(SubstructureVocab::atoms(&[("C", 4), ("N", 3), ("O", 2)]).unwrap())
}

type Raw = (Vec<usize>, Vec<(usize, usize, usize)>);

fn build(v: &Arc<SubstructureVocab>, (nodes, edges): &Raw) -> MolGraph {
    let mut seen = BTreeMap::new();
    for &(a, b, t) in edges {
        let n = nodes.len();
        let (a, b) = (a % n, b % n);
        if a != b {
            seen.entry((a.min(b), a.max(b))).or_insert(BondType::ALL[t % 3]);
        }
    }
    let edges = seen.into_iter().map(|((a, b), t)| Edge::new(a, b, t)).collect();
    MolGraph::new(v.clone(), nodes.clone(), edges).unwrap()
}

fn bond_map(g: &MolGraph) -> BTreeMap<(usize, usize), BondType> {
    g.edges().iter().map(|e| ((e.u.min(e.v), e.u.max(e.v)), e.bond)).collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_force_isomorphic(a: &MolGraph, b: &MolGraph) -> bool {
    if a.num_nodes() != b.num_nodes() || a.num_edges() != b.num_edges() {
        return false;
    }
    let (ea, eb) = (bond_map(a), bond_map(b));
    permutations(a.num_nodes()).into_iter().any(|p| {
        (0..a.num_nodes()).all(|v| a.label(v) == b.label(p[v]))
            && ea
                .iter()
                .all(|(&(x, y), t)| eb.get(&(p[x].min(p[y]), p[x].max(p[y]))) == Some(t))
    })
}

fn permuted(g: &MolGraph, p: &[usize]) -> MolGraph {
    let mut nodes = vec![0; g.num_nodes()];
    for v in 0..g.num_nodes() {
        nodes[p[v]] = g.label(v);
    }
    let edges = g.edges().iter().map(|e| Edge::new(p[e.u], p[e.v], e.bond)).collect();
    MolGraph::new(g.vocab().clone(), nodes, edges).unwrap()
}

fn raw_graph(max_nodes: usize) -> impl Strategy<Value = Raw> {
    (1..=max_nodes).prop_flat_map(|n| {
        (
            prop::collection::vec(0..3usize, n),
            prop::collection::vec((0..n, 0..n, 0..3usize), 0..=n + 1),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn key_equality_matches_brute_force(a in raw_graph(5), b in raw_graph(5)) {
        let v = vocab();
        let (ga, gb) = (build(&v, &a), build(&v, &b));
        let brute = brute_force_isomorphic(&ga, &gb);
        prop_assert_eq!(canonical_key(&ga).unwrap() == canonical_key(&gb).unwrap(), brute);
        prop_assert_eq!(graph_isomorphic(&ga, &gb), brute);
    }

    #[test]
    fn key_ignores_node_order(a in raw_graph(6), seed in any::<u64>()) {
        let v = vocab();
        let g = build(&v, &a);
        let perms = permutations(g.num_nodes());
        let p = &perms[(seed % perms.len() as u64) as usize];
        let h = permuted(&g, p);
        prop_assert_eq!(canonical_key(&g).unwrap(), canonical_key(&h).unwrap());
    }
}

#[test]
fn every_labelled_three_node_graph_is_sorted_correctly() {
    // all graphs on 3 labelled nodes over 2 labels and 2 bond types, grouped by key
    let v = vocab();
    let mut graphs = Vec::new();
    for labels in 0..8usize {
        let nodes: Vec<usize> = (0..3).map(|i| (labels >> i) & 1).collect();
        for mask in 0..27usize {
            let mut edges = Vec::new();
            let mut m = mask;
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                match m % 3 {
                    1 => edges.push((a, b, 0)),
                    2 => edges.push((a, b, 1)),
                    _ => {}
                }
                m /= 3;
            }
            graphs.push(build(&v, &(nodes.clone(), edges)));
        }
    }
    let keys: Vec<_> = graphs.iter().map(|g| canonical_key(g).unwrap()).collect();
    for i in 0..graphs.len() {
        for j in i + 1..graphs.len() {
            assert_eq!(keys[i] == keys[j], brute_force_isomorphic(&graphs[i], &graphs[j]), "{i} vs {j}");
        }
    }
}
