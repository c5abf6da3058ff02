//! Rule-labelled random trees for checking that the predictors can learn.
//!
//! Every label is a function of the local topology, so a network with three
//! or more layers can recover it exactly:
//!
//! | degree | rule | labels |
//! |---|---|---|
//! | 1 | degree of the neighbour 1/2/3/4 | Br / F / Cl / O |
//! | 2 | leaf neighbours 0/1/2 | C / O / S |
//! | 3 | leaf neighbours 0/1/2/3 | benzene / N / cyclohexane / cyclopentane |
//! | 4 | | C |
//!
//! Ring nodes attach at sites 0, 2 and 4. All bonds are single.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Edge, MolGraph};
use crate::vocab::{BondType, SubstructureVocab};

/// Random tree on `n` nodes with maximum degree 4: each new node attaches
/// to a uniformly chosen earlier node that still has room.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut deg = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for v in 1..n {
        let open: Vec<usize> = (0..v).filter(|&u| deg[u] < 4).collect();
        let u = open[rng.random_range(0..open.len())];
        deg[u] += 1;
        deg[v] += 1;
        edges.push((u, v));
    }
    edges
}

fn id(vocab: &SubstructureVocab, label: &str) -> usize {
    vocab
        .lookup(label)
        .unwrap_or_else(|| panic!("vocabulary lacks {label}"))
}

/// Labels a tree by the table in the module docs. `vocab` must contain
/// every label used there (the desk vocabulary does).
pub fn label_tree(vocab: &Arc<SubstructureVocab>, n: usize, tree: &[(usize, usize)]) -> MolGraph {
    let mut nbrs = vec![Vec::new(); n];
    for &(a, b) in tree {
        nbrs[a].push(b);
        nbrs[b].push(a);
    }
    let deg: Vec<usize> = nbrs.iter().map(Vec::len).collect();
    let leaves = |v: usize| nbrs[v].iter().filter(|&&u| deg[u] == 1).count();
    let labels: Vec<usize> = (0..n)
        .map(|v| {
            let name = match deg[v] {
                0 => "C",
                1 => ["Br", "F", "Cl", "O"][deg[nbrs[v][0]] - 1],
                2 => ["C", "O", "S"][leaves(v)],
                3 => ["c1ccccc1", "N", "C1CCCCC1", "C1CCCC1"][leaves(v)],
                _ => "C",
            };
            id(vocab, name)
        })
        .collect();
    let mut used = vec![0u8; n];
    let mut site = |v: usize| -> Option<u8> {
        if vocab.entry(labels[v]).is_ring() {
            let s = used[v] * 2;
            used[v] += 1;
            Some(s)
        } else {
            None
        }
    };
    let edges = tree
        .iter()
        .map(|&(a, b)| {
            let (sa, sb) = (site(a), site(b));
            Edge::new(a, b, BondType::Single).with_sites(sa, sb)
        })
        .collect();
    MolGraph::new(vocab.clone(), labels, edges).expect("synthetic tree is well formed")
}

/// `count` labelled trees with sizes uniform in `min_nodes..=max_nodes`.
pub fn synthetic_corpus(
    vocab: &Arc<SubstructureVocab>,
    count: usize,
    min_nodes: usize,
    max_nodes: usize,
    seed: u64,
) -> Vec<MolGraph> {
    assert!(1 <= min_nodes && min_nodes <= max_nodes, "bad size range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(min_nodes..=max_nodes);
            let tree = random_tree(n, &mut rng);
            label_tree(vocab, n, &tree)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::check_validity;

    #[test]
    fn every_tree_is_valid() {
        let v = SubstructureVocab::desk();
        for g in synthetic_corpus(&v, 300, 1, 14, 7) {
            assert!(check_validity(&g).valid, "{:?}", g);
            assert!(g.is_connected());
            assert!((0..g.num_nodes()).all(|x| g.degree(x) <= 4));
        }
    }

    #[test]
    fn rules_by_hand() {
        let v = SubstructureVocab::desk();
        // star: centre degree 4 with four leaves
        let g = label_tree(&v, 5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let names: Vec<&str> = (0..5).map(|i| g.label_text(i)).collect();
        assert_eq!(names, ["C", "O", "O", "O", "O"]);
        // path of three: middle has two leaves
        let g = label_tree(&v, 3, &[(0, 1), (1, 2)]);
        let names: Vec<&str> = (0..3).map(|i| g.label_text(i)).collect();
        assert_eq!(names, ["F", "S", "F"]);
        // claw: centre degree 3 with three leaves
        let g = label_tree(&v, 4, &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(g.label_text(0), "C1CCCC1");
        assert_eq!(g.label_text(1), "Cl");
    }

    #[test]
    fn deterministic_for_a_seed() {
        let v = SubstructureVocab::desk();
        assert_eq!(synthetic_corpus(&v, 20, 2, 8, 3), synthetic_corpus(&v, 20, 2, 8, 3));
    }
}
