//! The exact transition matrix against one rebuilt here from plain graph
//! edits: uniform stand-in models, atom-only vocabulary, single bonds.
//!
//! Per operation the proposal picks a node (replace, add) or a leaf
//! (delete) uniformly, a label uniformly, and for add first flips a fair
//! coin. Moves that fail validity, the node cap, or the coin leave the
//! state where it is.

use std::collections::BTreeMap;
use std::sync::Arc;

use mimosa::chem::is_valid;
use mimosa::oracle::{
    build_transition_matrix, detailed_balance_violation, enumerate_states, exact_distribution, exact_report,
    stationary_distribution, StateSpace,
};
use mimosa::properties::{NodeCount, TargetDistConfig};
use mimosa::proposal::{ProposalConfig, UniformModel};
use mimosa::sampler::{KernelConfig, WeightConvention};
use mimosa::{canonical_key, BondType, CanonicalKey, MolGraph, SubstructureVocab};

const MAX_NODES: usize = 3;

fn vocab() -> Arc<SubstructureVocab> {
    Arc::new(SubstructureVocab::atoms(&[("C", 4), ("O", 2)]).unwrap())
}

fn relabel(g: &MolGraph, v: usize, label: usize) -> MolGraph {
    let mut nodes = g.nodes().to_vec();
    nodes[v] = label;
    MolGraph::new(g.vocab().clone(), nodes, g.edges().to_vec()).unwrap()
}

/// Probability of reaching each key from `g`, given the operation.
fn moves(g: &MolGraph, op: usize) -> BTreeMap<CanonicalKey, f64> {
    let n = g.num_nodes();
    let c = g.vocab().len();
    let mut out: BTreeMap<CanonicalKey, f64> = BTreeMap::new();
    let mut add = |h: Option<MolGraph>, p: f64| {
        let key = match h {
            Some(h) if is_valid(&h) && h.num_nodes() <= MAX_NODES => canonical_key(&h).unwrap(),
            _ => canonical_key(g).unwrap(),
        };
        *out.entry(key).or_default() += p;
    };
    match op {
        0 => {
            for v in 0..n {
                for l in 0..c {
                    add(Some(relabel(g, v, l)), 1.0 / (n * c) as f64);
                }
            }
        }
        1 => {
            for u in 0..n {
                add(None, 0.5 / n as f64);
                for l in 0..c {
                    add(g.with_leaf(u, l, BondType::Single, None, None).ok(), 0.5 / (n * c) as f64);
                }
            }
        }
        _ => {
            let leaves = g.leaf_nodes();
            if n < 2 || leaves.is_empty() {
                add(None, 1.0);
            } else {
                for &v in &leaves {
                    add(g.without_leaf(v).ok(), 1.0 / leaves.len() as f64);
                }
            }
        }
    }
    out
}

fn reference_matrix(space: &StateSpace, p: &[f64], gamma: [f64; 3]) -> Vec<Vec<f64>> {
    let s = space.len();
    let tables: Vec<[BTreeMap<CanonicalKey, f64>; 3]> = space
        .states
        .iter()
        .map(|g| [moves(g, 0), moves(g, 1), moves(g, 2)])
        .collect();
    let mut t = vec![vec![0.0; s]; s];
    for i in 0..s {
        for op in 0..3 {
            let rev = [0, 2, 1][op];
            for (key, &q) in &tables[i][op] {
                let j = space.position(key).unwrap();
                if i == j {
                    continue;
                }
                let back = tables[j][rev].get(&space.keys[i]).copied().unwrap_or(0.0);
                let a = (p[j] * back / (p[i] * q)).min(1.0);
                t[i][j] += gamma[op] * q * a;
            }
        }
        t[i][i] = 1.0 - t[i].iter().sum::<f64>();
    }
    t
}

fn setup() -> (StateSpace, TargetDistConfig, UniformModel) {
    let v = vocab();
    let space = enumerate_states(&v, MAX_NODES, &[BondType::Single]).unwrap();
    let target = TargetDistConfig::new(space.states[0].clone(), vec![1.0, 0.5], vec![Arc::new(NodeCount)])
        .unwrap()
        .with_max_nodes(Some(MAX_NODES));
    (space, target, UniformModel::new(v.len()))
}

#[test]
fn kernel_matches_the_reference_construction() {
    let (space, target, model) = setup();
    let p = exact_distribution(&space, &target).unwrap();
    for gamma in [[0.5, 0.25, 0.25], [0.2, 0.4, 0.4], [0.5, 0.4, 0.1]] {
        let kernel = KernelConfig {
            gamma,
            convention: WeightConvention::TextbookMh,
            ..KernelConfig::default()
        };
        let t = build_transition_matrix(&space, &kernel, &target, &model, &ProposalConfig::default()).unwrap();
        let r = reference_matrix(&space, &p, gamma);
        for i in 0..space.len() {
            for j in 0..space.len() {
                assert!(
                    (t.get(i, j) - r[i][j]).abs() < 1e-12,
                    "gamma {gamma:?}: T[{i}][{j}] = {} vs {}",
                    t.get(i, j),
                    r[i][j]
                );
            }
        }
    }
}

#[test]
fn reference_is_reversible_only_with_matched_add_delete() {
    let (space, target, _) = setup();
    let p = exact_distribution(&space, &target).unwrap();
    let balance = |t: &[Vec<f64>]| {
        let mut worst: f64 = 0.0;
        for i in 0..t.len() {
            for j in 0..t.len() {
                worst = worst.max((p[i] * t[i][j] - p[j] * t[j][i]).abs());
            }
        }
        worst
    };
    assert!(balance(&reference_matrix(&space, &p, [0.5, 0.25, 0.25])) < 1e-15);
    assert!(balance(&reference_matrix(&space, &p, [0.5, 0.4, 0.1])) > 1e-6);
}

#[test]
fn printed_weights_are_not_reversible() {
    let (space, target, model) = setup();
    let kernel = KernelConfig {
        convention: WeightConvention::Paper,
        ..KernelConfig::default()
    };
    let (r, t, p) = exact_report(&space, &kernel, &target, &model, &ProposalConfig::default()).unwrap();
    assert!(r.max_row_sum_error < 1e-12);
    assert!(detailed_balance_violation(&t, &p) > 1e-3);
    let pi = stationary_distribution(&t).unwrap();
    assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn single_state_space_is_trivially_stationary() {
    let v = Arc::new(SubstructureVocab::atoms(&[("C", 4)]).unwrap());
    let space = enumerate_states(&v, 1, &[BondType::Single]).unwrap();
    assert_eq!(space.len(), 1);
    let target = TargetDistConfig::new(space.states[0].clone(), vec![1.0, 0.5], vec![Arc::new(NodeCount)])
        .unwrap()
        .with_max_nodes(Some(1));
    let (r, _, _) = exact_report(
        &space,
        &KernelConfig::default(),
        &target,
        &UniformModel::new(1),
        &ProposalConfig::default(),
    )
    .unwrap();
    assert_eq!(r.max_balance_violation, 0.0);
    assert!(r.stationary_linf < 1e-12);
}
