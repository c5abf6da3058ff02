//! Exact checks of the kernel on small, fully enumerable state spaces.
//!
//! The state space is every valid tree over a small vocabulary up to a node
//! limit. Trees are closed under all three edits (relabel, add a leaf,
//! delete a leaf), so every in-support candidate is a member. The transition
//! matrix is built from the same path enumeration the sampler uses.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::{canonical_key_capped, CanonicalKey};
use crate::chem::{has_spare_capacity, is_valid};
use crate::graph::MolGraph;
use crate::properties::{ScoreError, TargetDistConfig};
use crate::proposal::{enumerate_path_details, enumerate_paths, EditOp, ProposalConfig, ProposalError, SubstructureModel};
use crate::sampler::{acceptance_probability, paper_log_weight, textbook_log_weight, KernelConfig, WeightConvention};
use crate::vocab::{BondType, SubstructureVocab};

pub const MAX_STATES: usize = 100_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("state space exceeds {MAX_STATES} states")]
    TooManyStates,
    #[error("candidate {0} is in the support but not in the state space")]
    NotClosed(String),
    #[error("row {row} sums to {sum}")]
    RowSum { row: usize, sum: f64 },
    #[error("power iteration did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("chain visited {0}, which is not in the state space")]
    UnknownState(String),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone)]
pub struct StateSpace {
    pub states: Vec<MolGraph>,
    pub keys: Vec<CanonicalKey>,
    pub index: BTreeMap<CanonicalKey, usize>,
    pub max_nodes: usize,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn position(&self, key: &CanonicalKey) -> Option<usize> {
        self.index.get(key).copied()
    }
}

/// Every valid tree with at most `max_nodes` nodes over `vocab`, grown leaf
/// by leaf from single nodes using the allowed bond types and every ring
/// site. States are ordered by size, then canonical key.
pub fn enumerate_states(
    vocab: &Arc<SubstructureVocab>,
    max_nodes: usize,
    bonds: &[BondType],
) -> Result<StateSpace, OracleError> {
    let cap = max_nodes.max(1);
    let mut found: BTreeMap<(usize, CanonicalKey), MolGraph> = BTreeMap::new();
    let mut frontier: VecDeque<MolGraph> = VecDeque::new();
    let admit = |g: MolGraph, found: &mut BTreeMap<(usize, CanonicalKey), MolGraph>, frontier: &mut VecDeque<MolGraph>| -> Result<(), OracleError> {
        if !is_valid(&g) {
            return Ok(());
        }
        let key = canonical_key_capped(&g, cap).map_err(|e| OracleError::Config(e.to_string()))?;
        let k = (g.num_nodes(), key);
        if !found.contains_key(&k) {
            if found.len() >= MAX_STATES {
                return Err(OracleError::TooManyStates);
            }
            found.insert(k, g.clone());
            frontier.push_back(g);
        }
        Ok(())
    };
    if max_nodes == 0 {
        return Ok(StateSpace {
            states: Vec::new(),
            keys: Vec::new(),
            index: BTreeMap::new(),
            max_nodes,
        });
    }
    for label in 0..vocab.len() {
        let g = MolGraph::single(vocab.clone(), label).map_err(|e| OracleError::Config(e.to_string()))?;
        admit(g, &mut found, &mut frontier)?;
    }
    let sites = |label: usize| -> Vec<Option<u8>> {
        match vocab.entry(label).ring.as_ref() {
            None => vec![None],
            Some(r) => (0..r.size() as u8).map(Some).collect(),
        }
    };
    while let Some(g) = frontier.pop_front() {
        if g.num_nodes() >= max_nodes {
            continue;
        }
        for u in 0..g.num_nodes() {
            if !has_spare_capacity(&g, u) {
                continue;
            }
            for label in 0..vocab.len() {
                for su in sites(g.label(u)) {
                    for sn in sites(label) {
                        for &b in bonds {
                            if let Ok(h) = g.with_leaf(u, label, b, su, sn) {
                                admit(h, &mut found, &mut frontier)?;
                            }
                        }
                    }
                }
            }
        }
    }
    let mut states = Vec::with_capacity(found.len());
    let mut keys = Vec::with_capacity(found.len());
    let mut index = BTreeMap::new();
    for ((_, key), g) in found {
        index.insert(key.clone(), states.len());
        keys.push(key);
        states.push(g);
    }
    Ok(StateSpace {
        states,
        keys,
        index,
        max_nodes,
    })
}

/// Dense row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        TransitionMatrix {
            n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        TransitionMatrix { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `log p` for every state.
pub fn log_densities(space: &StateSpace, target: &TargetDistConfig) -> Result<Vec<f64>, OracleError> {
    space
        .states
        .iter()
        .map(|g| target.log_density(g).map_err(OracleError::from))
        .collect()
}

/// The target normalised over the space.
pub fn exact_distribution(space: &StateSpace, target: &TargetDistConfig) -> Result<Vec<f64>, OracleError> {
    let lp = log_densities(space, target)?;
    let m = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lp.iter().map(|&l| (l - m).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Exact kernel: entry `(i, j)` sums `γ_op · P(path) · min{1, w}` over
/// every operation and proposal path from state `i` to state `j`; the
/// diagonal holds everything that stays.
///
/// Each row is checked independently: the mass that moves plus the mass
/// that stays (failed operations, rejected and self proposals) must be
/// one within 1e-12.
pub fn build_transition_matrix(
    space: &StateSpace,
    kernel: &KernelConfig,
    target: &TargetDistConfig,
    model: &dyn SubstructureModel,
    cfg: &ProposalConfig,
) -> Result<TransitionMatrix, OracleError> {
    kernel.validate().map_err(|e| OracleError::Config(e.to_string()))?;
    let n = space.len();
    let lp = log_densities(space, target)?;
    if let Some(i) = (0..n).find(|&i| !lp[i].is_finite()) {
        return Err(OracleError::Config(format!(
            "state {} lies outside the target support",
            space.keys[i]
        )));
    }
    // marginal q per (state, op, destination)
    let mut marginals: Vec<BTreeMap<(EditOp, usize), f64>> = Vec::with_capacity(n);
    if kernel.convention == WeightConvention::TextbookMh {
        for g in &space.states {
            let mut m = BTreeMap::new();
            for e in enumerate_paths(g, model, target, cfg)? {
                if let Some(j) = space.position(&e.key) {
                    m.insert((e.op, j), e.prob);
                }
            }
            marginals.push(m);
        }
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let details = enumerate_path_details(&space.states[i], model, target, cfg)?;
        let mut op_mass = [0.0f64; 3];
        let mut stay = 0.0;
        let mut moved = 0.0;
        for d in &details {
            let g_op = kernel.op_probability(d.op);
            op_mass[d.op.index()] += d.prob;
            let Some(j) = space.position(&d.key) else {
                if target.in_support(&d.candidate) {
                    return Err(OracleError::NotClosed(d.key.to_string()));
                }
                stay += g_op * d.prob;
                continue;
            };
            if j == i {
                stay += g_op * d.prob;
                continue;
            }
            let lw = match kernel.convention {
                WeightConvention::Paper => paper_log_weight(lp[j] - lp[i], &d.terms),
                WeightConvention::TextbookMh => {
                    let q_fwd = marginals[i].get(&(d.op, j)).copied().unwrap_or(0.0);
                    let q_rev = marginals[j].get(&(d.op.reverse(), i)).copied().unwrap_or(0.0);
                    textbook_log_weight(lp[i], lp[j], q_fwd, q_rev)
                }
            };
            let a = acceptance_probability(lw);
            let t = g_op * d.prob * a;
            data[i * n + j] += t;
            moved += t;
            stay += g_op * d.prob * (1.0 - a);
        }
        for op in EditOp::ALL {
            stay += kernel.op_probability(op) * (1.0 - op_mass[op.index()]);
        }
        let sum = moved + stay;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(OracleError::RowSum { row: i, sum });
        }
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| data[i * n + j]).sum();
        data[i * n + i] = 1.0 - off;
    }
    Ok(TransitionMatrix { n, data })
}

pub const POWER_TOLERANCE: f64 = 1e-12;
pub const POWER_MAX_ITERATIONS: usize = 1_000_000;

/// Left fixed point of `t` by power iteration from the uniform vector,
/// stopping when successive iterates differ by at most 1e-12 in L1.
pub fn stationary_distribution(t: &TransitionMatrix) -> Result<Vec<f64>, OracleError> {
    let n = t.size();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..POWER_MAX_ITERATIONS {
        next.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            let pi_i = pi[i];
            if pi_i == 0.0 {
                continue;
            }
            for (x, &tij) in next.iter_mut().zip(t.row(i)) {
                *x += pi_i * tij;
            }
        }
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= z);
        let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if diff <= POWER_TOLERANCE {
            return Ok(pi);
        }
    }
    Err(OracleError::NoConvergence(POWER_MAX_ITERATIONS))
}

/// `max_{i,j} |p_i T_ij − p_j T_ji|`.
pub fn detailed_balance_violation(t: &TransitionMatrix, p: &[f64]) -> f64 {
    let n = t.size();
    assert_eq!(p.len(), n, "distribution and matrix sizes differ");
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((p[i] * t.get(i, j) - p[j] * t.get(j, i)).abs());
        }
    }
    worst
}

pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `½ Σ |a − b|`.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Visit counts turned into frequencies over the space.
pub fn empirical_distribution(
    space: &StateSpace,
    visits: &BTreeMap<CanonicalKey, u64>,
) -> Result<Vec<f64>, OracleError> {
    let mut f = vec![0.0; space.len()];
    let total: u64 = visits.values().sum();
    for (k, &c) in visits {
        let i = space.position(k).ok_or_else(|| OracleError::UnknownState(k.to_string()))?;
        f[i] = c as f64 / total.max(1) as f64;
    }
    Ok(f)
}

/// TV between a chain's visit frequencies and `p`.
pub fn empirical_vs_exact(
    space: &StateSpace,
    visits: &BTreeMap<CanonicalKey, u64>,
    p: &[f64],
) -> Result<f64, OracleError> {
    Ok(total_variation(&empirical_distribution(space, visits)?, p))
}

/// Length of the longest shortest path over positive off-diagonal entries,
/// or `None` if some state cannot reach another.
pub fn reachability_diameter(t: &TransitionMatrix) -> Option<usize> {
    let n = t.size();
    let mut worst = 0;
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if j != i && t.get(i, j) > 0.0 && dist[j] == usize::MAX {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        worst = worst.max(*dist.iter().max()?);
        if dist.contains(&usize::MAX) {
            return None;
        }
    }
    Some(worst)
}

/// Machine-readable outcome of the exact checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub states: usize,
    pub max_nodes: usize,
    pub convention: WeightConvention,
    pub gamma: [f64; 3],
    pub max_row_sum_error: f64,
    pub max_balance_violation: f64,
    pub stationary_linf: f64,
    pub reachability_diameter: Option<usize>,
    pub chain_steps: u64,
    pub chain_tv: Option<f64>,
}

/// Builds the exact kernel over `space` and compares it to the target.
pub fn exact_report(
    space: &StateSpace,
    kernel: &KernelConfig,
    target: &TargetDistConfig,
    model: &dyn SubstructureModel,
    cfg: &ProposalConfig,
) -> Result<(OracleReport, TransitionMatrix, Vec<f64>), OracleError> {
    let t = build_transition_matrix(space, kernel, target, model, cfg)?;
    let p = exact_distribution(space, target)?;
    let pi = stationary_distribution(&t)?;
    let report = OracleReport {
        states: space.len(),
        max_nodes: space.max_nodes,
        convention: kernel.convention,
        gamma: kernel.gamma,
        max_row_sum_error: t.max_row_sum_error(),
        max_balance_violation: detailed_balance_violation(&t, &p),
        stationary_linf: linf_distance(&pi, &p),
        reachability_diameter: reachability_diameter(&t),
        chain_steps: 0,
        chain_tv: None,
    };
    Ok((report, t, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::properties::NodeCount;
    use crate::proposal::UniformModel;
    use crate::sampler::{run_chain, MhChain};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn co() -> Arc<SubstructureVocab> {
        Arc::new(SubstructureVocab::atoms(&[("C", 4), ("O", 2)]).unwrap())
    }

    fn single() -> Vec<BondType> {
        vec![BondType::Single]
    }

    #[test]
    fn state_counts() {
        let c = Arc::new(SubstructureVocab::atoms(&[("C", 4)]).unwrap());
        assert_eq!(enumerate_states(&c, 1, &single()).unwrap().len(), 1);
        assert_eq!(enumerate_states(&c, 2, &single()).unwrap().len(), 2);
        assert_eq!(enumerate_states(&co(), 2, &single()).unwrap().len(), 5);
        // C, O; CC, CO, OO; CCC, CCO, OCO, COC, COO, OOO
        assert_eq!(enumerate_states(&co(), 3, &single()).unwrap().len(), 11);
    }

    #[test]
    fn two_state_hand_example() {
        let c = Arc::new(SubstructureVocab::atoms(&[("C", 4)]).unwrap());
        let space = enumerate_states(&c, 2, &single()).unwrap();
        let x = space.states[0].clone();
        let target = TargetDistConfig::new(x, vec![0.0, std::f64::consts::LN_2], vec![Arc::new(NodeCount)])
            .unwrap()
            .with_max_nodes(Some(2));
        let kernel = KernelConfig::default();
        let m = UniformModel::new(1);
        let t = build_transition_matrix(&space, &kernel, &target, &m, &ProposalConfig::default()).unwrap();
        // C → CC: add chosen (1/4), grows with 1/2, always accepted
        assert!((t.get(0, 1) - 0.125).abs() < 1e-12);
        // CC → C: delete chosen (1/4), accepted with (1/2)(1/2)/1
        assert!((t.get(1, 0) - 0.0625).abs() < 1e-12);
        let p = exact_distribution(&space, &target).unwrap();
        assert!((p[1] / p[0] - 2.0).abs() < 1e-12);
        assert!(detailed_balance_violation(&t, &p) < 1e-15);
    }

    #[test]
    fn matrix_primitives() {
        let t = TransitionMatrix::identity(3);
        assert_eq!(stationary_distribution(&t).unwrap(), vec![1.0 / 3.0; 3]);
        let t = TransitionMatrix::from_rows(vec![vec![0.7, 0.3], vec![0.3, 0.7]]);
        let pi = stationary_distribution(&t).unwrap();
        assert!(linf_distance(&pi, &[0.5, 0.5]) < 1e-12);
        assert!(detailed_balance_violation(&t, &[0.5, 0.5]) < 1e-15);
        assert_eq!(total_variation(&[0.5, 0.5], &[1.0, 0.0]), 0.5);
        assert_eq!(reachability_diameter(&t), Some(1));
        assert_eq!(reachability_diameter(&TransitionMatrix::identity(2)), None);
        assert_eq!(reachability_diameter(&TransitionMatrix::identity(1)), Some(0));
    }

    fn co_target(space: &StateSpace) -> TargetDistConfig {
        TargetDistConfig::new(space.states[0].clone(), vec![1.0, 0.5], vec![Arc::new(NodeCount)])
            .unwrap()
            .with_max_nodes(Some(space.max_nodes))
    }

    #[test]
    fn textbook_kernel_is_reversible() {
        let space = enumerate_states(&co(), 3, &single()).unwrap();
        let target = co_target(&space);
        let (r, _, _) = exact_report(
            &space,
            &KernelConfig::default(),
            &target,
            &UniformModel::new(2),
            &ProposalConfig::default(),
        )
        .unwrap();
        assert!(r.max_balance_violation <= 1e-12, "{r:?}");
        assert!(r.stationary_linf <= 1e-9, "{r:?}");
        assert!(r.reachability_diameter.unwrap() <= 2 * space.max_nodes);
    }

    #[test]
    fn unequal_add_delete_breaks_balance() {
        let space = enumerate_states(&co(), 3, &single()).unwrap();
        let target = co_target(&space);
        let kernel = KernelConfig {
            gamma: [0.5, 0.4, 0.1],
            ..KernelConfig::default()
        };
        let (r, _, _) = exact_report(&space, &kernel, &target, &UniformModel::new(2), &ProposalConfig::default()).unwrap();
        assert!(r.max_balance_violation > 1e-6);
    }

    #[test]
    fn chain_frequencies_approach_target() {
        let space = enumerate_states(&co(), 2, &single()).unwrap();
        let target = co_target(&space);
        let p = exact_distribution(&space, &target).unwrap();
        let m = UniformModel::new(2);
        let mut chain = MhChain::new(
            space.states[0].clone(),
            &m,
            &target,
            KernelConfig::default(),
            ProposalConfig::default(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let visits = run_chain(&mut chain, 40_000, &mut rng).unwrap();
        let tv = empirical_vs_exact(&space, &visits, &p).unwrap();
        assert!(tv < 0.05, "tv {tv}");
    }
}
