//! Acceptance weights, the mixed Metropolis-Hastings kernel and the
//! multi-particle optimisation loop.

mod population;

pub use population::{
    run_mimosa, ChainTrace, IterationSummary, LineageStep, MimosaResult, Phase, PhiEntry, RunConfig,
    TraceRecord,
};

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::{canonical_key_capped, CanonicalKey};
use crate::graph::MolGraph;
use crate::properties::{ScoreError, TargetDistConfig};
use crate::proposal::{
    propose_add, propose_delete, propose_replace, proposal_density, EditOp, Proposal, ProposalConfig,
    ProposalError, SubstructureModel, Terms,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightConvention {
    /// Model-density ratios exactly as the weight formulas print them.
    Paper,
    /// `p(Y')·q(Y'→Y) / (p(Y)·q(Y→Y'))` with `q` the marginal probability
    /// that the sampled proposal yields the candidate.
    TextbookMh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// One chain, one proposal per step.
    MhChain,
    /// Candidate pools with burn-in selection and resampling.
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Probabilities of replace, add, delete.
    pub gamma: [f64; 3],
    pub convention: WeightConvention,
    pub mode: KernelMode,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            gamma: [0.5, 0.25, 0.25],
            convention: WeightConvention::TextbookMh,
            mode: KernelMode::MhChain,
        }
    }
}

impl KernelConfig {
    /// Probabilities must be non-negative and sum to one. Unequal add and
    /// delete probabilities are accepted so the imbalance can be measured.
    pub fn validate(&self) -> Result<(), SamplerError> {
        let sum: f64 = self.gamma.iter().sum();
        if self.gamma.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) || (sum - 1.0).abs() > 1e-9 {
            return Err(SamplerError::Config(format!(
                "gamma must be non-negative and sum to 1, got {:?}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Add and delete equally likely, as stationarity requires.
    pub fn is_balanced(&self) -> bool {
        (self.gamma[1] - self.gamma[2]).abs() <= 1e-12
    }

    pub fn op_probability(&self, op: EditOp) -> f64 {
        self.gamma[op.index()]
    }
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("current state has zero target density")]
    InvalidState,
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

fn current_ok(lp: f64) -> Result<(), SamplerError> {
    if lp == f64::NEG_INFINITY || lp.is_nan() {
        return Err(SamplerError::InvalidState);
    }
    Ok(())
}

/// `w_r = e^Δ · [ŷ_v]_{s'} / [ŷ_v]_{s_v}`.
pub fn weight_replace(lp_y: f64, lp_new: f64, p_new: f64, p_old: f64) -> Result<f64, SamplerError> {
    current_ok(lp_y)?;
    Ok(paper_log_weight(lp_new - lp_y, &Terms::Replace { p_new, p_old }).exp())
}

/// `w_a = e^Δ · ẑ_u · [ŷ_v(Y')]_{s'} / (1 − ẑ_u)`.
pub fn weight_add(lp_y: f64, lp_new: f64, z: f64, p_new: f64) -> Result<f64, SamplerError> {
    current_ok(lp_y)?;
    Ok(paper_log_weight(lp_new - lp_y, &Terms::Add { z, p_new }).exp())
}

/// `w_d = e^Δ · (1 − ẑ_u(Y')) / (ẑ_u(Y') · [ŷ_v(Y)]_{s_v})`.
pub fn weight_delete(lp_y: f64, lp_new: f64, z_after: f64, p_old: f64) -> Result<f64, SamplerError> {
    current_ok(lp_y)?;
    Ok(paper_log_weight(lp_new - lp_y, &Terms::Delete { z_after, p_old }).exp())
}

/// Log of the printed weight for a proposal whose density changed by `delta`.
pub fn paper_log_weight(delta: f64, terms: &Terms) -> f64 {
    let lw = match *terms {
        Terms::Replace { p_new, p_old } => delta + p_new.ln() - p_old.ln(),
        Terms::Add { z, p_new } => delta + z.ln() + p_new.ln() - (1.0 - z).ln(),
        Terms::Delete { z_after, p_old } => delta + (1.0 - z_after).ln() - z_after.ln() - p_old.ln(),
    };
    if lw.is_nan() {
        f64::NEG_INFINITY
    } else {
        lw
    }
}

/// `log[p(Y')·q_rev / (p(Y)·q_fwd)]`; `−∞` when the move cannot be undone.
pub fn textbook_log_weight(lp_y: f64, lp_new: f64, q_fwd: f64, q_rev: f64) -> f64 {
    if q_rev <= 0.0 || lp_new == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    lp_new - lp_y + q_rev.ln() - q_fwd.ln()
}

/// `min{1, e^lw}`.
pub fn acceptance_probability(log_weight: f64) -> f64 {
    if log_weight >= 0.0 {
        1.0
    } else if log_weight.is_nan() {
        0.0
    } else {
        log_weight.exp()
    }
}

fn sample_op<R: Rng + ?Sized>(gamma: &[f64; 3], rng: &mut R) -> EditOp {
    let u: f64 = rng.random();
    if u < gamma[0] {
        EditOp::Replace
    } else if u < gamma[0] + gamma[1] {
        EditOp::Add
    } else {
        EditOp::Delete
    }
}

/// What happened in one kernel step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub op: EditOp,
    /// A candidate was produced.
    pub proposed: bool,
    pub accepted: bool,
    pub log_weight: f64,
}

/// Per-operation counts over a chain's life.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub steps: u64,
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
}

/// A single Metropolis-Hastings chain over molecules.
///
/// Marginal proposal densities are memoised by canonical key pair, so
/// chains on small state spaces get fast after warm-up.
pub struct MhChain<'a> {
    model: &'a dyn SubstructureModel,
    target: &'a TargetDistConfig,
    kernel: KernelConfig,
    cfg: ProposalConfig,
    state: MolGraph,
    key: CanonicalKey,
    log_density: f64,
    q_cache: BTreeMap<(CanonicalKey, CanonicalKey, EditOp), f64>,
    pub stats: ChainStats,
}

const Q_CACHE_LIMIT: usize = 1 << 20;

impl<'a> MhChain<'a> {
    pub fn new(
        start: MolGraph,
        model: &'a dyn SubstructureModel,
        target: &'a TargetDistConfig,
        kernel: KernelConfig,
        cfg: ProposalConfig,
    ) -> Result<Self, SamplerError> {
        kernel.validate()?;
        let log_density = target.log_density(&start)?;
        current_ok(log_density)?;
        let key = canonical_key_capped(&start, cfg.canon_cap)
            .map_err(|e| SamplerError::Config(e.to_string()))?;
        Ok(MhChain {
            model,
            target,
            kernel,
            cfg,
            state: start,
            key,
            log_density,
            q_cache: BTreeMap::new(),
            stats: ChainStats::default(),
        })
    }

    pub fn state(&self) -> &MolGraph {
        &self.state
    }

    pub fn key(&self) -> &CanonicalKey {
        &self.key
    }

    pub fn log_density(&self) -> f64 {
        self.log_density
    }

    fn q(&mut self, from: &MolGraph, from_key: &CanonicalKey, to: &MolGraph, to_key: &CanonicalKey, op: EditOp) -> Result<f64, SamplerError> {
        let k = (from_key.clone(), to_key.clone(), op);
        if let Some(&q) = self.q_cache.get(&k) {
            return Ok(q);
        }
        let q = proposal_density(from, to, op, self.model, self.target, &self.cfg)?;
        if self.q_cache.len() >= Q_CACHE_LIMIT {
            self.q_cache.clear();
        }
        self.q_cache.insert(k, q);
        Ok(q)
    }

    fn propose<R: Rng + ?Sized>(&self, op: EditOp, rng: &mut R) -> Result<Option<Proposal>, SamplerError> {
        let y = &self.state;
        let n = y.num_nodes();
        Ok(match op {
            EditOp::Replace => {
                let v = rng.random_range(0..n);
                propose_replace(y, v, self.model, self.target, &self.cfg, rng)?
            }
            EditOp::Add => {
                let u = rng.random_range(0..n);
                propose_add(y, u, self.model, self.target, &self.cfg, rng)?
            }
            EditOp::Delete => {
                let leaves = y.leaf_nodes();
                if n < 2 || leaves.is_empty() {
                    None
                } else {
                    let v = leaves[rng.random_range(0..leaves.len())];
                    propose_delete(y, v, self.model, self.target, &self.cfg)?
                }
            }
        })
    }

    /// One kernel step: pick an operation by γ, propose, accept with
    /// `min{1, w}`; otherwise stay.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StepOutcome, SamplerError> {
        self.stats.steps += 1;
        let op = sample_op(&self.kernel.gamma, rng);
        let Some(p) = self.propose(op, rng)? else {
            return Ok(StepOutcome {
                op,
                proposed: false,
                accepted: false,
                log_weight: f64::NEG_INFINITY,
            });
        };
        self.stats.proposed[op.index()] += 1;
        let lw = if p.key == self.key {
            0.0
        } else {
            match self.kernel.convention {
                WeightConvention::Paper => paper_log_weight(p.log_density - self.log_density, &p.terms),
                WeightConvention::TextbookMh => {
                    if p.log_density == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        let state = self.state.clone();
                        let key = self.key.clone();
                        let q_fwd = self.q(&state, &key, &p.candidate, &p.key, op)?;
                        let q_rev = self.q(&p.candidate, &p.key, &state, &key, op.reverse())?;
                        textbook_log_weight(self.log_density, p.log_density, q_fwd, q_rev)
                    }
                }
            }
        };
        let u: f64 = rng.random();
        let accepted = p.log_density.is_finite() && u < acceptance_probability(lw);
        if accepted {
            self.stats.accepted[op.index()] += 1;
            self.state = p.candidate;
            self.key = p.key;
            self.log_density = p.log_density;
        }
        Ok(StepOutcome {
            op,
            proposed: true,
            accepted,
            log_weight: lw,
        })
    }
}

/// Convenience wrapper: one step from `y` with a throwaway chain.
pub fn mh_step<R: Rng + ?Sized>(
    kernel: &KernelConfig,
    y: &MolGraph,
    model: &dyn SubstructureModel,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
    rng: &mut R,
) -> Result<MolGraph, SamplerError> {
    let mut chain = MhChain::new(y.clone(), model, target, *kernel, cfg.clone())?;
    chain.step(rng)?;
    Ok(chain.state)
}

/// Visit counts by canonical key over `steps` steps (the start state is
/// not counted).
pub fn run_chain<R: Rng + ?Sized>(
    chain: &mut MhChain<'_>,
    steps: u64,
    rng: &mut R,
) -> Result<BTreeMap<CanonicalKey, u64>, SamplerError> {
    let mut visits = BTreeMap::new();
    for _ in 0..steps {
        chain.step(rng)?;
        *visits.entry(chain.key.clone()).or_insert(0) += 1;
    }
    Ok(visits)
}
