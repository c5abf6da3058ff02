//! The multi-particle optimisation loop.
//!
//! Each iteration pools the edits of every particle. During burn-in the
//! best `N` molecules of the pool plus the current particles survive; after
//! it, `N` pool members are drawn by systematic resampling on their
//! acceptance weights. Everything selected is collected in Φ.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{paper_log_weight, textbook_log_weight, KernelConfig, SamplerError, WeightConvention};
use crate::canon::{canonical_key_capped, CanonicalKey};
use crate::graph::MolGraph;
use crate::properties::TargetDistConfig;
use crate::proposal::{generate_pool, proposal_density, EditOp, Proposal, ProposalConfig, SubstructureModel};
use crate::smiles::write_smiles;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Particles kept per iteration.
    pub particles: usize,
    pub iterations: usize,
    /// Iterations that use greedy selection instead of resampling.
    pub burn_in: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            particles: 20,
            iterations: 10,
            burn_in: 5,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.particles == 0 {
            return Err(SamplerError::Config("particles must be at least 1".into()));
        }
        if self.burn_in > self.iterations {
            return Err(SamplerError::Config(format!(
                "burn_in {} exceeds iterations {}",
                self.burn_in, self.iterations
            )));
        }
        Ok(())
    }
}

/// One edit on the way from the input to a molecule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageStep {
    pub iteration: usize,
    pub op: EditOp,
    pub node: usize,
    pub anchor: Option<usize>,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct PhiEntry {
    pub graph: MolGraph,
    pub key: CanonicalKey,
    pub log_density: f64,
    /// First iteration in which the molecule was selected.
    pub iteration: usize,
    pub lineage: Vec<LineageStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    BurnIn,
    Resample,
}

/// One pool member as written to the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub op: EditOp,
    pub smiles: Option<String>,
    pub log_density: f64,
    /// Resampling weight; absent during burn-in. JSON has no infinities,
    /// so a zero weight is written as null too.
    pub log_weight: Option<f64>,
    /// Selected into the next particle set at least once.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub phase: Phase,
    pub pool_size: usize,
    pub pool_by_op: [usize; 3],
    pub selected: usize,
    pub distinct_selected: usize,
    pub best_log_density: f64,
    /// Sorted descending.
    pub selected_log_densities: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub iterations: Vec<IterationSummary>,
    pub records: Vec<TraceRecord>,
    /// Iteration at which the pool came back empty, if it did.
    pub early_stop: Option<usize>,
    pub warnings: Vec<String>,
}

impl ChainTrace {
    /// Pool records as JSON lines.
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("trace record serialises"));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct MimosaResult {
    pub phi: Vec<PhiEntry>,
    /// Highest density over Φ and the input (the input wins ties).
    pub best: PhiEntry,
    pub trace: ChainTrace,
}

#[derive(Debug, Clone)]
struct Particle {
    graph: MolGraph,
    key: CanonicalKey,
    log_density: f64,
    lineage: Vec<LineageStep>,
}

struct Candidate {
    particle: Particle,
    log_weight: f64,
    record: Option<usize>,
}

/// Systematic resampling: `n` indices drawn with probabilities proportional
/// to `exp(log_weights)`, using one uniform. `None` if no weight is positive.
pub fn systematic_resample<R: Rng + ?Sized>(log_weights: &[f64], n: usize, rng: &mut R) -> Option<Vec<usize>> {
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        // all zero, or some infinite
        let inf: Vec<usize> = (0..log_weights.len()).filter(|&i| log_weights[i] == f64::INFINITY).collect();
        if inf.is_empty() {
            return None;
        }
        let u: f64 = rng.random();
        return Some((0..n).map(|k| inf[((k as f64 + u) / n as f64 * inf.len() as f64) as usize]).collect());
    }
    let w: Vec<f64> = log_weights.iter().map(|&l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let u: f64 = rng.random();
    let mut out = Vec::with_capacity(n);
    let mut cum = w[0] / total;
    let mut i = 0;
    for k in 0..n {
        let point = (k as f64 + u) / n as f64;
        while point > cum && i + 1 < w.len() {
            i += 1;
            cum += w[i] / total;
        }
        out.push(i);
    }
    Some(out)
}

fn log_weight_of(
    parent: &Particle,
    p: &Proposal,
    kernel: &KernelConfig,
    model: &dyn SubstructureModel,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
) -> Result<f64, SamplerError> {
    Ok(match kernel.convention {
        WeightConvention::Paper => paper_log_weight(p.log_density - parent.log_density, &p.terms),
        WeightConvention::TextbookMh => {
            let q_fwd = proposal_density(&parent.graph, &p.candidate, p.op, model, target, cfg)?;
            let q_rev = proposal_density(&p.candidate, &parent.graph, p.op.reverse(), model, target, cfg)?;
            textbook_log_weight(parent.log_density, p.log_density, q_fwd, q_rev)
        }
    })
}

/// Runs the optimisation loop from the target's input molecule.
pub fn run_mimosa<R: Rng + ?Sized>(
    run: &RunConfig,
    kernel: &KernelConfig,
    target: &TargetDistConfig,
    model: &dyn SubstructureModel,
    cfg: &ProposalConfig,
    rng: &mut R,
) -> Result<MimosaResult, SamplerError> {
    run.validate()?;
    kernel.validate()?;
    let x = target.input().clone();
    let x_lp = target.log_density(&x)?;
    if !x_lp.is_finite() {
        return Err(SamplerError::InvalidState);
    }
    let x_key = canonical_key_capped(&x, cfg.canon_cap).map_err(|e| SamplerError::Config(e.to_string()))?;
    let start = Particle {
        graph: x,
        key: x_key,
        log_density: x_lp,
        lineage: Vec::new(),
    };
    let mut theta = vec![start.clone()];
    let mut phi: Vec<PhiEntry> = Vec::new();
    let mut in_phi: BTreeSet<CanonicalKey> = BTreeSet::new();
    let mut trace = ChainTrace::default();

    for it in 0..run.iterations {
        let phase = if it < run.burn_in { Phase::BurnIn } else { Phase::Resample };
        let mut cands: Vec<Candidate> = Vec::new();
        let mut pool_by_op = [0usize; 3];
        for parent in &theta {
            for p in generate_pool(&parent.graph, model, target, cfg, rng)? {
                let lw = if phase == Phase::Resample {
                    log_weight_of(parent, &p, kernel, model, target, cfg)?
                } else {
                    f64::NAN
                };
                pool_by_op[p.op.index()] += 1;
                let mut lineage = parent.lineage.clone();
                lineage.push(LineageStep {
                    iteration: it,
                    op: p.op,
                    node: p.node,
                    anchor: p.anchor,
                    label: p.label,
                });
                trace.records.push(TraceRecord {
                    iteration: it,
                    op: p.op,
                    smiles: write_smiles(&p.candidate).ok(),
                    log_density: p.log_density,
                    log_weight: (phase == Phase::Resample).then_some(lw),
                    accepted: false,
                });
                cands.push(Candidate {
                    particle: Particle {
                        graph: p.candidate,
                        key: p.key,
                        log_density: p.log_density,
                        lineage,
                    },
                    log_weight: lw,
                    record: Some(trace.records.len() - 1),
                });
            }
        }
        let pool_size = cands.len();
        if pool_size == 0 {
            trace.early_stop = Some(it);
            trace.warnings.push(format!("iteration {it}: empty candidate pool, stopping"));
            break;
        }

        let chosen: Vec<usize> = match phase {
            Phase::BurnIn => {
                // the current particles compete with their edits
                for parent in &theta {
                    cands.push(Candidate {
                        particle: parent.clone(),
                        log_weight: f64::NAN,
                        record: None,
                    });
                }
                let mut best_by_key: BTreeMap<&CanonicalKey, usize> = BTreeMap::new();
                for (i, c) in cands.iter().enumerate() {
                    best_by_key.entry(&c.particle.key).or_insert(i);
                }
                let mut idx: Vec<usize> = best_by_key.into_values().collect();
                idx.sort_by(|&a, &b| {
                    let (pa, pb) = (&cands[a].particle, &cands[b].particle);
                    pb.log_density.total_cmp(&pa.log_density).then_with(|| pa.key.cmp(&pb.key))
                });
                idx.truncate(run.particles);
                idx
            }
            Phase::Resample => {
                let lws: Vec<f64> = cands.iter().map(|c| c.log_weight).collect();
                match systematic_resample(&lws, run.particles, rng) {
                    Some(ix) => ix,
                    None => {
                        trace
                            .warnings
                            .push(format!("iteration {it}: every weight is zero, keeping particles"));
                        Vec::new()
                    }
                }
            }
        };

        if !chosen.is_empty() {
            theta = chosen.iter().map(|&i| cands[i].particle.clone()).collect();
        }
        for &i in &chosen {
            if let Some(r) = cands[i].record {
                trace.records[r].accepted = true;
            }
        }
        for p in &theta {
            if in_phi.insert(p.key.clone()) {
                phi.push(PhiEntry {
                    graph: p.graph.clone(),
                    key: p.key.clone(),
                    log_density: p.log_density,
                    iteration: it,
                    lineage: p.lineage.clone(),
                });
            }
        }
        let mut lps: Vec<f64> = theta.iter().map(|p| p.log_density).collect();
        lps.sort_by(|a, b| b.total_cmp(a));
        let distinct: BTreeSet<&CanonicalKey> = theta.iter().map(|p| &p.key).collect();
        trace.iterations.push(IterationSummary {
            iteration: it,
            phase,
            pool_size,
            pool_by_op,
            selected: theta.len(),
            distinct_selected: distinct.len(),
            best_log_density: lps[0],
            selected_log_densities: lps,
        });
    }

    let mut best = PhiEntry {
        graph: start.graph,
        key: start.key,
        log_density: start.log_density,
        iteration: 0,
        lineage: Vec::new(),
    };
    for e in &phi {
        if e.log_density > best.log_density {
            best = e.clone();
        }
    }
    Ok(MimosaResult { phi, best, trace })
}
