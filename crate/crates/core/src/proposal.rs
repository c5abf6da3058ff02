//! Substructure edits: replace a node, grow a leaf, delete a leaf.
//!
//! Every edit is built in two stages. A sampled choice (which node, which
//! substructure) comes from the predictors; a deterministic completion then
//! picks bond types by the target-density argmax and enumerates ring
//! attachment sites. Completions that differ only by ring symmetry are
//! merged by canonical key and one of the survivors is chosen uniformly.
//!
//! The same completion code backs the sampled proposals, the exhaustive
//! [`enumerate_paths`] table and the pairwise [`proposal_density`], so the
//! three always agree.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::{canonical_key_capped, CanonicalKey};
use crate::chem::{free_half_order, has_spare_capacity, is_valid};
use crate::gnn::{GnnPair, GraphInput};
use crate::graph::MolGraph;
use crate::properties::{ScoreError, TargetDistConfig};
use crate::vocab::{BondType, SubstructureVocab};

/// Source of the two predictive distributions used by the edits.
pub trait SubstructureModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// ŷ_v: distribution over substructures for node `v` of `g`, masked.
    fn masked_distribution(&self, g: &MolGraph, v: usize) -> Vec<f64>;

    /// ŷ for a masked leaf grown on `u` by a single bond.
    fn grown_distribution(&self, g: &MolGraph, u: usize) -> Vec<f64>;

    /// ẑ_u: probability that node `u` grows a leaf.
    fn add_probability(&self, g: &MolGraph, u: usize) -> f64;
}

/// Uniform ŷ over the vocabulary and ẑ = 0.5 everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformModel {
    pub vocab_size: usize,
}

impl UniformModel {
    pub fn new(vocab_size: usize) -> Self {
        UniformModel { vocab_size }
    }
}

impl SubstructureModel for UniformModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn masked_distribution(&self, _: &MolGraph, _: usize) -> Vec<f64> {
        vec![1.0 / self.vocab_size as f64; self.vocab_size]
    }

    fn grown_distribution(&self, _: &MolGraph, _: usize) -> Vec<f64> {
        vec![1.0 / self.vocab_size as f64; self.vocab_size]
    }

    fn add_probability(&self, _: &MolGraph, _: usize) -> f64 {
        0.5
    }
}

/// Trained mGNN and bGNN.
#[derive(Debug, Clone)]
pub struct PretrainedModels {
    pub pair: GnnPair,
}

impl PretrainedModels {
    pub fn new(pair: GnnPair) -> Self {
        PretrainedModels { pair }
    }
}

impl SubstructureModel for PretrainedModels {
    fn vocab_size(&self) -> usize {
        self.pair.vocab_size()
    }

    fn masked_distribution(&self, g: &MolGraph, v: usize) -> Vec<f64> {
        self.pair.mgnn.mgnn_predict(g, v)
    }

    fn grown_distribution(&self, g: &MolGraph, u: usize) -> Vec<f64> {
        let mask = self.pair.mgnn.shape.mask_token();
        let (input, v) = GraphInput::from_graph(g).with_masked_leaf(u, BondType::Single, mask);
        self.pair.mgnn.mgnn_predict_input(&input, v)
    }

    fn add_probability(&self, g: &MolGraph, u: usize) -> f64 {
        self.pair.bgnn.bgnn_predict(g, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOp {
    Replace,
    Add,
    Delete,
}

impl EditOp {
    pub const ALL: [EditOp; 3] = [EditOp::Replace, EditOp::Add, EditOp::Delete];

    /// The operation that undoes this one.
    pub fn reverse(self) -> Self {
        match self {
            EditOp::Replace => EditOp::Replace,
            EditOp::Add => EditOp::Delete,
            EditOp::Delete => EditOp::Add,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EditOp::Replace => "replace",
            EditOp::Add => "add",
            EditOp::Delete => "delete",
        }
    }
}

impl std::fmt::Display for EditOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How ẑ_u turns into the decision to grow a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "threshold")]
pub enum AddMode {
    /// Grow with probability ẑ_u.
    Bernoulli,
    /// Grow iff ẑ_u ≥ threshold.
    Threshold(f64),
}

impl AddMode {
    pub fn grow_probability(self, z: f64) -> f64 {
        match self {
            AddMode::Bernoulli => z,
            AddMode::Threshold(t) => {
                if z >= t {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalConfig {
    /// Bond types tried by the argmax completion, in tie-break order.
    pub allowed_bonds: Vec<BondType>,
    /// Largest graph that gets a canonical key; bigger candidates are dropped.
    pub canon_cap: usize,
    pub add_mode: AddMode,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            allowed_bonds: vec![BondType::Single],
            canon_cap: 64,
            add_mode: AddMode::Bernoulli,
        }
    }
}

#[derive(Debug, Error)]
pub enum ProposalError {
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("model predicts {model} substructures but the graph vocabulary has {vocab}")]
    VocabMismatch { model: usize, vocab: usize },
    #[error("no such node {0}")]
    NoSuchNode(usize),
    #[error("allowed bond list is empty")]
    NoBonds,
}

/// Model densities recorded with a proposal, as the weights need them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terms {
    /// `[ŷ_v(Y)]_{s'}` and `[ŷ_v(Y)]_{s_v}`.
    Replace { p_new: f64, p_old: f64 },
    /// `ẑ_u(Y)` and `[ŷ_v(Y')]_{s'}` for the grown leaf.
    Add { z: f64, p_new: f64 },
    /// `ẑ_u(Y')` for the former neighbour and `[ŷ_v(Y)]_{s_v}`.
    Delete { z_after: f64, p_old: f64 },
}

#[derive(Debug, Clone)]
pub struct Proposal {
    pub op: EditOp,
    /// Replaced node, new leaf (index in the candidate) or deleted leaf.
    pub node: usize,
    /// Anchor `u` of an add, or the deleted leaf's neighbour, indexed in `Y`.
    pub anchor: Option<usize>,
    /// `s'` for replace and add, `s_v` for delete.
    pub label: usize,
    pub candidate: MolGraph,
    pub key: CanonicalKey,
    /// `log p(candidate)`, `−∞` outside the support.
    pub log_density: f64,
    pub terms: Terms,
}

fn check_model(g: &MolGraph, model: &dyn SubstructureModel) -> Result<(), ProposalError> {
    if model.vocab_size() != g.vocab().len() {
        return Err(ProposalError::VocabMismatch {
            model: model.vocab_size(),
            vocab: g.vocab().len(),
        });
    }
    Ok(())
}

/// Sites of `label` that can take an external bond; `[None]` for atoms.
fn site_options(vocab: &SubstructureVocab, label: usize) -> Vec<Option<u8>> {
    match vocab.entry(label).ring.as_ref() {
        None => vec![None],
        Some(r) => (0..r.size() as u8)
            .filter(|&s| r.site_valence[usize::from(s)] > 0)
            .map(Some)
            .collect(),
    }
}

/// True if no ring symmetry maps `a` to a lexicographically smaller tuple.
fn is_canonical_assignment(symmetries: &[Vec<u8>], a: &[u8]) -> bool {
    symmetries.iter().all(|sigma| {
        let image = a.iter().map(|&s| sigma[usize::from(s)]);
        image.cmp(a.iter().copied()) != std::cmp::Ordering::Less
    })
}

/// Bond for edge `ei` maximising the target density over the locally legal
/// allowed types. Ties keep the first; with no finite option it is single.
fn choose_bond(
    g: &MolGraph,
    ei: usize,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
) -> Result<BondType, ProposalError> {
    let e = g.edges()[ei];
    let room = free_half_order(g, e.u, e.site_u, Some(ei)).min(free_half_order(g, e.v, e.site_v, Some(ei)));
    let legal: Vec<BondType> = cfg
        .allowed_bonds
        .iter()
        .copied()
        .filter(|t| t.half_order() <= room)
        .collect();
    match legal.len() {
        0 => return Ok(BondType::Single),
        1 => return Ok(legal[0]),
        _ => {}
    }
    let mut best = (BondType::Single, f64::NEG_INFINITY);
    for t in legal {
        let lp = target.log_density(&g.with_bond(ei, t))?;
        if lp > best.1 {
            best = (t, lp);
        }
    }
    Ok(best.0)
}

fn push_unique(
    out: &mut Vec<(CanonicalKey, MolGraph)>,
    seen: &mut BTreeSet<CanonicalKey>,
    g: MolGraph,
    cap: usize,
) {
    if !is_valid(&g) {
        return;
    }
    if let Ok(key) = canonical_key_capped(&g, cap) {
        if seen.insert(key.clone()) {
            out.push((key, g));
        }
    }
}

/// All distinct valid completions of relabelling node `v` of `y` to `label`.
pub fn replace_variants(
    y: &MolGraph,
    v: usize,
    label: usize,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
) -> Result<Vec<(CanonicalKey, MolGraph)>, ProposalError> {
    if v >= y.num_nodes() {
        return Err(ProposalError::NoSuchNode(v));
    }
    if cfg.allowed_bonds.is_empty() {
        return Err(ProposalError::NoBonds);
    }
    let vocab = y.vocab();
    let entry = vocab.entry(label);
    let nbrs = y.neighbors(v);
    let deg = nbrs.len();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    if deg > usize::from(entry.attachment_capacity) {
        return Ok(out);
    }
    let assignments: Vec<Vec<Option<u8>>> = match entry.ring.as_ref() {
        None => vec![vec![None; deg]],
        Some(ring) => {
            let sites: Vec<u8> = site_options(vocab, label).into_iter().flatten().collect();
            let mut all = Vec::new();
            let mut cur = vec![0usize; deg];
            if !sites.is_empty() || deg == 0 {
                loop {
                    let a: Vec<u8> = cur.iter().map(|&i| sites[i]).collect();
                    if is_canonical_assignment(&ring.symmetries, &a) {
                        all.push(a.into_iter().map(Some).collect());
                    }
                    // odometer over sites^deg
                    let mut i = 0;
                    while i < deg {
                        cur[i] += 1;
                        if cur[i] < sites.len() {
                            break;
                        }
                        cur[i] = 0;
                        i += 1;
                    }
                    if i == deg {
                        break;
                    }
                }
            }
            all
        }
    };
    for a in assignments {
        let incident: Vec<(BondType, Option<u8>)> = a.iter().map(|&s| (BondType::Single, s)).collect();
        let Ok(mut g) = y.with_relabel(v, label, &incident) else {
            continue;
        };
        for &(_, ei) in nbrs {
            let t = choose_bond(&g, ei, target, cfg)?;
            if t != g.edges()[ei].bond {
                g = g.with_bond(ei, t);
            }
        }
        push_unique(&mut out, &mut seen, g, cfg.canon_cap);
    }
    Ok(out)
}

/// All distinct valid completions of growing a `label` leaf on `u`.
pub fn add_variants(
    y: &MolGraph,
    u: usize,
    label: usize,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
) -> Result<Vec<(CanonicalKey, MolGraph)>, ProposalError> {
    if u >= y.num_nodes() {
        return Err(ProposalError::NoSuchNode(u));
    }
    if cfg.allowed_bonds.is_empty() {
        return Err(ProposalError::NoBonds);
    }
    let vocab = y.vocab();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let new_sites: Vec<Option<u8>> = match vocab.entry(label).ring.as_ref() {
        None => vec![None],
        Some(ring) => site_options(vocab, label)
            .into_iter()
            .filter(|s| is_canonical_assignment(&ring.symmetries, &[s.unwrap_or(0)]))
            .collect(),
    };
    for su in site_options(vocab, y.label(u)) {
        for &sn in &new_sites {
            let Ok(g) = y.with_leaf(u, label, BondType::Single, su, sn) else {
                continue;
            };
            let ei = g.num_edges() - 1;
            let t = choose_bond(&g, ei, target, cfg)?;
            let g = if t == BondType::Single { g } else { g.with_bond(ei, t) };
            push_unique(&mut out, &mut seen, g, cfg.canon_cap);
        }
    }
    Ok(out)
}

fn sample_label<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Option<usize> {
    WeightedIndex::new(p).ok().map(|d| d.sample(rng))
}

fn finish(
    op: EditOp,
    node: usize,
    anchor: Option<usize>,
    label: usize,
    (key, candidate): (CanonicalKey, MolGraph),
    terms: Terms,
    target: &TargetDistConfig,
) -> Result<Proposal, ProposalError> {
    let log_density = target.log_density(&candidate)?;
    Ok(Proposal {
        op,
        node,
        anchor,
        label,
        candidate,
        key,
        log_density,
        terms,
    })
}

/// Replaces node `v`: masks it, samples `s' ~ ŷ_v`, completes bonds and
/// sites. `None` when no valid completion exists.
pub fn propose_replace<R: Rng + ?Sized>(
    y: &MolGraph,
    v: usize,
    model: &dyn SubstructureModel,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
    rng: &mut R,
) -> Result<Option<Proposal>, ProposalError> {
    Ok(replace_draw(y, v, model, target, cfg, rng, false)?.pop())
}

/// One `s'` draw for node `v`; all completions if `keep_all`, else one
/// chosen uniformly.
fn replace_draw<R: Rng + ?Sized>(
    y: &MolGraph,
    v: usize,
    model: &dyn SubstructureModel,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
    rng: &mut R,
    keep_all: bool,
) -> Result<Vec<Proposal>, ProposalError> {
    check_model(y, model)?;
    if v >= y.num_nodes() {
        return Err(ProposalError::NoSuchNode(v));
    }
    let p = model.masked_distribution(y, v);
    let Some(label) = sample_label(&p, rng) else {
        return Ok(Vec::new());
    };
    let mut variants = replace_variants(y, v, label, target, cfg)?;
    if variants.is_empty() {
        return Ok(Vec::new());
    }
    if !keep_all {
        let pick = rng.random_range(0..variants.len());
        variants = vec![variants.swap_remove(pick)];
    }
    let terms = Terms::Replace {
        p_new: p[label],
        p_old: p[y.label(v)],
    };
    variants
        .into_iter()
        .map(|kv| finish(EditOp::Replace, v, None, label, kv, terms, target))
        .collect()
}

/// Grows a leaf on `u` if the add decision (per [`AddMode`]) says so.
/// `None` when `u` is saturated, the decision is no, or nothing completes.
pub fn propose_add<R: Rng + ?Sized>(
    y: &MolGraph,
    u: usize,
    model: &dyn SubstructureModel,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
    rng: &mut R,
) -> Result<Option<Proposal>, ProposalError> {
    Ok(add_draw(y, u, model, target, cfg, rng, false)?.pop())
}

/// `keep_all` also skips the add decision (pool semantics).
fn add_draw<R: Rng + ?Sized>(
    y: &MolGraph,
    u: usize,
    model: &dyn SubstructureModel,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
    rng: &mut R,
    keep_all: bool,
) -> Result<Vec<Proposal>, ProposalError> {
    check_model(y, model)?;
    if u >= y.num_nodes() {
        return Err(ProposalError::NoSuchNode(u));
    }
    if !has_spare_capacity(y, u) {
        return Ok(Vec::new());
    }
    let z = model.add_probability(y, u);
    if !keep_all {
        let grow = cfg.add_mode.grow_probability(z);
        if !(rng.random::<f64>() < grow) {
            return Ok(Vec::new());
        }
    }
    let p = model.grown_distribution(y, u);
    let Some(label) = sample_label(&p, rng) else {
        return Ok(Vec::new());
    };
    let mut variants = add_variants(y, u, label, target, cfg)?;
    if variants.is_empty() {
        return Ok(Vec::new());
    }
    if !keep_all {
        let pick = rng.random_range(0..variants.len());
        variants = vec![variants.swap_remove(pick)];
    }
    let terms = Terms::Add { z, p_new: p[label] };
    let leaf = y.num_nodes();
    variants
        .into_iter()
        .map(|kv| finish(EditOp::Add, leaf, Some(u), label, kv, terms, target))
        .collect()
}

/// Deletes leaf `v`. `None` if `v` is not a leaf or is the only node.
pub fn propose_delete(
    y: &MolGraph,
    v: usize,
    model: &dyn SubstructureModel,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
) -> Result<Option<Proposal>, ProposalError> {
    check_model(y, model)?;
    if v >= y.num_nodes() {
        return Err(ProposalError::NoSuchNode(v));
    }
    if y.num_nodes() < 2 || y.degree(v) != 1 {
        return Ok(None);
    }
    let u = y.neighbors(v)[0].0;
    let Ok(candidate) = y.without_leaf(v) else {
        return Ok(None);
    };
    if !is_valid(&candidate) {
        return Ok(None);
    }
    let Ok(key) = canonical_key_capped(&candidate, cfg.canon_cap) else {
        return Ok(None);
    };
    let u_after = if u > v { u - 1 } else { u };
    let terms = Terms::Delete {
        z_after: model.add_probability(&candidate, u_after),
        p_old: model.masked_distribution(y, v)[y.label(v)],
    };
    finish(EditOp::Delete, v, Some(u), y.label(v), (key, candidate), terms, target).map(Some)
}

/// Candidate pool around `y`: one `s'` draw per node for replace and per
/// unsaturated node for add (keeping every ring completion), plus every
/// leaf delete. Only candidates inside the target's support are kept.
pub fn generate_pool<R: Rng + ?Sized>(
    y: &MolGraph,
    model: &dyn SubstructureModel,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
    rng: &mut R,
) -> Result<Vec<Proposal>, ProposalError> {
    let mut pool = Vec::new();
    for v in 0..y.num_nodes() {
        pool.extend(replace_draw(y, v, model, target, cfg, rng, true)?);
    }
    for u in 0..y.num_nodes() {
        pool.extend(add_draw(y, u, model, target, cfg, rng, true)?);
    }
    for v in y.leaf_nodes() {
        pool.extend(propose_delete(y, v, model, target, cfg)?);
    }
    pool.retain(|p| p.log_density.is_finite());
    Ok(pool)
}

/// One way an operation can turn `y` into a candidate.
#[derive(Debug, Clone)]
pub struct PathDetail {
    pub op: EditOp,
    pub key: CanonicalKey,
    pub candidate: MolGraph,
    /// Probability of this path given the operation was chosen.
    pub prob: f64,
    pub terms: Terms,
}

/// One outcome of an operation, with its probability given the operation.
#[derive(Debug, Clone)]
pub struct PathEntry {
    pub op: EditOp,
    pub key: CanonicalKey,
    pub candidate: MolGraph,
    pub prob: f64,
}

/// Every path of every operation from `y`: which node, which substructure,
/// which completion. Paths are listed in a fixed order.
pub fn enumerate_path_details(
    y: &MolGraph,
    model: &dyn SubstructureModel,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
) -> Result<Vec<PathDetail>, ProposalError> {
    check_model(y, model)?;
    let n = y.num_nodes();
    let mut out = Vec::new();
    for v in 0..n {
        let p = model.masked_distribution(y, v);
        for (label, &pl) in p.iter().enumerate() {
            if pl <= 0.0 {
                continue;
            }
            let vs = replace_variants(y, v, label, target, cfg)?;
            let each = pl / (n as f64 * vs.len() as f64);
            let terms = Terms::Replace {
                p_new: pl,
                p_old: p[y.label(v)],
            };
            for (key, candidate) in vs {
                out.push(PathDetail {
                    op: EditOp::Replace,
                    key,
                    candidate,
                    prob: each,
                    terms,
                });
            }
        }
    }
    for u in 0..n {
        if !has_spare_capacity(y, u) {
            continue;
        }
        let z = model.add_probability(y, u);
        let grow = cfg.add_mode.grow_probability(z);
        if grow <= 0.0 {
            continue;
        }
        let p = model.grown_distribution(y, u);
        for (label, &pl) in p.iter().enumerate() {
            if pl <= 0.0 {
                continue;
            }
            let vs = add_variants(y, u, label, target, cfg)?;
            let each = grow * pl / (n as f64 * vs.len() as f64);
            for (key, candidate) in vs {
                out.push(PathDetail {
                    op: EditOp::Add,
                    key,
                    candidate,
                    prob: each,
                    terms: Terms::Add { z, p_new: pl },
                });
            }
        }
    }
    let leaves = y.leaf_nodes();
    if n >= 2 {
        for &v in &leaves {
            if let Some(p) = propose_delete(y, v, model, target, cfg)? {
                out.push(PathDetail {
                    op: EditOp::Delete,
                    key: p.key,
                    candidate: p.candidate,
                    prob: 1.0 / leaves.len() as f64,
                    terms: p.terms,
                });
            }
        }
    }
    Ok(out)
}

/// Every outcome of every operation from `y` with the probability that the
/// sampled proposal produces it, summed over paths that give isomorphic
/// candidates. Per operation the probabilities sum to at most 1; the rest
/// is the chance the operation fails.
pub fn enumerate_paths(
    y: &MolGraph,
    model: &dyn SubstructureModel,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
) -> Result<Vec<PathEntry>, ProposalError> {
    let mut acc: BTreeMap<(EditOp, CanonicalKey), (f64, MolGraph)> = BTreeMap::new();
    for d in enumerate_path_details(y, model, target, cfg)? {
        acc.entry((d.op, d.key)).or_insert((0.0, d.candidate)).0 += d.prob;
    }
    Ok(acc
        .into_iter()
        .map(|((op, key), (prob, candidate))| PathEntry {
            op,
            key,
            candidate,
            prob,
        })
        .collect())
}

fn label_counts(g: &MolGraph) -> BTreeMap<usize, i64> {
    let mut m = BTreeMap::new();
    for &l in g.nodes() {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

/// Labels whose count in `b` exceeds that in `a`, with multiplicity, or
/// `None` if `b` lacks something `a` has beyond `removed`.
fn extra_label(a: &BTreeMap<usize, i64>, removed: Option<usize>, b: &BTreeMap<usize, i64>) -> Option<usize> {
    let mut extra = None;
    let labels: BTreeSet<usize> = a.keys().chain(b.keys()).copied().collect();
    for l in labels {
        let have = a.get(&l).copied().unwrap_or(0) - i64::from(removed == Some(l));
        let d = b.get(&l).copied().unwrap_or(0) - have;
        match d {
            0 => {}
            1 if extra.is_none() => extra = Some(l),
            _ => return None,
        }
    }
    extra
}

/// Probability that operation `op` applied to `y` proposes a graph
/// isomorphic to `to`. Uses label counts to find the only substructure that
/// could be involved at each node, so no full enumeration is needed.
pub fn proposal_density(
    y: &MolGraph,
    to: &MolGraph,
    op: EditOp,
    model: &dyn SubstructureModel,
    target: &TargetDistConfig,
    cfg: &ProposalConfig,
) -> Result<f64, ProposalError> {
    check_model(y, model)?;
    let Ok(to_key) = canonical_key_capped(to, cfg.canon_cap) else {
        return Ok(0.0);
    };
    let n = y.num_nodes();
    let (cy, ct) = (label_counts(y), label_counts(to));
    let hits = |vs: &[(CanonicalKey, MolGraph)]| vs.iter().filter(|(k, _)| *k == to_key).count() as f64;
    let mut q = 0.0;
    match op {
        EditOp::Replace => {
            if to.num_nodes() != n {
                return Ok(0.0);
            }
            for v in 0..n {
                let label = match extra_label(&cy, Some(y.label(v)), &ct) {
                    Some(l) => l,
                    None if cy == ct => y.label(v),
                    None => continue,
                };
                let p = model.masked_distribution(y, v)[label];
                if p <= 0.0 {
                    continue;
                }
                let vs = replace_variants(y, v, label, target, cfg)?;
                if !vs.is_empty() {
                    q += p * hits(&vs) / (n as f64 * vs.len() as f64);
                }
            }
        }
        EditOp::Add => {
            if to.num_nodes() != n + 1 {
                return Ok(0.0);
            }
            let Some(label) = extra_label(&cy, None, &ct) else {
                return Ok(0.0);
            };
            for u in 0..n {
                if !has_spare_capacity(y, u) {
                    continue;
                }
                let grow = cfg.add_mode.grow_probability(model.add_probability(y, u));
                if grow <= 0.0 {
                    continue;
                }
                let p = model.grown_distribution(y, u)[label];
                if p <= 0.0 {
                    continue;
                }
                let vs = add_variants(y, u, label, target, cfg)?;
                if !vs.is_empty() {
                    q += grow * p * hits(&vs) / (n as f64 * vs.len() as f64);
                }
            }
        }
        EditOp::Delete => {
            if n < 2 || to.num_nodes() + 1 != n {
                return Ok(0.0);
            }
            let Some(label) = extra_label(&ct, None, &cy) else {
                return Ok(0.0);
            };
            let leaves = y.leaf_nodes();
            for &v in &leaves {
                if y.label(v) != label {
                    continue;
                }
                if let Ok(g) = y.without_leaf(v) {
                    if is_valid(&g) && canonical_key_capped(&g, cfg.canon_cap).is_ok_and(|k| k == to_key) {
                        q += 1.0 / leaves.len() as f64;
                    }
                }
            }
        }
    }
    Ok(q)
}
