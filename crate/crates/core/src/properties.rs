//! Property scorers and the unnormalised target density.
//!
//! `log p_X(Y) = η0 · sim(X, Y) + Σ ηi · (Pi(Y) − Pi(X))` for valid `Y`
//! (and `Y` within the optional node-count support), `−∞` otherwise.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::canon::canonical_key_capped;
use crate::chem::is_valid;
use crate::fingerprint::{fingerprint_with, tanimoto, Fingerprint, FingerprintError, DEFAULT_RADIUS, DEFAULT_WIDTH};
use crate::graph::MolGraph;
use crate::rings::count_cycles_longer_than;
use crate::smiles::parse_smiles;
use crate::vocab::SubstructureVocab;

const LOGP_DESK: &str = include_str!("../data/logp_desk.tsv");
const LOGP_FULL: &str = include_str!("../data/logp_full.tsv");

/// Node cap used when keying external score tables.
const TABLE_KEY_CAP: usize = 64;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("scorer `{scorer}`: {message}")]
    Scorer { scorer: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("target configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
}

/// A molecular property; higher is better.
pub trait PropertyScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, g: &MolGraph) -> Result<f64, ScoreError>;
}

impl fmt::Debug for dyn PropertyScorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PropertyScorer({})", self.name())
    }
}

/// Reads a two-column `key<TAB>value` table; `#` lines are comments.
pub fn parse_table(text: &str, path: &str) -> Result<BTreeMap<String, f64>, ScoreError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: &str| ScoreError::Parse {
            path: path.to_string(),
            line: i + 1,
            message: message.to_string(),
        };
        let (k, v) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected key<TAB>value"))?;
        let v: f64 = v.trim().parse().map_err(|_| parse_err("value is not a number"))?;
        if !v.is_finite() {
            return Err(parse_err("value must be finite"));
        }
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, ScoreError> {
    std::fs::read_to_string(path).map_err(|source| ScoreError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Additive per-substructure logP estimate.
#[derive(Debug, Clone)]
pub struct LogpSurrogate {
    table: BTreeMap<String, f64>,
}

impl LogpSurrogate {
    pub fn new(table: BTreeMap<String, f64>) -> Self {
        LogpSurrogate { table }
    }

    /// Contributions for the desk vocabulary.
    pub fn desk() -> Self {
        Self::new(parse_table(LOGP_DESK, "logp_desk.tsv").expect("bundled table parses"))
    }

    /// Contributions for the full vocabulary.
    pub fn full() -> Self {
        Self::new(parse_table(LOGP_FULL, "logp_full.tsv").expect("bundled table parses"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScoreError> {
        let path = path.as_ref();
        Ok(Self::new(parse_table(&read(path)?, &path.display().to_string())?))
    }

    pub fn contribution(&self, label: &str) -> Option<f64> {
        self.table.get(label).copied()
    }

    /// Checks that every vocabulary entry has a contribution.
    pub fn covers(&self, vocab: &SubstructureVocab) -> Result<(), ScoreError> {
        match vocab.entries().iter().find(|e| !self.table.contains_key(&e.label)) {
            Some(e) => Err(ScoreError::Scorer {
                scorer: "logp_surrogate".into(),
                message: format!("no contribution for `{}`", e.label),
            }),
            None => Ok(()),
        }
    }
}

impl PropertyScorer for LogpSurrogate {
    fn name(&self) -> &str {
        "logp_surrogate"
    }

    fn score(&self, g: &MolGraph) -> Result<f64, ScoreError> {
        let mut total = 0.0;
        for v in 0..g.num_nodes() {
            let label = g.label_text(v);
            total += self.contribution(label).ok_or_else(|| ScoreError::Scorer {
                scorer: self.name().to_string(),
                message: format!("no contribution for `{label}`"),
            })?;
        }
        Ok(total)
    }
}

/// Number of atom-level basis cycles longer than six atoms.
pub fn long_cycle_count(g: &MolGraph) -> usize {
    if g.num_edges() + 1 == g.num_nodes() {
        // tree of substructures: the only cycles are the ring nodes themselves
        (0..g.num_nodes())
            .filter(|&v| g.vocab().entry(g.label(v)).ring_size() > 6)
            .count()
    } else {
        count_cycles_longer_than(&g.expand(), 6)
    }
}

/// `logP − (c1 · nodes + c2 · ring nodes) − long cycles`.
#[derive(Debug, Clone)]
pub struct PlogpSurrogate {
    pub logp: LogpSurrogate,
    pub c1: f64,
    pub c2: f64,
}

impl PlogpSurrogate {
    pub const DEFAULT_C1: f64 = 0.05;
    pub const DEFAULT_C2: f64 = 0.2;

    pub fn new(logp: LogpSurrogate, c1: f64, c2: f64) -> Self {
        PlogpSurrogate { logp, c1, c2 }
    }

    pub fn desk() -> Self {
        Self::new(LogpSurrogate::desk(), Self::DEFAULT_C1, Self::DEFAULT_C2)
    }

    pub fn sa_surrogate(&self, g: &MolGraph) -> f64 {
        self.c1 * g.num_nodes() as f64 + self.c2 * g.ring_node_count() as f64
    }
}

impl PropertyScorer for PlogpSurrogate {
    fn name(&self) -> &str {
        "plogp_surrogate"
    }

    fn score(&self, g: &MolGraph) -> Result<f64, ScoreError> {
        Ok(self.logp.score(g)? - self.sa_surrogate(g) - long_cycle_count(g) as f64)
    }
}

/// Drug-likeness surrogate: product of three clamped desirability ramps
/// over node count, logP surrogate and ring count. Not QED.
#[derive(Debug, Clone)]
pub struct QedSurrogate {
    pub logp: LogpSurrogate,
}

/// Trapezoid: 0 below `a`, rising to 1 at `b`, flat to `c`, falling to 0 at `d`.
fn ramp(x: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    let v = if x <= a || x >= d {
        0.0
    } else if x < b {
        (x - a) / (b - a)
    } else if x <= c {
        1.0
    } else {
        (d - x) / (d - c)
    };
    v.clamp(0.0, 1.0)
}

impl PropertyScorer for QedSurrogate {
    fn name(&self) -> &str {
        "qed_surrogate"
    }

    fn score(&self, g: &MolGraph) -> Result<f64, ScoreError> {
        let size = ramp(g.num_nodes() as f64, 1.0, 6.0, 20.0, 40.0);
        let lipo = ramp(self.logp.score(g)?, -3.0, 0.0, 3.5, 7.0);
        let rings = ramp(g.ring_node_count() as f64, -1.0, 1.0, 3.0, 6.0);
        Ok(size * lipo * rings)
    }
}

/// Number of substructure nodes. Mostly useful for small exact checks.
#[derive(Debug, Clone, Copy, Default)]
pub struct NodeCount;

impl PropertyScorer for NodeCount {
    fn name(&self) -> &str {
        "node_count"
    }

    fn score(&self, g: &MolGraph) -> Result<f64, ScoreError> {
        Ok(g.num_nodes() as f64)
    }
}

/// Scores looked up from a precomputed table keyed by SMILES or canonical key.
#[derive(Debug, Clone)]
pub struct ExternalTableScorer {
    name: String,
    scores: BTreeMap<String, f64>,
    default: f64,
}

impl ExternalTableScorer {
    pub const DEFAULT_PENALTY: f64 = -1.0;

    /// Keys that parse as SMILES over `vocab` are stored by canonical key;
    /// other keys are kept verbatim and matched against canonical keys.
    pub fn from_table(
        name: impl Into<String>,
        table: BTreeMap<String, f64>,
        vocab: &Arc<SubstructureVocab>,
        default: f64,
    ) -> Self {
        let scores = table
            .into_iter()
            .map(|(k, v)| {
                let key = parse_smiles(&k, vocab)
                    .ok()
                    .and_then(|g| canonical_key_capped(&g, TABLE_KEY_CAP).ok())
                    .map_or(k, |c| c.to_string());
                (key, v)
            })
            .collect();
        ExternalTableScorer {
            name: name.into(),
            scores,
            default,
        }
    }

    pub fn load(
        name: impl Into<String>,
        path: impl AsRef<Path>,
        vocab: &Arc<SubstructureVocab>,
        default: f64,
    ) -> Result<Self, ScoreError> {
        let path = path.as_ref();
        let table = parse_table(&read(path)?, &path.display().to_string())?;
        Ok(Self::from_table(name, table, vocab, default))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl PropertyScorer for ExternalTableScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, g: &MolGraph) -> Result<f64, ScoreError> {
        let key = canonical_key_capped(g, TABLE_KEY_CAP).map_err(|e| ScoreError::Scorer {
            scorer: self.name.clone(),
            message: e.to_string(),
        })?;
        Ok(self.scores.get(key.as_str()).copied().unwrap_or(self.default))
    }
}

/// Everything the target density needs about the input molecule.
#[derive(Debug, Clone)]
pub struct TargetDistConfig {
    input: MolGraph,
    eta: Vec<f64>,
    scorers: Vec<Arc<dyn PropertyScorer>>,
    radius: usize,
    width: usize,
    max_nodes: Option<usize>,
    input_fp: Fingerprint,
    input_scores: Vec<f64>,
}

/// Breakdown of one density evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub valid: bool,
    pub similarity: f64,
    pub scores: Vec<f64>,
    pub deltas: Vec<f64>,
    pub log_density: f64,
}

impl TargetDistConfig {
    /// `eta = [η0, η1, …, ηM]` with one scorer per `ηi`, `i ≥ 1`.
    pub fn new(
        input: MolGraph,
        eta: Vec<f64>,
        scorers: Vec<Arc<dyn PropertyScorer>>,
    ) -> Result<Self, ScoreError> {
        Self::with_fingerprint(input, eta, scorers, DEFAULT_RADIUS, DEFAULT_WIDTH)
    }

    pub fn with_fingerprint(
        input: MolGraph,
        eta: Vec<f64>,
        scorers: Vec<Arc<dyn PropertyScorer>>,
        radius: usize,
        width: usize,
    ) -> Result<Self, ScoreError> {
        if eta.is_empty() {
            return Err(ScoreError::Config("eta needs at least the similarity weight".into()));
        }
        if let Some(e) = eta.iter().find(|e| !e.is_finite() || **e < 0.0) {
            return Err(ScoreError::Config(format!("eta must be finite and >= 0, got {e}")));
        }
        if scorers.len() + 1 != eta.len() {
            return Err(ScoreError::Config(format!(
                "{} eta values need {} scorers, got {}",
                eta.len(),
                eta.len() - 1,
                scorers.len()
            )));
        }
        if !is_valid(&input) {
            return Err(ScoreError::Config("input molecule is not valid".into()));
        }
        let input_fp = fingerprint_with(&input, radius, width)?;
        let input_scores = scorers
            .iter()
            .map(|s| s.score(&input))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TargetDistConfig {
            input,
            eta,
            scorers,
            radius,
            width,
            max_nodes: None,
            input_fp,
            input_scores,
        })
    }

    /// Restricts the support to graphs with at most `max_nodes` nodes.
    pub fn with_max_nodes(mut self, max_nodes: Option<usize>) -> Self {
        self.max_nodes = max_nodes;
        self
    }

    pub fn input(&self) -> &MolGraph {
        &self.input
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn scorers(&self) -> &[Arc<dyn PropertyScorer>] {
        &self.scorers
    }

    pub fn scorer_names(&self) -> Vec<String> {
        self.scorers.iter().map(|s| s.name().to_string()).collect()
    }

    pub fn max_nodes(&self) -> Option<usize> {
        self.max_nodes
    }

    pub fn input_scores(&self) -> &[f64] {
        &self.input_scores
    }

    pub fn similarity(&self, y: &MolGraph) -> Result<f64, ScoreError> {
        Ok(tanimoto(&self.input_fp, &fingerprint_with(y, self.radius, self.width)?)?)
    }

    pub fn in_support(&self, y: &MolGraph) -> bool {
        self.max_nodes.is_none_or(|m| y.num_nodes() <= m) && is_valid(y)
    }

    pub fn evaluate(&self, y: &MolGraph) -> Result<Evaluation, ScoreError> {
        if !self.in_support(y) {
            return Ok(Evaluation {
                valid: false,
                similarity: 0.0,
                scores: Vec::new(),
                deltas: Vec::new(),
                log_density: f64::NEG_INFINITY,
            });
        }
        let similarity = self.similarity(y)?;
        let scores = self
            .scorers
            .iter()
            .map(|s| s.score(y))
            .collect::<Result<Vec<_>, _>>()?;
        let deltas: Vec<f64> = scores
            .iter()
            .zip(&self.input_scores)
            .map(|(a, b)| a - b)
            .collect();
        let mut log_density = self.eta[0] * similarity;
        for (eta, d) in self.eta[1..].iter().zip(&deltas) {
            log_density += eta * d;
        }
        Ok(Evaluation {
            valid: true,
            similarity,
            scores,
            deltas,
            log_density,
        })
    }

    pub fn log_density(&self, y: &MolGraph) -> Result<f64, ScoreError> {
        Ok(self.evaluate(y)?.log_density)
    }
}

/// Unnormalised log target density of `y`; `−∞` outside the support.
pub fn log_target_density(cfg: &TargetDistConfig, y: &MolGraph) -> Result<f64, ScoreError> {
    cfg.log_density(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use crate::vocab::BondType;

    fn desk() -> Arc<SubstructureVocab> {
        SubstructureVocab::desk()
    }

    fn table(pairs: &[(&str, f64)]) -> LogpSurrogate {
        LogpSurrogate::new(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    #[test]
    fn logp_is_additive() {
        let v = desk();
        let g = parse_smiles("CCO", &v).unwrap();
        let s = table(&[("C", 0.5), ("O", -0.2)]);
        assert!((s.score(&g).unwrap() - 0.8).abs() < 1e-12);
        let zero = table(&[("C", 0.0), ("O", 0.0)]);
        assert_eq!(zero.score(&g).unwrap(), 0.0);
        let single = parse_smiles("C", &v).unwrap();
        assert_eq!(table(&[("C", 0.5)]).score(&single).unwrap(), 0.5);
        assert!(table(&[("C", 0.5)]).score(&g).is_err());
    }

    #[test]
    fn bundled_tables_cover_vocabularies() {
        LogpSurrogate::desk().covers(&SubstructureVocab::desk()).unwrap();
        LogpSurrogate::full().covers(&SubstructureVocab::full()).unwrap();
    }

    #[test]
    fn plogp_penalties() {
        let v = desk();
        let g = parse_smiles("CCO", &v).unwrap();
        let p = PlogpSurrogate::new(LogpSurrogate::desk(), 0.0, 0.0);
        assert_eq!(p.score(&g).unwrap(), LogpSurrogate::desk().score(&g).unwrap());
        let bz = parse_smiles("c1ccccc1", &v).unwrap();
        assert_eq!(long_cycle_count(&bz), 0);
        let full = SubstructureVocab::full();
        let eight = parse_smiles("C1CCCCCCC1", &full).unwrap();
        assert_eq!(long_cycle_count(&eight), 1);
        let seven = parse_smiles("C1CCCCCC1C", &full).unwrap();
        assert_eq!(seven.num_nodes(), 2);
        assert_eq!(long_cycle_count(&seven), 1);
    }

    #[test]
    fn external_table_lookup() {
        let v = desk();
        let t: BTreeMap<String, f64> = [("C".to_string(), 0.3)].into();
        let s = ExternalTableScorer::from_table("qed", t, &v, -1.0);
        assert_eq!(s.score(&parse_smiles("C", &v).unwrap()).unwrap(), 0.3);
        assert_eq!(s.score(&parse_smiles("CC", &v).unwrap()).unwrap(), -1.0);
        let empty = ExternalTableScorer::from_table("qed", BTreeMap::new(), &v, -1.0);
        assert_eq!(empty.score(&parse_smiles("C", &v).unwrap()).unwrap(), -1.0);
        assert!(ExternalTableScorer::load("x", "/nonexistent/table.tsv", &v, -1.0).is_err());
    }

    #[test]
    fn density_at_input_is_eta0() {
        let v = desk();
        let x = parse_smiles("CCO", &v).unwrap();
        let cfg = TargetDistConfig::new(
            x.clone(),
            vec![1.0, 0.3],
            vec![Arc::new(PlogpSurrogate::desk())],
        )
        .unwrap();
        assert!((log_target_density(&cfg, &x).unwrap() - 1.0).abs() < 1e-12);
        let bad = MolGraph::new(v.clone(), vec![0, 0], vec![]).unwrap();
        assert_eq!(log_target_density(&cfg, &bad).unwrap(), f64::NEG_INFINITY);
        let over = MolGraph::new(
            v,
            vec![2, 0, 0],
            vec![Edge::new(0, 1, BondType::Single), Edge::new(0, 2, BondType::Single)],
        )
        .unwrap();
        let capped = cfg.clone().with_max_nodes(Some(2));
        assert_eq!(capped.log_density(&over).unwrap(), f64::NEG_INFINITY);
        assert!(cfg.log_density(&over).unwrap().is_finite());
    }

    #[test]
    fn config_checks() {
        let v = desk();
        let x = parse_smiles("C", &v).unwrap();
        assert!(TargetDistConfig::new(x.clone(), vec![1.0, -0.1], vec![Arc::new(NodeCount)]).is_err());
        assert!(TargetDistConfig::new(x.clone(), vec![1.0, 0.1], vec![]).is_err());
        assert!(TargetDistConfig::new(x, vec![], vec![]).is_err());
    }

    #[test]
    fn qed_surrogate_in_unit_interval() {
        let v = desk();
        let q = QedSurrogate {
            logp: LogpSurrogate::desk(),
        };
        for s in ["C", "c1ccccc1CCO", "CCCCCCCCCCCCCCCC"] {
            let x = q.score(&parse_smiles(s, &v).unwrap()).unwrap();
            assert!((0.0..=1.0).contains(&x));
        }
    }
}
