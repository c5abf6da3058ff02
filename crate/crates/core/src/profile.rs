//! Run profiles: one TOML file with every knob a command reads.
//!
//! Relative paths are resolved against the profile's directory. The only
//! setting taken from the environment is the RNG seed (`MIMOSA_SEED`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gnn::{GnnShape, TrainConfig};
use crate::metrics::SuccessRule;
use crate::properties::{
    ExternalTableScorer, LogpSurrogate, NodeCount, PlogpSurrogate, PropertyScorer, QedSurrogate, ScoreError,
};
use crate::proposal::{AddMode, ProposalConfig};
use crate::sampler::{KernelConfig, KernelMode, RunConfig, WeightConvention};
use crate::vocab::{BondType, SubstructureVocab};

pub const SEED_ENV: &str = "MIMOSA_SEED";

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot read profile {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("profile {path}: {message}")]
    Syntax { path: String, message: String },
    #[error("profile: {0}")]
    Invalid(String),
    #[error("profile: missing file {0}")]
    MissingFile(String),
    #[error("profile: {0}")]
    Score(#[from] ScoreError),
}

fn invalid(msg: impl Into<String>) -> ProfileError {
    ProfileError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// `desk`, `full`, `co` or a vocabulary file.
    pub vocab: String,
    /// `synthetic` or a SMILES corpus file.
    pub corpus: String,
    /// Checkpoint read by `optimize` when the model is pretrained.
    pub checkpoint: Option<String>,
    /// External score tables, used as `table:<name>` properties.
    pub tables: BTreeMap<String, String>,
    /// `desk`, `full` or a contribution file. Defaults to the table matching
    /// the vocabulary.
    pub logp_table: Option<String>,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            vocab: "desk".into(),
            corpus: "synthetic".into(),
            checkpoint: None,
            tables: BTreeMap::new(),
            logp_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    /// `plogp_surrogate`, `logp_surrogate`, `qed_surrogate`, `node_count`
    /// or `table:<name>`.
    pub properties: Vec<String>,
    /// Similarity weight first, then one weight per property.
    pub eta: Vec<f64>,
    pub max_nodes: Option<usize>,
    pub sa_c1: f64,
    pub sa_c2: f64,
    /// Score for molecules missing from an external table.
    pub table_default: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        TargetSection {
            properties: vec!["plogp_surrogate".into()],
            eta: vec![1.0, 0.3],
            max_nodes: None,
            sa_c1: PlogpSurrogate::DEFAULT_C1,
            sa_c2: PlogpSurrogate::DEFAULT_C2,
            table_default: ExternalTableScorer::DEFAULT_PENALTY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub gamma: [f64; 3],
    pub convention: WeightConvention,
    pub mode: KernelMode,
    /// Grow threshold on ẑ; absent means a Bernoulli draw.
    pub add_threshold: Option<f64>,
    pub allowed_bonds: Vec<BondType>,
    pub canon_cap: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            gamma: [0.5, 0.25, 0.25],
            convention: WeightConvention::Paper,
            mode: KernelMode::Population,
            add_threshold: None,
            allowed_bonds: vec![BondType::Single],
            canon_cap: ProposalConfig::default().canon_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub particles: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        let r = RunConfig::default();
        RunSection {
            particles: r.particles,
            iterations: r.iterations,
            burn_in: r.burn_in,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Uniform,
    Pretrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub layers: usize,
    pub hidden: usize,
    pub head_hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: ModelKind::Uniform,
            layers: 3,
            hidden: 32,
            head_hidden: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Size of the generated corpus when `paths.corpus = "synthetic"`.
    pub synthetic_graphs: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Fraction of the corpus held out for the reported accuracy.
    pub holdout: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: 10,
            batch_size: 32,
            lr: 3e-3,
            synthetic_graphs: 10_000,
            min_nodes: 2,
            max_nodes: 16,
            holdout: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub vocab: String,
    pub max_nodes: usize,
    /// Input molecule of the target; the first enumerated state if absent.
    pub input: Option<String>,
    pub properties: Vec<String>,
    pub eta: Vec<f64>,
    pub gamma: [f64; 3],
    pub convention: WeightConvention,
    pub allowed_bonds: Vec<BondType>,
    pub chain_steps: u64,
    pub balance_tolerance: f64,
    pub stationary_tolerance: f64,
    pub tv_tolerance: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            vocab: "co".into(),
            max_nodes: 3,
            input: None,
            properties: vec!["node_count".into()],
            eta: vec![1.0, 0.5],
            gamma: [0.5, 0.25, 0.25],
            convention: WeightConvention::TextbookMh,
            allowed_bonds: vec![BondType::Single],
            chain_steps: 1_000_000,
            balance_tolerance: 1e-9,
            stationary_tolerance: 1e-9,
            tv_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// A preset (`plogp`, `qed`, `drd`, `qed_plogp`, `drd_plogp`) or
    /// `custom`, which reads the two fields below.
    pub rule: String,
    pub min_similarity: Option<f64>,
    pub min_deltas: Option<Vec<f64>>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            rule: "plogp".into(),
            min_similarity: None,
            min_deltas: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileFile {
    pub paths: PathsSection,
    pub target: TargetSection,
    pub kernel: KernelSection,
    pub run: RunSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub verify: VerifySection,
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Profile,
    Environment,
    Flag,
}

/// A checked profile plus where it came from.
#[derive(Debug, Clone)]
pub struct RunProfile {
    pub file: ProfileFile,
    pub path: Option<PathBuf>,
    pub base_dir: PathBuf,
    /// SHA-256 of the profile text, hex.
    pub hash: String,
    pub seed: u64,
    pub seed_source: SeedSource,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunProfile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProfileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut p = Self::from_str_in(&text, &base, &path.display().to_string())?;
        p.path = Some(path.to_path_buf());
        Ok(p)
    }

    /// Parses profile text; relative paths resolve against `base_dir`.
    pub fn from_str_in(text: &str, base_dir: &Path, name: &str) -> Result<Self, ProfileError> {
        let file: ProfileFile = toml::from_str(text).map_err(|e| ProfileError::Syntax {
            path: name.to_string(),
            message: e.to_string(),
        })?;
        let p = RunProfile {
            seed: file.run.seed,
            file,
            path: None,
            base_dir: base_dir.to_path_buf(),
            hash: sha256_hex(text.as_bytes()),
            seed_source: SeedSource::Profile,
        };
        p.validate()?;
        Ok(p)
    }

    /// Built-in defaults, as if loaded from an empty file.
    pub fn defaults() -> Self {
        Self::from_str_in("", Path::new("."), "<defaults>").expect("defaults are valid")
    }

    /// `flag` beats `MIMOSA_SEED`, which beats the profile.
    pub fn apply_seed(&mut self, flag: Option<u64>) -> Result<(), ProfileError> {
        if let Some(s) = flag {
            self.seed = s;
            self.seed_source = SeedSource::Flag;
        } else if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| invalid(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?;
            self.seed_source = SeedSource::Environment;
        }
        Ok(())
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn existing(&self, p: &str) -> Result<PathBuf, ProfileError> {
        let path = self.resolve(p);
        if path.is_file() {
            Ok(path)
        } else {
            Err(ProfileError::MissingFile(path.display().to_string()))
        }
    }

    fn validate(&self) -> Result<(), ProfileError> {
        let f = &self.file;
        self.vocab()?;
        self.verify_vocab()?;
        if f.paths.corpus != "synthetic" {
            self.existing(&f.paths.corpus)?;
        }
        for path in f.paths.tables.values() {
            self.existing(path)?;
        }
        if let Some(t) = &f.paths.logp_table {
            if t != "desk" && t != "full" {
                self.existing(t)?;
            }
        }
        for name in f.target.properties.iter().chain(&f.verify.properties) {
            self.check_property_name(name)?;
        }
        if f.target.eta.len() != f.target.properties.len() + 1 {
            return Err(invalid(format!(
                "target.eta needs {} values (similarity plus one per property), got {}",
                f.target.properties.len() + 1,
                f.target.eta.len()
            )));
        }
        if f.verify.eta.len() != f.verify.properties.len() + 1 {
            return Err(invalid("verify.eta needs one value more than verify.properties"));
        }
        if f.target.eta.iter().chain(&f.verify.eta).any(|e| !e.is_finite() || *e < 0.0) {
            return Err(invalid("eta values must be finite and >= 0"));
        }
        if !(f.target.sa_c1.is_finite() && f.target.sa_c2.is_finite()) {
            return Err(invalid("target.sa_c1 and sa_c2 must be finite"));
        }
        self.kernel_config().validate().map_err(|e| invalid(e.to_string()))?;
        self.verify_kernel().validate().map_err(|e| invalid(e.to_string()))?;
        self.run_config().validate().map_err(|e| invalid(e.to_string()))?;
        if let Some(t) = f.kernel.add_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(invalid("kernel.add_threshold must lie in [0, 1]"));
            }
        }
        if f.kernel.allowed_bonds.is_empty() || f.verify.allowed_bonds.is_empty() {
            return Err(invalid("allowed_bonds must not be empty"));
        }
        if f.model.layers == 0 || f.model.hidden == 0 || f.model.head_hidden == 0 {
            return Err(invalid("model dimensions must be positive"));
        }
        let t = &f.train;
        if t.epochs == 0 || t.batch_size == 0 || !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(invalid("train.epochs, batch_size and lr must be positive"));
        }
        if t.min_nodes == 0 || t.min_nodes > t.max_nodes {
            return Err(invalid("train.min_nodes must be in 1..=max_nodes"));
        }
        if !(0.0..1.0).contains(&t.holdout) {
            return Err(invalid("train.holdout must lie in [0, 1)"));
        }
        let v = &f.verify;
        if v.max_nodes == 0 {
            return Err(invalid("verify.max_nodes must be at least 1"));
        }
        if [v.balance_tolerance, v.stationary_tolerance, v.tv_tolerance]
            .iter()
            .any(|t| !(*t >= 0.0 && t.is_finite()))
        {
            return Err(invalid("verify tolerances must be finite and >= 0"));
        }
        self.success_rule()?;
        Ok(())
    }

    fn named_vocab(&self, spec: &str) -> Result<Arc<SubstructureVocab>, ProfileError> {
        match spec {
            "desk" => Ok(SubstructureVocab::desk()),
            "full" => Ok(SubstructureVocab::full()),
            "co" => Ok(Arc::new(
                SubstructureVocab::atoms(&[("C", 4), ("O", 2)]).expect("two-atom vocabulary"),
            )),
            path => {
                let p = self.existing(path)?;
                SubstructureVocab::load(&p)
                    .map(Arc::new)
                    .map_err(|e| invalid(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn vocab(&self) -> Result<Arc<SubstructureVocab>, ProfileError> {
        self.named_vocab(&self.file.paths.vocab)
    }

    pub fn verify_vocab(&self) -> Result<Arc<SubstructureVocab>, ProfileError> {
        self.named_vocab(&self.file.verify.vocab)
    }

    fn check_property_name(&self, name: &str) -> Result<(), ProfileError> {
        match name {
            "plogp_surrogate" | "logp_surrogate" | "qed_surrogate" | "node_count" => Ok(()),
            _ => match name.strip_prefix("table:") {
                Some(t) if self.file.paths.tables.contains_key(t) => Ok(()),
                Some(t) => Err(invalid(format!("property `{name}` needs paths.tables.{t}"))),
                None => Err(invalid(format!("unknown property `{name}`"))),
            },
        }
    }

    fn logp_for(&self, vocab: &Arc<SubstructureVocab>, vocab_spec: &str) -> Result<LogpSurrogate, ProfileError> {
        let spec = self.file.paths.logp_table.as_deref().unwrap_or(vocab_spec);
        let table = match spec {
            "desk" => LogpSurrogate::desk(),
            "full" => LogpSurrogate::full(),
            // the two-atom space only needs carbon and oxygen
            "co" => LogpSurrogate::desk(),
            path => LogpSurrogate::load(self.existing(path)?)?,
        };
        table.covers(vocab)?;
        Ok(table)
    }

    fn build_scorers(
        &self,
        names: &[String],
        vocab: &Arc<SubstructureVocab>,
        vocab_spec: &str,
    ) -> Result<Vec<Arc<dyn PropertyScorer>>, ProfileError> {
        let t = &self.file.target;
        names
            .iter()
            .map(|name| -> Result<Arc<dyn PropertyScorer>, ProfileError> {
                Ok(match name.as_str() {
                    "plogp_surrogate" => Arc::new(PlogpSurrogate::new(self.logp_for(vocab, vocab_spec)?, t.sa_c1, t.sa_c2)),
                    "logp_surrogate" => Arc::new(self.logp_for(vocab, vocab_spec)?),
                    "qed_surrogate" => Arc::new(QedSurrogate {
                        logp: self.logp_for(vocab, vocab_spec)?,
                    }),
                    "node_count" => Arc::new(NodeCount),
                    other => {
                        let table = other.strip_prefix("table:").unwrap_or(other);
                        let path = self.existing(&self.file.paths.tables[table])?;
                        Arc::new(ExternalTableScorer::load(table, path, vocab, t.table_default)?)
                    }
                })
            })
            .collect()
    }

    pub fn scorers(&self, vocab: &Arc<SubstructureVocab>) -> Result<Vec<Arc<dyn PropertyScorer>>, ProfileError> {
        self.build_scorers(&self.file.target.properties, vocab, &self.file.paths.vocab)
    }

    pub fn verify_scorers(&self, vocab: &Arc<SubstructureVocab>) -> Result<Vec<Arc<dyn PropertyScorer>>, ProfileError> {
        self.build_scorers(&self.file.verify.properties, vocab, &self.file.verify.vocab)
    }

    pub fn kernel_config(&self) -> KernelConfig {
        let k = &self.file.kernel;
        KernelConfig {
            gamma: k.gamma,
            convention: k.convention,
            mode: k.mode,
        }
    }

    pub fn proposal_config(&self) -> ProposalConfig {
        let k = &self.file.kernel;
        ProposalConfig {
            allowed_bonds: k.allowed_bonds.clone(),
            canon_cap: k.canon_cap,
            add_mode: k.add_threshold.map_or(AddMode::Bernoulli, AddMode::Threshold),
        }
    }

    pub fn run_config(&self) -> RunConfig {
        let r = &self.file.run;
        RunConfig {
            particles: r.particles,
            iterations: r.iterations,
            burn_in: r.burn_in,
        }
    }

    pub fn verify_kernel(&self) -> KernelConfig {
        KernelConfig {
            gamma: self.file.verify.gamma,
            convention: self.file.verify.convention,
            mode: KernelMode::MhChain,
        }
    }

    pub fn verify_proposal_config(&self) -> ProposalConfig {
        ProposalConfig {
            allowed_bonds: self.file.verify.allowed_bonds.clone(),
            ..ProposalConfig::default()
        }
    }

    pub fn gnn_shape(&self, vocab_len: usize) -> GnnShape {
        let m = &self.file.model;
        GnnShape {
            layers: m.layers,
            hidden: m.hidden,
            vocab: vocab_len,
            head_hidden: m.head_hidden,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.file.train;
        TrainConfig {
            batch_size: t.batch_size,
            epochs: t.epochs,
            lr: t.lr,
            seed: self.seed,
        }
    }

    /// Checkpoint path for `optimize`; required for pretrained models.
    pub fn checkpoint(&self) -> Option<PathBuf> {
        self.file.paths.checkpoint.as_deref().map(|p| self.resolve(p))
    }

    pub fn corpus_path(&self) -> Option<PathBuf> {
        (self.file.paths.corpus != "synthetic").then(|| self.resolve(&self.file.paths.corpus))
    }

    pub fn success_rule(&self) -> Result<SuccessRule, ProfileError> {
        let m = &self.file.metrics;
        let rule = if m.rule == "custom" {
            match (m.min_similarity, &m.min_deltas) {
                (Some(s), Some(d)) => SuccessRule {
                    min_similarity: s,
                    min_deltas: d.clone(),
                },
                _ => return Err(invalid("metrics.rule = custom needs min_similarity and min_deltas")),
            }
        } else {
            let mut r = SuccessRule::preset(&m.rule).ok_or_else(|| invalid(format!("unknown metrics.rule `{}`", m.rule)))?;
            if let Some(s) = m.min_similarity {
                r.min_similarity = s;
            }
            if let Some(d) = &m.min_deltas {
                r.min_deltas = d.clone();
            }
            r
        };
        Ok(rule)
    }
}
