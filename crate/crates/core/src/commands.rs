//! The four operator commands behind the `mimosa` binary.
//!
//! Every command writes its files plus `<command>.manifest.json` into the
//! output directory. Configuration problems map to exit code 2, a failed
//! verification to exit code 1.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gnn::synthetic::synthetic_corpus;
use crate::gnn::{auc, evaluate_bgnn, evaluate_mgnn, load_checkpoint, pretrain, save_checkpoint, TrainReport};
use crate::graph::MolGraph;
use crate::metrics::{compute_metrics, read_results, write_results, MetricReport, ResultRow};
use crate::oracle::{empirical_vs_exact, enumerate_states, exact_report, OracleReport};
use crate::profile::{sha256_hex, ModelKind, RunProfile, SeedSource};
use crate::properties::TargetDistConfig;
use crate::proposal::{PretrainedModels, SubstructureModel, UniformModel};
use crate::sampler::{run_chain, run_mimosa, KernelMode, MhChain, TraceRecord};
use crate::smiles::{parse_smiles, read_corpus, write_smiles};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Config(String),
    #[error("verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Verification(_) => EXIT_VERIFY,
            CommandError::Config(_) | CommandError::Output { .. } => EXIT_CONFIG,
        }
    }
}

fn config(e: impl std::fmt::Display) -> CommandError {
    CommandError::Config(e.to_string())
}

fn write_file(path: &Path, text: &str) -> Result<(), CommandError> {
    std::fs::write(path, text).map_err(|source| CommandError::Output {
        path: path.display().to_string(),
        source,
    })
}

fn prepare_out(out: &Path) -> Result<(), CommandError> {
    std::fs::create_dir_all(out).map_err(|source| CommandError::Output {
        path: out.display().to_string(),
        source,
    })
}

fn read_input(path: &Path) -> Result<String, CommandError> {
    std::fs::read_to_string(path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    fn of(path: &Path) -> Option<Self> {
        std::fs::read(path).ok().map(|b| FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&b),
        })
    }
}

/// Everything needed to rerun a command bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub profile_path: Option<String>,
    pub profile_sha256: String,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// The profile after defaults were filled in.
    pub effective_profile: crate::profile::ProfileFile,
}

fn write_manifest(
    command: &str,
    profile: &RunProfile,
    out: &Path,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> Result<Manifest, CommandError> {
    let m = Manifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        profile_path: profile.path.as_ref().map(|p| p.display().to_string()),
        profile_sha256: profile.hash.clone(),
        seed: profile.seed,
        seed_source: profile.seed_source,
        inputs: inputs.iter().filter_map(|p| FileDigest::of(p)).collect(),
        outputs: outputs.iter().filter_map(|p| FileDigest::of(p)).collect(),
        effective_profile: profile.file.clone(),
    };
    let text = serde_json::to_string_pretty(&m).expect("manifest serialises");
    write_file(&out.join(format!("{command}.manifest.json")), &(text + "\n"))?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub train_graphs: usize,
    pub holdout_graphs: usize,
    pub skipped_lines: usize,
    pub report: TrainReport,
    pub mgnn_holdout_accuracy: Option<f64>,
    pub bgnn_holdout_auc: Option<f64>,
    pub seconds: f64,
}

/// Trains both predictors and writes `checkpoint.json`,
/// `training_curve.tsv` and `pretrain_report.json`.
pub fn cmd_pretrain(profile: &RunProfile, out: &Path) -> Result<PretrainSummary, CommandError> {
    let vocab = profile.vocab().map_err(config)?;
    let t = &profile.file.train;
    let mut inputs = Vec::new();
    let (mut corpus, skipped) = match profile.corpus_path() {
        None => (
            synthetic_corpus(&vocab, t.synthetic_graphs, t.min_nodes, t.max_nodes, profile.seed),
            0,
        ),
        Some(path) => {
            let text = read_input(&path)?;
            inputs.push(path);
            let entries = read_corpus(&text);
            let graphs: Vec<MolGraph> = entries
                .iter()
                .filter_map(|e| parse_smiles(&e.smiles, &vocab).ok())
                .collect();
            let skipped = entries.len() - graphs.len();
            (graphs, skipped)
        }
    };
    if corpus.is_empty() {
        return Err(config("training corpus is empty"));
    }
    corpus.shuffle(&mut ChaCha8Rng::seed_from_u64(profile.seed ^ 0x5eed));
    let holdout = ((corpus.len() as f64) * t.holdout).floor() as usize;
    let held = corpus.split_off(corpus.len() - holdout);
    if corpus.is_empty() {
        return Err(config("holdout leaves no training graphs"));
    }

    let clock = Instant::now();
    let (pair, report) = pretrain(&corpus, profile.gnn_shape(vocab.len()), &profile.train_config()).map_err(config)?;
    let seconds = clock.elapsed().as_secs_f64();
    let summary = PretrainSummary {
        train_graphs: corpus.len(),
        holdout_graphs: held.len(),
        skipped_lines: skipped,
        mgnn_holdout_accuracy: (!held.is_empty()).then(|| evaluate_mgnn(&pair.mgnn, &held)),
        bgnn_holdout_auc: (!held.is_empty()).then(|| auc(&evaluate_bgnn(&pair.bgnn, &held))),
        report,
        seconds,
    };

    prepare_out(out)?;
    let ckpt = out.join("checkpoint.json");
    save_checkpoint(&ckpt, &pair, &vocab).map_err(config)?;
    let mut curve = String::from("epoch\tmgnn_loss\tbgnn_loss\n");
    for (i, (m, b)) in summary.report.mgnn_loss.iter().zip(&summary.report.bgnn_loss).enumerate() {
        curve.push_str(&format!("{}\t{m}\t{b}\n", i + 1));
    }
    let curve_path = out.join("training_curve.tsv");
    write_file(&curve_path, &curve)?;
    let report_path = out.join("pretrain_report.json");
    write_file(&report_path, &(serde_json::to_string_pretty(&summary).expect("serialises") + "\n"))?;
    write_manifest("pretrain", profile, out, &inputs, &[ckpt, curve_path, report_path])?;
    Ok(summary)
}

#[derive(Serialize)]
struct TraceLine<'a> {
    input: usize,
    #[serde(flatten)]
    record: &'a TraceRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSummary {
    pub properties: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub seconds: f64,
}

fn load_model(profile: &RunProfile, vocab_len: usize) -> Result<(Box<dyn SubstructureModel>, Option<PathBuf>), CommandError> {
    match profile.file.model.kind {
        ModelKind::Uniform => Ok((Box::new(UniformModel::new(vocab_len)), None)),
        ModelKind::Pretrained => {
            let path = profile
                .checkpoint()
                .ok_or_else(|| config("model.kind = pretrained needs paths.checkpoint"))?;
            if !path.is_file() {
                return Err(config(format!("missing checkpoint {}", path.display())));
            }
            let vocab = profile.vocab().map_err(config)?;
            let pair = load_checkpoint(&path, &vocab).map_err(config)?;
            Ok((Box::new(PretrainedModels::new(pair)), Some(path)))
        }
    }
}

/// Optimises each input SMILES with its own seed (`seed + index`).
/// Writes `results.tsv`, `phi.tsv` and `trace.jsonl`.
pub fn cmd_optimize(profile: &RunProfile, inputs_file: &Path, out: &Path) -> Result<OptimizeSummary, CommandError> {
    if profile.file.kernel.mode != KernelMode::Population {
        return Err(config("optimize runs the population sampler; set kernel.mode = \"population\""));
    }
    let vocab = profile.vocab().map_err(config)?;
    let scorers = profile.scorers(&vocab).map_err(config)?;
    let (model, ckpt) = load_model(profile, vocab.len())?;
    let entries = read_corpus(&read_input(inputs_file)?);
    let properties: Vec<String> = scorers.iter().map(|s| s.name().to_string()).collect();
    let kernel = profile.kernel_config();
    let run = profile.run_config();
    let cfg = profile.proposal_config();

    let clock = Instant::now();
    let mut rows = Vec::with_capacity(entries.len());
    let mut phi = String::from("input\tsmiles\tlog_density\titeration\tedits\n");
    let mut trace = String::new();
    for (i, e) in entries.iter().enumerate() {
        let x = match parse_smiles(&e.smiles, &vocab) {
            Ok(x) => x,
            Err(err) => {
                rows.push(ResultRow::failed(&e.smiles, err.to_string()));
                continue;
            }
        };
        let target = match TargetDistConfig::new(x, profile.file.target.eta.clone(), scorers.clone()) {
            Ok(t) => t.with_max_nodes(profile.file.target.max_nodes),
            Err(err) => {
                rows.push(ResultRow::failed(&e.smiles, err.to_string()));
                continue;
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(profile.seed.wrapping_add(i as u64));
        let result = match run_mimosa(&run, &kernel, &target, model.as_ref(), &cfg, &mut rng) {
            Ok(r) => r,
            Err(err) => {
                rows.push(ResultRow::failed(&e.smiles, err.to_string()));
                continue;
            }
        };
        let best = &result.best;
        let row = target
            .evaluate(&best.graph)
            .map_err(|e| e.to_string())
            .and_then(|ev| {
                let smiles = write_smiles(&best.graph).map_err(|e| e.to_string())?;
                Ok(ResultRow {
                    input: e.smiles.clone(),
                    output: Some(smiles),
                    similarity: ev.similarity,
                    deltas: ev.deltas,
                    log_density: ev.log_density,
                    error: None,
                })
            })
            .unwrap_or_else(|err| ResultRow::failed(&e.smiles, err));
        rows.push(row);
        for p in &result.phi {
            let edits: Vec<String> = p.lineage.iter().map(|s| s.op.to_string()).collect();
            phi.push_str(&format!(
                "{i}\t{}\t{}\t{}\t{}\n",
                write_smiles(&p.graph).unwrap_or_default(),
                p.log_density,
                p.iteration,
                edits.join(",")
            ));
        }
        for r in &result.trace.records {
            trace.push_str(&serde_json::to_string(&TraceLine { input: i, record: r }).expect("serialises"));
            trace.push('\n');
        }
    }
    let seconds = clock.elapsed().as_secs_f64();

    prepare_out(out)?;
    let results_path = out.join("results.tsv");
    write_file(&results_path, &write_results(&properties, &rows))?;
    let phi_path = out.join("phi.tsv");
    write_file(&phi_path, &phi)?;
    let trace_path = out.join("trace.jsonl");
    write_file(&trace_path, &trace)?;
    let mut used = vec![inputs_file.to_path_buf()];
    used.extend(ckpt);
    write_manifest("optimize", profile, out, &used, &[results_path, phi_path, trace_path])?;
    Ok(OptimizeSummary {
        properties,
        rows,
        seconds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub oracle: OracleReport,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    pub seconds: f64,
}

impl VerifyReport {
    pub fn to_text(&self) -> String {
        let o = &self.oracle;
        let mut s = format!(
            "states {}  max_nodes {}  convention {:?}  gamma {:?}\n",
            o.states, o.max_nodes, o.convention, o.gamma
        );
        for c in &self.checks {
            s.push_str(&format!(
                "{:<18} {:.3e}  (tolerance {:.1e})  {}\n",
                c.name,
                c.value,
                c.tolerance,
                if c.passed { "ok" } else { "FAILED" }
            ));
        }
        s
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
    }
}

/// Exact checks on the enumerable space plus a long chain.
pub fn run_verification(profile: &RunProfile) -> Result<VerifyReport, CommandError> {
    let v = &profile.file.verify;
    let vocab = profile.verify_vocab().map_err(config)?;
    let scorers = profile.verify_scorers(&vocab).map_err(config)?;
    let space = enumerate_states(&vocab, v.max_nodes, &v.allowed_bonds).map_err(config)?;
    let input = match &v.input {
        Some(s) => parse_smiles(s, &vocab).map_err(|e| config(format!("verify.input: {e}")))?,
        None => space.states[0].clone(),
    };
    let target = TargetDistConfig::new(input.clone(), v.eta.clone(), scorers)
        .map_err(config)?
        .with_max_nodes(Some(v.max_nodes));
    let model = UniformModel::new(vocab.len());
    let kernel = profile.verify_kernel();
    let cfg = profile.verify_proposal_config();

    let clock = Instant::now();
    let (mut oracle, _, p) = exact_report(&space, &kernel, &target, &model, &cfg).map_err(config)?;
    let check = |name: &str, value: f64, tolerance: f64| CheckResult {
        name: name.into(),
        value,
        tolerance,
        passed: value <= tolerance,
    };
    let mut checks = vec![
        check("row_sums", oracle.max_row_sum_error, 1e-12),
        check("detailed_balance", oracle.max_balance_violation, v.balance_tolerance),
        check("stationary_linf", oracle.stationary_linf, v.stationary_tolerance),
    ];
    if v.chain_steps > 0 {
        let mut chain = MhChain::new(input, &model, &target, kernel, cfg).map_err(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
        let visits = run_chain(&mut chain, v.chain_steps, &mut rng).map_err(config)?;
        let tv = empirical_vs_exact(&space, &visits, &p).map_err(config)?;
        oracle.chain_steps = v.chain_steps;
        oracle.chain_tv = Some(tv);
        checks.push(check("chain_tv", tv, v.tv_tolerance));
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        oracle,
        checks,
        passed,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

/// Writes `verify_report.json` and `verify_report.txt`; a breached
/// tolerance is an error naming the failing checks.
pub fn cmd_verify(profile: &RunProfile, out: &Path) -> Result<VerifyReport, CommandError> {
    let report = run_verification(profile)?;
    prepare_out(out)?;
    let json = out.join("verify_report.json");
    write_file(&json, &(serde_json::to_string_pretty(&report).expect("serialises") + "\n"))?;
    let txt = out.join("verify_report.txt");
    write_file(&txt, &report.to_text())?;
    write_manifest("verify", profile, out, &[], &[json, txt])?;
    if report.passed {
        Ok(report)
    } else {
        Err(CommandError::Verification(report.failures()))
    }
}

/// Scores a results file against the profile's success rule.
/// Writes `metrics.json` and `metrics.txt`.
pub fn cmd_metrics(profile: &RunProfile, results: &Path, out: &Path) -> Result<MetricReport, CommandError> {
    let (properties, rows) = read_results(&read_input(results)?).map_err(config)?;
    let rule = profile.success_rule().map_err(config)?;
    if !properties.is_empty() && rule.min_deltas.len() != properties.len() {
        return Err(config(format!(
            "success rule has {} thresholds but the results have {} properties",
            rule.min_deltas.len(),
            properties.len()
        )));
    }
    let report = compute_metrics(&properties, &rows, &rule);
    prepare_out(out)?;
    let json = out.join("metrics.json");
    write_file(&json, &(serde_json::to_string_pretty(&report).expect("serialises") + "\n"))?;
    let txt = out.join("metrics.txt");
    write_file(&txt, &report.to_text())?;
    write_manifest("metrics", profile, out, &[results.to_path_buf()], &[json, txt])?;
    Ok(report)
}
