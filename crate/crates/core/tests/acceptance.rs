//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Built without the libtest harness so the lines always reach stdout.
//! Exits nonzero when a criterion fails that is not in `KNOWN_UNMET`.
//! Known failures still print FAIL with the measured numbers.

use std::collections::BTreeSet;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use mimosa::chem::is_valid;
use mimosa::commands::cmd_optimize;
use mimosa::gnn::synthetic::{random_tree, synthetic_corpus};
use mimosa::gnn::{
    auc, evaluate_bgnn, evaluate_mgnn, pretrain, Batch, Gnn, GnnShape, GraphInput, HeadKind, Targets, TrainConfig,
};
use mimosa::metrics::read_results;
use mimosa::oracle::{empirical_vs_exact, enumerate_states, exact_report, StateSpace};
use mimosa::profile::RunProfile;
use mimosa::properties::{NodeCount, TargetDistConfig};
use mimosa::proposal::{ProposalConfig, UniformModel};
use mimosa::sampler::{run_chain, KernelConfig, MhChain, WeightConvention};
use mimosa::smiles::read_corpus;
use mimosa::{graph_isomorphic, parse_smiles, write_smiles, BondType, SubstructureVocab};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that cannot be met as stated; the README explains why.
const KNOWN_UNMET: &[u32] = &[7];

const STATIONARY_TOL: f64 = 1e-9;
const BALANCE_TOL: f64 = 1e-9;
const NEGATIVE_CONTROL_MIN: f64 = 1e-6;
const TV_TOL: f64 = 0.05;
const GRAD_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;
const ACCURACY_MIN: f64 = 0.95;
const AUC_MIN: f64 = 0.95;
const SUCCESS_MIN: f64 = 0.5;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

struct OracleSetup {
    space: StateSpace,
    target: TargetDistConfig,
    model: UniformModel,
}

fn oracle_setup() -> OracleSetup {
    let vocab = Arc::new(SubstructureVocab::atoms(&[("C", 4), ("O", 2)]).unwrap());
    let space = enumerate_states(&vocab, 3, &[BondType::Single]).unwrap();
    let target = TargetDistConfig::new(space.states[0].clone(), vec![1.0, 0.5], vec![Arc::new(NodeCount)])
        .unwrap()
        .with_max_nodes(Some(3));
    OracleSetup {
        space,
        target,
        model: UniformModel::new(vocab.len()),
    }
}

fn verified_kernel() -> KernelConfig {
    KernelConfig {
        gamma: [0.5, 0.25, 0.25],
        convention: WeightConvention::TextbookMh,
        ..KernelConfig::default()
    }
}

fn criteria_1_2(o: &OracleSetup) -> Vec<Outcome> {
    let cfg = ProposalConfig::default();
    let clock = Instant::now();
    let (r, _, _) = exact_report(&o.space, &verified_kernel(), &o.target, &o.model, &cfg).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let negative = KernelConfig {
        gamma: [0.5, 0.4, 0.1],
        ..verified_kernel()
    };
    let (n, _, _) = exact_report(&o.space, &negative, &o.target, &o.model, &cfg).unwrap();
    vec![
        Outcome {
            id: 1,
            name: "stationarity",
            passed: r.stationary_linf <= STATIONARY_TOL && secs < 10.0,
            detail: format!(
                "{} states, L-inf {:.2e} (<= {STATIONARY_TOL:.0e}), {secs:.2}s (< 10s)",
                r.states, r.stationary_linf
            ),
        },
        Outcome {
            id: 2,
            name: "detailed balance",
            passed: r.max_balance_violation <= BALANCE_TOL && n.max_balance_violation > NEGATIVE_CONTROL_MIN,
            detail: format!(
                "violation {:.2e} (<= {BALANCE_TOL:.0e}); negative control {:.2e} (> {NEGATIVE_CONTROL_MIN:.0e})",
                r.max_balance_violation, n.max_balance_violation
            ),
        },
    ]
}

/// Returns the outcome and the number of visited states outside the valid space.
fn criterion_3(o: &OracleSetup) -> (Outcome, usize) {
    let cfg = ProposalConfig::default();
    let (_, _, p) = exact_report(&o.space, &verified_kernel(), &o.target, &o.model, &cfg).unwrap();
    let mut chain = MhChain::new(o.space.states[0].clone(), &o.model, &o.target, verified_kernel(), cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let steps = 1_000_000;
    let clock = Instant::now();
    let visits = run_chain(&mut chain, steps, &mut rng).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let tv = empirical_vs_exact(&o.space, &visits, &p).unwrap();
    let invalid = visits
        .keys()
        .filter(|k| o.space.position(k).is_none_or(|i| !is_valid(&o.space.states[i])))
        .count();
    (
        Outcome {
            id: 3,
            name: "ergodic convergence",
            passed: tv <= TV_TOL && secs < 60.0,
            detail: format!("{steps} steps, TV {tv:.4} (<= {TV_TOL}), {secs:.1}s (< 60s)"),
        },
        invalid,
    )
}

fn random_input<R: Rng>(rng: &mut R, vocab: usize) -> GraphInput {
    let n = rng.random_range(2..=6);
    let edges = random_tree(n, rng)
        .into_iter()
        .map(|(a, b)| (a, b, BondType::ALL[rng.random_range(0..BondType::COUNT)]))
        .collect();
    GraphInput {
        tokens: (0..n).map(|_| rng.random_range(0..vocab)).collect(),
        edges,
    }
}

/// Largest relative error between analytic and central-difference
/// gradients. Entries where both are below 1e-6 in size are compared
/// against 1e-6, so float noise on flat directions doesn't count.
fn worst_gradient_error(m: &mut Gnn, batch: &Batch, targets: &Targets) -> f64 {
    let (_, grads) = m.loss_and_grad(batch, targets);
    let mut worst: f64 = 0.0;
    for t in 0..m.tensors.len() {
        let cols = m.tensors[t].ncols();
        for idx in 0..m.tensors[t].len() {
            let at = [idx / cols, idx % cols];
            let orig = m.tensors[t][at];
            m.tensors[t][at] = orig + FD_STEP;
            let up = m.loss(batch, targets);
            m.tensors[t][at] = orig - FD_STEP;
            let down = m.loss(batch, targets);
            m.tensors[t][at] = orig;
            let num = (up - down) / (2.0 * FD_STEP);
            let ana = grads[t][at];
            worst = worst.max((ana - num).abs() / ana.abs().max(num.abs()).max(1e-6));
        }
    }
    worst
}

fn criterion_4() -> Outcome {
    let vocab = 10;
    let shape = GnnShape::new(3, 16, vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut mgnn = Gnn::init(HeadKind::Mgnn, shape, &mut rng);
    let mut bgnn = Gnn::init(HeadKind::Bgnn, shape, &mut rng);
    let (mut worst_m, mut worst_b): (f64, f64) = (0.0, 0.0);
    for _ in 0..5 {
        let g = random_input(&mut rng, vocab);
        let v = rng.random_range(0..g.len());
        let masked = g.clone().masked(v, shape.mask_token());
        let batch = Batch::new(&[(&masked, v)]);
        worst_m = worst_m.max(worst_gradient_error(&mut mgnn, &batch, &Targets::Classes(vec![g.tokens[v]])));
        let batch = Batch::all_nodes(&g);
        let labels = (0..g.len()).map(|_| f64::from(rng.random_range(0..2u8))).collect();
        worst_b = worst_b.max(worst_gradient_error(&mut bgnn, &batch, &Targets::Binary(labels)));
    }
    Outcome {
        id: 4,
        name: "gradient correctness",
        passed: worst_m <= GRAD_TOL && worst_b <= GRAD_TOL,
        detail: format!("5 graphs <= 6 nodes, max relative error mGNN {worst_m:.2e}, bGNN {worst_b:.2e} (<= {GRAD_TOL:.0e})"),
    }
}

fn criterion_5() -> Outcome {
    let vocab = SubstructureVocab::desk();
    let clock = Instant::now();
    let train = synthetic_corpus(&vocab, 10_000, 2, 16, 1);
    let held = synthetic_corpus(&vocab, 1_000, 2, 16, 2);
    let cfg = TrainConfig {
        epochs: 10,
        batch_size: 32,
        lr: 3e-3,
        seed: 11,
    };
    let (pair, _) = pretrain(&train, GnnShape::new(3, 32, vocab.len()), &cfg).unwrap();
    let acc = evaluate_mgnn(&pair.mgnn, &held);
    let area = auc(&evaluate_bgnn(&pair.bgnn, &held));
    let secs = clock.elapsed().as_secs_f64();
    Outcome {
        id: 5,
        name: "learnability",
        passed: acc >= ACCURACY_MIN && area >= AUC_MIN && secs < 900.0,
        detail: format!(
            "10 epochs on 10^4 graphs: held-out accuracy {acc:.4} (>= {ACCURACY_MIN}), AUC {area:.4} (>= {AUC_MIN}), {secs:.1}s (< 900s)"
        ),
    }
}

const FUZZ_ALPHABET: &[u8] = b"CNOSPFIBrcnos()[]=#:-+@123456789%0Hl. \t*/\\";

fn criterion_6() -> Outcome {
    let vocab = SubstructureVocab::full();
    let corpus = read_corpus(&std::fs::read_to_string(data("roundtrip_100.smi")).unwrap());
    let ok = corpus
        .iter()
        .filter(|e| {
            let Ok(g) = parse_smiles(&e.smiles, &vocab) else {
                return false;
            };
            let Ok(text) = write_smiles(&g) else {
                return false;
            };
            parse_smiles(&text, &vocab).is_ok_and(|h| graph_isomorphic(&g, &h))
        })
        .count();

    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut crashes = 0;
    let fuzz = 100_000;
    for i in 0..fuzz {
        let len = rng.random_range(0..32);
        let bytes: Vec<u8> = (0..len)
            .map(|_| {
                if i % 4 == 0 {
                    rng.random()
                } else {
                    FUZZ_ALPHABET[rng.random_range(0..FUZZ_ALPHABET.len())]
                }
            })
            .collect();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        if catch_unwind(AssertUnwindSafe(|| {
            let _ = parse_smiles(&text, &vocab);
        }))
        .is_err()
        {
            crashes += 1;
        }
    }
    std::panic::set_hook(hook);
    Outcome {
        id: 6,
        name: "SMILES round trip",
        passed: corpus.len() == 100 && ok == 100 && crashes == 0,
        detail: format!("{ok}/{} round trips, {crashes} crashes on {fuzz} fuzzed inputs", corpus.len()),
    }
}

/// Returns the outcome and the number of invalid molecules seen in pools and Φ.
fn criterion_7() -> (Outcome, usize, usize) {
    let profile = RunProfile::load(data("profiles/desk_plogp.toml")).unwrap();
    let run = &profile.file.run;
    assert_eq!((run.particles, run.iterations, run.burn_in), (20, 10, 5));
    assert_eq!(profile.file.target.eta, vec![1.0, 0.3]);
    let inputs = data("desk_seeds.smi");
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));

    let clock = Instant::now();
    let first = cmd_optimize(&profile, &inputs, &a).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    cmd_optimize(&profile, &inputs, &b).unwrap();
    let identical = ["results.tsv", "phi.tsv", "trace.jsonl"]
        .iter()
        .all(|f| std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap());

    let (_, rows) = read_results(&std::fs::read_to_string(a.join("results.tsv")).unwrap()).unwrap();
    let n = rows.len();
    let hits = rows
        .iter()
        .filter(|r| r.is_ok() && r.similarity >= 0.3 && r.deltas[0] >= 0.3)
        .count();
    let mean = rows.iter().map(|r| r.deltas.first().copied().unwrap_or(0.0)).sum::<f64>() / n as f64;
    let rate = hits as f64 / n as f64;

    // every pool member and every Φ entry, re-read from the written files
    let vocab = profile.vocab().unwrap();
    let mut seen = BTreeSet::new();
    for line in std::fs::read_to_string(a.join("trace.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        seen.insert(v["smiles"].as_str().map(str::to_string));
    }
    for line in std::fs::read_to_string(a.join("phi.tsv")).unwrap().lines().skip(1) {
        seen.insert(line.split('\t').nth(1).map(str::to_string));
    }
    let invalid = seen
        .iter()
        .filter(|s| !s.as_deref().is_some_and(|s| parse_smiles(s, &vocab).is_ok_and(|g| is_valid(&g))))
        .count();
    (
        Outcome {
            id: 7,
            name: "pipeline behaviour",
            passed: n == 50 && rate >= SUCCESS_MIN && mean > 0.0 && identical && secs < 600.0,
            detail: format!(
                "{hits}/{n} best outputs with sim >= 0.3 and delta >= 0.3 (rate {rate:.2}, need >= {SUCCESS_MIN}), \
                 mean improvement {mean:.3} (> 0), rerun identical: {identical}, {secs:.1}s (< 600s), {} rows failed",
                first.rows.iter().filter(|r| !r.is_ok()).count()
            ),
        },
        invalid,
        seen.len(),
    )
}

fn main() {
    let clock = Instant::now();
    let o = oracle_setup();
    let mut outcomes = criteria_1_2(&o);
    let (c3, chain_invalid) = criterion_3(&o);
    outcomes.push(c3);
    outcomes.push(criterion_4());
    outcomes.push(criterion_5());
    outcomes.push(criterion_6());
    let (c7, pool_invalid, audited) = criterion_7();
    outcomes.push(c7);
    outcomes.push(Outcome {
        id: 8,
        name: "validity audit",
        passed: chain_invalid == 0 && pool_invalid == 0,
        detail: format!(
            "{chain_invalid} invalid states visited by the chain, {pool_invalid} invalid among {audited} distinct pool and output molecules"
        ),
    });

    let mut unexpected = Vec::new();
    for c in &outcomes {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        let known = !c.passed && KNOWN_UNMET.contains(&c.id);
        say(&format!(
            "{tag} criterion {} ({}): {}{}",
            c.id,
            c.name,
            c.detail,
            if known { " [known unmet, see README]" } else { "" }
        ));
        if !c.passed && !known {
            unexpected.push(c.id);
        }
    }
    say(&format!("acceptance finished in {:.1}s", clock.elapsed().as_secs_f64()));
    if !unexpected.is_empty() {
        say(&format!("unexpected failures: {unexpected:?}"));
        std::process::exit(1);
    }
}
