//! Optimises the penalised-logP surrogate for a few molecules with the
//! population sampler and prints the best molecule found for each.
//!
//! cargo run --release --example optimize_molecule -- [file.smi | SMILES...]
//!
//! Uses the uniform stand-in predictors, so no checkpoint is needed.

use std::sync::Arc;
use std::time::Instant;

use mimosa::properties::{PlogpSurrogate, PropertyScorer, TargetDistConfig};
use mimosa::proposal::{ProposalConfig, UniformModel};
use mimosa::sampler::{run_mimosa, KernelConfig, KernelMode, RunConfig, WeightConvention};
use mimosa::smiles::read_corpus;
use mimosa::{parse_smiles, write_smiles, SubstructureVocab};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let inputs: Vec<String> = match args.first() {
        Some(p) if p.ends_with(".smi") => read_corpus(&std::fs::read_to_string(p).expect("readable"))
            .into_iter()
            .map(|e| e.smiles)
            .collect(),
        Some(_) => args,
        None => vec!["CC(=O)Nc1ccc(O)cc1".into(), "OC1CCCCC1".into(), "NCCc1ccccc1".into()],
    };
    let vocab = SubstructureVocab::desk();
    let model = UniformModel::new(vocab.len());
    let kernel = KernelConfig {
        gamma: [0.5, 0.25, 0.25],
        convention: WeightConvention::Paper,
        mode: KernelMode::Population,
    };
    let run = RunConfig::default();
    let plogp = Arc::new(PlogpSurrogate::desk());
    let t = Instant::now();
    let (mut hits, mut gain) = (0, 0.0);
    for (i, s) in inputs.iter().enumerate() {
        let x = parse_smiles(s, &vocab).expect("input parses over the desk vocabulary");
        let target = TargetDistConfig::new(x, vec![1.0, 0.3], vec![plogp.clone()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let r = run_mimosa(&run, &kernel, &target, &model, &ProposalConfig::default(), &mut rng).unwrap();
        let e = target.evaluate(&r.best.graph).unwrap();
        let delta = e.deltas[0];
        hits += usize::from(e.similarity >= 0.3 && delta >= 0.3);
        gain += delta;
        println!(
            "{s}\t{}\tsim {:.3}\tplogp {:.2} -> {:.2}\t|phi| {}",
            write_smiles(&r.best.graph).unwrap_or_default(),
            e.similarity,
            plogp.score(target.input()).unwrap(),
            e.scores[0],
            r.phi.len()
        );
    }
    println!(
        "success {hits}/{}  mean improvement {:.3}  ({:.1}s)",
        inputs.len(),
        gain / inputs.len() as f64,
        t.elapsed().as_secs_f64()
    );
}
