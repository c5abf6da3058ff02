//! Lists every candidate the replace / add / delete operations can reach
//! from one molecule, with the probability of each under the uniform
//! stand-in predictors and its log target density.
//!
//! cargo run --example propose_edits -- [SMILES]

use std::sync::Arc;

use mimosa::proposal::{enumerate_paths, ProposalConfig, UniformModel};
use mimosa::properties::{PlogpSurrogate, TargetDistConfig};
use mimosa::{parse_smiles, write_smiles, SubstructureVocab};

fn main() {
    let smiles = std::env::args().nth(1).unwrap_or_else(|| "OCc1ccccc1".into());
    let vocab = SubstructureVocab::desk();
    let x = parse_smiles(&smiles, &vocab).expect("input parses over the desk vocabulary");
    let target = TargetDistConfig::new(x.clone(), vec![1.0, 0.3], vec![Arc::new(PlogpSurrogate::desk())]).unwrap();
    let model = UniformModel::new(vocab.len());
    let paths = enumerate_paths(&x, &model, &target, &ProposalConfig::default()).unwrap();

    println!("{smiles}: log density {:.3}", target.log_density(&x).unwrap());
    for p in &paths {
        println!(
            "{:<8} {:<32} q {:.4}  log p {:.3}",
            p.op.name(),
            write_smiles(&p.candidate).unwrap_or_default(),
            p.prob,
            target.log_density(&p.candidate).unwrap()
        );
    }
    println!("{} candidates", paths.len());
}
