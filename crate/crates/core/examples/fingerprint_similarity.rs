//! Tanimoto similarity between molecules, plus the surrogate property
//! scores the target density uses.
//!
//! cargo run --example fingerprint_similarity -- [SMILES ...]
//!
//! The first molecule is the reference; every other one is compared to it.

use mimosa::fingerprint::{fingerprint, tanimoto};
use mimosa::properties::{LogpSurrogate, PlogpSurrogate, PropertyScorer, QedSurrogate};
use mimosa::{parse_smiles, SubstructureVocab};

fn main() {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        args = ["Oc1ccccc1", "Nc1ccccc1", "Oc1ccc(Cl)cc1", "OC1CCCCC1", "CCO"]
            .map(String::from)
            .to_vec();
    }
    let vocab = SubstructureVocab::desk();
    let reference = parse_smiles(&args[0], &vocab).expect("reference parses");
    let fp_ref = fingerprint(&reference);
    let plogp = PlogpSurrogate::desk();
    let qed = QedSurrogate { logp: LogpSurrogate::desk() };

    println!("{:<20} {:>6} {:>6} {:>7} {:>6}", "smiles", "bits", "sim", "plogp", "qed");
    for s in &args {
        let g = match parse_smiles(s, &vocab) {
            Ok(g) => g,
            Err(e) => {
                println!("{s:<20} {e}");
                continue;
            }
        };
        let fp = fingerprint(&g);
        println!(
            "{s:<20} {:>6} {:>6.3} {:>7.2} {:>6.3}",
            fp.set_count(),
            tanimoto(&fp_ref, &fp).unwrap(),
            plogp.score(&g).unwrap(),
            qed.score(&g).unwrap()
        );
    }
}
