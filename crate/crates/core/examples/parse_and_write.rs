//! Parses SMILES into substructure graphs, prints the nodes and a canonical
//! SMILES, and checks that the written form reads back to the same graph.
//!
//! cargo run --example parse_and_write -- [file.smi | SMILES...]

use mimosa::smiles::read_corpus;
use mimosa::{canonical_key, graph_isomorphic, parse_smiles, write_smiles, SubstructureVocab};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let inputs: Vec<String> = match args.first() {
        Some(p) if p.ends_with(".smi") => {
            let text = std::fs::read_to_string(p).expect("readable corpus");
            read_corpus(&text).into_iter().map(|e| e.smiles).collect()
        }
        Some(_) => args,
        None => ["CC(=O)Oc1ccccc1C(=O)O", "C1CCNCC1c1ccncc1", "c1ccc2ccccc2c1", "C(C)(C)(C)(C)C"]
            .map(String::from)
            .to_vec(),
    };
    let vocab = SubstructureVocab::full();
    let mut ok = 0;
    for s in &inputs {
        let g = match parse_smiles(s, &vocab) {
            Ok(g) => g,
            Err(e) => {
                println!("{s}\terror: {e}");
                continue;
            }
        };
        let labels: Vec<&str> = (0..g.num_nodes()).map(|v| g.label_text(v)).collect();
        let out = write_smiles(&g).expect("writable");
        let back = parse_smiles(&out, &vocab).expect("written SMILES parses");
        let same = graph_isomorphic(&g, &back);
        ok += usize::from(same);
        println!(
            "{s}\t{out}\tnodes [{}]\tkey {}\t{}",
            labels.join(" "),
            canonical_key(&g).map(|k| k.to_string()).unwrap_or_else(|e| e.to_string()),
            if same { "round-trip ok" } else { "ROUND-TRIP MISMATCH" }
        );
    }
    println!("{ok}/{} round-trip", inputs.len());
}
