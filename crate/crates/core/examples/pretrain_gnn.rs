//! Pretrains both predictors on rule-labelled synthetic trees and reports
//! held-out accuracy and AUC.
//!
//! cargo run --release --example pretrain_gnn -- [graphs] [epochs] [hidden] [batch] [lr]

use std::time::Instant;

use mimosa::gnn::synthetic::synthetic_corpus;
use mimosa::gnn::{auc, evaluate_bgnn, evaluate_mgnn, pretrain, GnnShape, TrainConfig};
use mimosa::SubstructureVocab;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let graphs = arg(0, 2000.0) as usize;
    let cfg = TrainConfig {
        epochs: arg(1, 10.0) as usize,
        batch_size: arg(3, 32.0) as usize,
        lr: arg(4, 3e-3),
        seed: 11,
    };
    let shape = GnnShape::new(3, arg(2, 32.0) as usize, 10);

    let vocab = SubstructureVocab::desk();
    let train = synthetic_corpus(&vocab, graphs, 2, 16, 1);
    let test = synthetic_corpus(&vocab, 500, 2, 16, 2);

    let t = Instant::now();
    let (pair, report) = pretrain(&train, shape, &cfg).expect("training");
    for (e, (m, b)) in report.mgnn_loss.iter().zip(&report.bgnn_loss).enumerate() {
        println!("epoch {:2}  mgnn loss {m:.4}  bgnn loss {b:.4}", e + 1);
    }
    println!("trained in {:.1}s", t.elapsed().as_secs_f64());
    println!("mgnn masked accuracy {:.4}", evaluate_mgnn(&pair.mgnn, &test));
    println!("bgnn auc {:.4}", auc(&evaluate_bgnn(&pair.bgnn, &test)));
}
