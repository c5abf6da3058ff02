//! Success rate and mean improvements for a results file written by
//! `mimosa optimize`.
//!
//! cargo run --example metrics_report -- results.tsv [rule]
//!
//! `rule` is one of plogp, qed, drd, qed_plogp, drd_plogp (default plogp).

use mimosa::metrics::{compute_metrics, read_results, SuccessRule};

fn main() {
    let mut args = std::env::args().skip(1);
    let Some(path) = args.next() else {
        eprintln!("usage: metrics_report results.tsv [rule]");
        std::process::exit(2);
    };
    let rule_name = args.next().unwrap_or_else(|| "plogp".into());
    let rule = SuccessRule::preset(&rule_name).unwrap_or_else(|| {
        eprintln!("unknown rule {rule_name}");
        std::process::exit(2);
    });
    let text = std::fs::read_to_string(&path).expect("readable results file");
    let (properties, rows) = read_results(&text).expect("well-formed results");
    let report = compute_metrics(&properties, &rows, &rule);
    for m in &report.rows {
        println!(
            "{}\t{}\tsim {:.3}\t{:?}\t{}",
            m.input,
            m.output,
            m.similarity,
            m.deltas,
            if m.success { "success" } else { "-" }
        );
    }
    print!("{}", report.to_text());
}
