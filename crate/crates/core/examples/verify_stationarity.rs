//! Builds the exact transition matrix on a small enumerable space and checks
//! it against the target, for both weight conventions, then runs a long
//! chain and reports its total-variation distance.
//!
//! cargo run --release --example verify_stationarity -- [max_nodes] [chain_steps]

use std::sync::Arc;
use std::time::Instant;

use mimosa::oracle::{empirical_vs_exact, enumerate_states, exact_report};
use mimosa::properties::{NodeCount, TargetDistConfig};
use mimosa::proposal::{ProposalConfig, UniformModel};
use mimosa::sampler::{run_chain, KernelConfig, MhChain, WeightConvention};
use mimosa::{BondType, SubstructureVocab};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let max_nodes = args.first().copied().unwrap_or(3) as usize;
    let steps = args.get(1).copied().unwrap_or(1_000_000);

    let vocab = Arc::new(SubstructureVocab::atoms(&[("C", 4), ("O", 2)]).unwrap());
    let space = enumerate_states(&vocab, max_nodes, &[BondType::Single]).unwrap();
    let target = TargetDistConfig::new(space.states[0].clone(), vec![1.0, 0.5], vec![Arc::new(NodeCount)])
        .unwrap()
        .with_max_nodes(Some(max_nodes));
    let model = UniformModel::new(vocab.len());
    let cfg = ProposalConfig::default();
    println!("{} states up to {max_nodes} nodes", space.len());

    for (convention, gamma) in [
        (WeightConvention::TextbookMh, [0.5, 0.25, 0.25]),
        (WeightConvention::Paper, [0.5, 0.25, 0.25]),
        (WeightConvention::TextbookMh, [0.5, 0.4, 0.1]),
    ] {
        let kernel = KernelConfig {
            gamma,
            convention,
            ..KernelConfig::default()
        };
        let t = Instant::now();
        let (r, _, _) = exact_report(&space, &kernel, &target, &model, &cfg).unwrap();
        println!(
            "{convention:?} gamma {gamma:?}: balance {:.3e}  stationary L-inf {:.3e}  diameter {:?}  ({:.2}s)",
            r.max_balance_violation,
            r.stationary_linf,
            r.reachability_diameter,
            t.elapsed().as_secs_f64()
        );
    }

    let kernel = KernelConfig::default();
    let (_, _, p) = exact_report(&space, &kernel, &target, &model, &cfg).unwrap();
    let mut chain = MhChain::new(space.states[0].clone(), &model, &target, kernel, cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = Instant::now();
    let visits = run_chain(&mut chain, steps, &mut rng).unwrap();
    println!(
        "{steps} steps: TV {:.4} ({:.1}s)",
        empirical_vs_exact(&space, &visits, &p).unwrap(),
        t.elapsed().as_secs_f64()
    );
}
