use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mimosa::commands::{cmd_metrics, cmd_optimize, cmd_pretrain, cmd_verify, CommandError, EXIT_CONFIG};
use mimosa::profile::RunProfile;

#[derive(Parser)]
#[command(name = "mimosa", version, about = "Molecule optimisation by substructure sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Profile file (TOML). Built-in defaults when omitted.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Overrides the profile seed and MIMOSA_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train the masked-substructure and topology predictors.
    Pretrain(Common),
    /// Optimise every SMILES in the inputs file.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// SMILES file, one molecule per line.
        #[arg(long)]
        inputs: PathBuf,
    },
    /// Check detailed balance and stationarity on an enumerable space.
    Verify(Common),
    /// Success rate and mean improvements of a results file.
    Metrics {
        #[command(flatten)]
        common: Common,
        /// results.tsv written by optimize.
        #[arg(long)]
        inputs: PathBuf,
    },
}

fn load(c: &Common) -> Result<RunProfile, CommandError> {
    let mut p = match &c.profile {
        Some(path) => RunProfile::load(path),
        None => Ok(RunProfile::defaults()),
    }
    .map_err(|e| CommandError::Config(e.to_string()))?;
    p.apply_seed(c.seed).map_err(|e| CommandError::Config(e.to_string()))?;
    Ok(p)
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Pretrain(c) => {
            let s = cmd_pretrain(&load(&c)?, &c.out)?;
            for (i, (m, b)) in s.report.mgnn_loss.iter().zip(&s.report.bgnn_loss).enumerate() {
                println!("epoch {:3}  mgnn {m:.4}  bgnn {b:.4}", i + 1);
            }
            if let (Some(a), Some(u)) = (s.mgnn_holdout_accuracy, s.bgnn_holdout_auc) {
                println!("held out: mgnn accuracy {a:.4}  bgnn auc {u:.4}");
            }
            println!("checkpoint written to {}", c.out.join("checkpoint.json").display());
        }
        Command::Optimize { common, inputs } => {
            let s = cmd_optimize(&load(&common)?, &inputs, &common.out)?;
            let failed = s.rows.iter().filter(|r| !r.is_ok()).count();
            println!(
                "{} inputs, {failed} failed, {:.1}s; results in {}",
                s.rows.len(),
                s.seconds,
                common.out.join("results.tsv").display()
            );
        }
        Command::Verify(c) => match cmd_verify(&load(&c)?, &c.out) {
            Ok(r) => print!("{}", r.to_text()),
            Err(e) => {
                if let Ok(text) = std::fs::read_to_string(c.out.join("verify_report.txt")) {
                    print!("{text}");
                }
                return Err(e);
            }
        },
        Command::Metrics { common, inputs } => {
            print!("{}", cmd_metrics(&load(&common)?, &inputs, &common.out)?.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
