use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Parser, Subcommand};

use edca_core::kernel;
use edca_core::metrics::write_csv_file;
use edca_core::policy::PolicyKind;
use edca_core::runner::{paper_grid, parse_scenario, sweep};

#[derive(Parser)]
#[command(name = "edca-sim", version, about = "EDCA uplink contention simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file under one policy and seed.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = policy_parser())]
        policy: PolicyKind,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the comparison grid under both policies.
    Sweep {
        #[arg(long, value_parser = ["paper"])]
        grid: String,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        scale: u32,
        /// Seeds 1..=n are used.
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Inspect the comparison grid.
    Grid {
        /// Print the scenario ids.
        #[arg(long)]
        list: bool,
    },
}

fn policy_parser() -> impl TypedValueParser<Value = PolicyKind> {
    PossibleValuesParser::new(["edca", "qcaaae"]).map(|s| s.parse().expect("listed value"))
}

fn simulate(
    scenario: PathBuf,
    policy: PolicyKind,
    seed: u64,
    out: PathBuf,
) -> edca_core::Result<()> {
    let spec = parse_scenario(&fs::read_to_string(&scenario)?)?;
    let ledger = kernel::run(&spec, policy, seed)?;
    write_csv_file(std::slice::from_ref(&ledger), &out)?;
    let meta = serde_json::json!({
        "scenario_id": spec.scenario_id,
        "policy": policy.as_str(),
        "seed": seed,
        "duration_s": spec.duration,
        "warmup_s": spec.warmup,
        "stations": spec.total_stations(),
    });
    let mut meta_path = out.into_os_string();
    meta_path.push(".meta.json");
    fs::write(meta_path, format!("{meta:#}\n"))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            policy,
            seed,
            out,
        } => simulate(scenario, policy, seed, out),
        Command::Sweep {
            grid: _,
            scale,
            seeds,
            out_dir,
        } => {
            let seeds: Vec<u64> = (1..=seeds).collect();
            sweep(&paper_grid(scale), &PolicyKind::ALL, &seeds).and_then(|report| {
                report.write_dir(&out_dir)?;
                for f in &report.failures {
                    eprintln!(
                        "failed: {} {} seed {}: {}",
                        f.scenario_id, f.policy, f.seed, f.error
                    );
                }
                if report.is_success() {
                    Ok(())
                } else {
                    Err(edca_core::Error::Protocol(format!(
                        "{} of {} cells failed",
                        report.failures.len(),
                        report.failures.len() + report.ledgers.len()
                    )))
                }
            })
        }
        Command::Grid { list } => {
            if list {
                for spec in paper_grid(1) {
                    println!("{}", spec.scenario_id);
                }
            } else {
                println!(
                    "{} scenarios; use --list to print them",
                    paper_grid(1).len()
                );
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
