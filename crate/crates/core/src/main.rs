use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use risgee::harness::{run_experiment, self_test, summarize, write_csv, write_csv_file, ExperimentConfig, GroupKey, SelfTestConfig};

const CONFIG_ERROR: u8 = 1;
const SELF_TEST_FAILURE: u8 = 2;

/// Energy-efficient resource allocation for RIS-aided multi-user uplinks.
#[derive(Parser, Debug)]
#[command(name = "risgee", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base seed for channel drops (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of Monte Carlo drops (overrides the config).
    #[arg(long, global = true)]
    drops: Option<usize>,
    /// Output file (CSV for `run`, JSON for `sweep-defaults`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for `run`.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run { config: PathBuf },
    /// Run the invariant and oracle self-test at desk scale.
    Check,
    /// Print the default experiment config as JSON.
    SweepDefaults,
}

fn run(cli: &Cli, path: &Path) -> Result<(), String> {
    let mut config = ExperimentConfig::from_json_file(path).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    if let Some(drops) = cli.drops {
        config.drops = drops;
    }
    if let Some(out) = &cli.out {
        config.output_path = Some(out.clone());
    }
    let records = run_experiment(&config, cli.threads).map_err(|e| e.to_string())?;
    let Some(out) = &config.output_path else {
        return write_csv(&records, std::io::stdout().lock()).map_err(|e| e.to_string());
    };
    write_csv_file(&records, out).map_err(|e| e.to_string())?;
    let keys = [GroupKey::SweepValue, GroupKey::Method, GroupKey::Objective, GroupKey::Constraint];
    let rows = summarize(&records, &keys).map_err(|e| e.to_string())?;
    println!("{:>14} {:>24} {:>9} {:>7} {:>6} {:>14} {:>14}", "sweep_value", "method", "objective", "constr", "count", "gee_mean", "sum_rate_mean");
    for r in rows {
        println!(
            "{:>14.4} {:>24} {:>9} {:>7} {:>6} {:>14.6e} {:>14.6e}",
            r.key[0].parse::<f64>().unwrap_or(f64::NAN),
            r.key[1],
            r.key[2],
            r.key[3],
            r.count,
            r.gee_mean,
            r.sum_rate_mean
        );
    }
    eprintln!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

fn check(cli: &Cli) -> ExitCode {
    let mut config = SelfTestConfig::default();
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    if let Some(drops) = cli.drops {
        config.drops = drops;
    }
    match self_test(&config) {
        Ok(report) => {
            for s in &report.suites {
                println!("{:<22} {:>4}/{:<4} {}", s.name, s.passed, s.total, if s.ok() { "pass" } else { "FAIL" });
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(SELF_TEST_FAILURE)
            }
        }
        Err(e) => {
            eprintln!("self-test aborted: {e}");
            ExitCode::from(SELF_TEST_FAILURE)
        }
    }
}

fn sweep_defaults(cli: &Cli) -> Result<(), String> {
    let json = serde_json::to_string_pretty(&ExperimentConfig::defaults()).map_err(|e| e.to_string())?;
    match &cli.out {
        Some(path) => std::fs::write(path, json + "\n").map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => writeln!(std::io::stdout(), "{json}").map_err(|e| e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { CONFIG_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Check => return check(&cli),
        Command::SweepDefaults => sweep_defaults(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}
