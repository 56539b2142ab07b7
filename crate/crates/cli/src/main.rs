use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use snowfrost_analysis::{Horizon, DEFAULT_PRECISION};
use snowfrost_cli::analyze::{bounds_report, budget_report, table1_report};
use snowfrost_cli::presets::{names, preset, PRESETS};
use snowfrost_cli::simulate::{parse_seeds, replay_file, summary, sweep, verdicts_json};
use snowfrost_cli::{CliError, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION};
use snowfrost_simnet::SimConfig;

#[derive(Parser)]
#[command(
    name = "snowfrost",
    version,
    about = "Analyse and simulate Snowflake+, Snowman and Frosty"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    /// β for each α₂ and error target.
    Table1,
    /// Every quoted binomial inequality.
    Bounds,
    /// Union-bound totals over a deployment horizon.
    Budget,
}

#[derive(Subcommand)]
enum Cmd {
    /// Recompute tables and bounds with exact arithmetic.
    Analyze {
        target: Target,
        /// Significant digits when printing rationals.
        #[arg(long, default_value_t = DEFAULT_PRECISION)]
        precision: usize,
        #[arg(long, default_value_t = 10_000)]
        processors: u64,
        #[arg(long, default_value_t = 1000)]
        years: u64,
        /// Rounds per second.
        #[arg(long, default_value_t = 5)]
        rps: u64,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a preset or a config file over a set of seeds.
    Simulate {
        /// Preset name or path to a config JSON file.
        #[arg(long)]
        config: String,
        /// `N` for seeds 0..N, `A..B`, or `a,b,c`; defaults to the config's seed.
        #[arg(long)]
        seeds: Option<String>,
        /// Directory for traces, metrics.csv and verdicts.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop a run at its first violation.
        #[arg(long)]
        halt_on_violation: bool,
    },
    /// Re-run the monitors over recorded traces.
    Replay {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// List presets, or print one.
    Presets { name: Option<String> },
}

fn load_config(spec: &str) -> Result<SimConfig, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(SimConfig::from_json(&text)?)
    } else {
        preset(spec)
    }
}

fn execute(cmd: Cmd) -> Result<i32, CliError> {
    let verdict = |ok: bool| if ok { EXIT_OK } else { EXIT_VIOLATION };
    match cmd {
        Cmd::Analyze {
            target,
            precision,
            processors,
            years,
            rps,
            out,
        } => {
            let report = match target {
                Target::Table1 => table1_report(precision)?,
                Target::Bounds => bounds_report(precision)?,
                Target::Budget => budget_report(
                    Horizon {
                        processors,
                        years,
                        rounds_per_second: rps,
                    },
                    precision,
                )?,
            };
            print!("{}", report.text);
            if let Some(path) = out {
                std::fs::write(&path, &report.text).map_err(|e| CliError::io(&path, e))?;
            }
            Ok(verdict(report.ok))
        }
        Cmd::Simulate {
            config,
            seeds,
            out,
            halt_on_violation,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.halt_on_violation |= halt_on_violation;
            cfg.validate()?;
            let seeds = match seeds {
                Some(s) => parse_seeds(&s)?,
                None => vec![cfg.seed],
            };
            let runs = sweep(&cfg, &seeds, out.as_deref())?;
            print!("{}", summary(&runs));
            Ok(verdict(runs.iter().all(|r| r.verdicts.is_clean())))
        }
        Cmd::Replay { traces } => {
            let mut ok = true;
            for path in traces {
                let out = replay_file(&path)?;
                ok &= out.verdicts.is_clean();
                println!("{}", verdicts_json(&out.verdicts)?);
            }
            Ok(verdict(ok))
        }
        Cmd::Presets { name: None } => {
            for n in names() {
                println!("{n}");
            }
            Ok(EXIT_OK)
        }
        Cmd::Presets { name: Some(name) } => {
            preset(&name)?;
            let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).expect("checked");
            print!("{text}");
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    };
    ExitCode::from(code as u8)
}
