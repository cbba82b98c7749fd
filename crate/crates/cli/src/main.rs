use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use timemachine::config::{Format, ScenarioConfig};
use timemachine::export::{output_dir, read_record, render, write_bytes, write_run};
use timemachine::scenario::{run_scenario, SCENARIOS};
use timemachine::verify::{run_checks, Level};
use timemachine::CliError;
use timemachine_core::hybrid::hybrid_rhs;

#[derive(Parser)]
#[command(name = "timemachine", version, about = "Run and check time-machine scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config.
    Run { config: PathBuf },
    /// Check engine invariants.
    Verify {
        /// Include the slow checks.
        #[arg(long)]
        full: bool,
    },
    /// Re-export a saved `.record.json` as CSV or JSON Lines.
    Export {
        record: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        /// Defaults to the record path with the new extension.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List the available scenarios.
    Scenarios,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonl => Format::Jsonl,
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config } => {
            let validated = ScenarioConfig::load(&config)?.validate()?;
            let record = run_scenario(&validated)?;
            let written = write_run(&record, &output_dir(&validated.raw.output.dir))?;
            println!(
                "{}: {} rows in {:.3}s",
                record.metadata.scenario,
                record.rows.len(),
                record.metadata.wall_time_s
            );
            println!("wrote {}", written.table.display());
            println!("wrote {}", written.record.display());
            Ok(())
        }
        Command::Verify { full } => {
            let started = Instant::now();
            let level = if full { Level::Full } else { Level::Quick };
            let results = run_checks(level, hybrid_rhs);
            let failed = results.iter().filter(|r| !r.pass).count();
            for r in &results {
                println!(
                    "{} {:<17} {:<36} measured {:<11.3e} tolerance {:.1e}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.module,
                    r.name,
                    r.measured,
                    r.tolerance
                );
            }
            println!(
                "{} of {} checks passed in {:.2}s",
                results.len() - failed,
                results.len(),
                started.elapsed().as_secs_f64()
            );
            if failed == 0 {
                Ok(())
            } else {
                Err(CliError::Verify(failed))
            }
        }
        Command::Export { record, format, output } => {
            let format = Format::from(format);
            let rec = read_record(&record)?;
            let out = output.unwrap_or_else(|| default_export_path(&record, format));
            write_bytes(&out, &render(&rec, format)?)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Scenarios => {
            for (_, name, about) in SCENARIOS {
                println!("{name:<24} {about}");
            }
            Ok(())
        }
    }
}

fn default_export_path(record: &std::path::Path, format: Format) -> PathBuf {
    let name = record
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name.strip_suffix(".record.json").unwrap_or(&name).to_string();
    record.with_file_name(format!("{stem}.{}", format.extension()))
}
