use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpcode::sim::RowStatus;
use mpcode_cli::{run_and_emit, Format, RunManifest, EXIT_OK};

#[derive(Parser)]
#[command(
    name = "mpcode",
    version,
    about = "Multi-path streaming code simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a configuration and write the result table and summary.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Use this seed for every grid point.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Validate the configuration without running it.
        #[arg(long)]
        check: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { EXIT_OK });
        }
    };
    let Command::Run {
        config,
        out,
        seed,
        format,
        check,
    } = cli.command;
    let manifest = RunManifest {
        config,
        out,
        seed,
        format,
        check_only: check,
    };
    match run_and_emit(&manifest) {
        Ok(outcome) => {
            if manifest.check_only {
                println!("{}: ok", manifest.config.display());
                return ExitCode::from(EXIT_OK);
            }
            for row in &outcome.rows {
                match &row.status {
                    RowStatus::Ok => {}
                    RowStatus::Inadmissible(e) => eprintln!("point {}: skipped: {e}", row.point),
                    RowStatus::Failed(e) => eprintln!("point {}: failed: {e}", row.point),
                }
            }
            if let Some(t) = &outcome.table {
                println!("{} points -> {}", outcome.rows.len(), t.display());
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
