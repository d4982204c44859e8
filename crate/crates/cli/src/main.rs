use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use epigraph_lab_cli::{catalog, report, run, thread_cap};

#[derive(Parser)]
#[command(
    name = "epigraph-lab",
    version,
    about = "Finite-difference experiments for -Δu = f(u) on epigraphs and strips"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run { config: PathBuf },
    /// Print the checks of a finished run directory.
    Report { dir: PathBuf },
    /// List experiments, domains, nonlinearities and closed forms.
    ListCatalog,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let code = match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(command: Command) -> Result<i32, epigraph_lab_cli::error::CliError> {
    if let Some(n) = thread_cap()? {
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match command {
        Command::Run { config } => {
            let record = run(&config)?;
            for c in &record.checks {
                println!(
                    "{}  {}  {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.observed
                );
            }
            if let Some(e) = &record.error {
                eprintln!("error: {e}");
            }
            Ok(record.exit_code)
        }
        Command::Report { dir } => report(&dir, std::io::stdout().lock()),
        Command::ListCatalog => {
            print!("{}", catalog());
            Ok(0)
        }
    }
}
