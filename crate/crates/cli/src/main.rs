use std::process::ExitCode;

use altmin::Error;
use altmin_cli::args::{Cli, Command};
use altmin_cli::{commands, exit_code_for, EXIT_USAGE};
use clap::Parser;

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("ALTMIN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("ALTMIN_THREADS must be a count, got `{raw}`")))?;
    // 0 leaves the choice to rayon.
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Solve(a) => commands::solve(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::Classify(a) => commands::classify(&a),
        Command::Catalog(a) => commands::catalog(&a),
    });
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
