use std::process::ExitCode;

use clap::Parser;
use epiflow_cli::{run, Cli, CliError, RunConfig, EXIT_CONFIG};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = RunConfig::from_cli(&cli)
        .map_err(CliError::Config)
        .and_then(|cfg| run(&cfg).map(|outcome| (cfg, outcome)));
    match result {
        Ok((cfg, outcome)) => {
            print!("{}", outcome.report);
            for path in &outcome.artifacts {
                eprintln!("wrote {}", path.display());
            }
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for name in &outcome.uncovered {
                eprintln!("warning: true value of {name} outside its 95% interval");
            }
            ExitCode::from(outcome.exit_code(cfg.allow_warnings) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
