use std::process::ExitCode;

use clap::Parser;

use feec_cli::config::{resolve, Cli};
use feec_cli::run::{run, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // help and version requests go through clap's own printing
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = CliError::Validation(feec_cli::ValidationErrors(vec![e.to_string().trim().to_string()]));
            eprintln!("{}", err.json_line());
            return ExitCode::from(1);
        }
    };
    match resolve(&cli).map_err(CliError::from).and_then(|config| run(&config)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.json_line());
            ExitCode::from(1)
        }
    }
}
