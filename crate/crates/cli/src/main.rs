use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mdiew_cli::{execute, CliError, RunConfig, OUTPUT_DIR_ENV};

fn main() -> ExitCode {
    let config = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError {
                code: 2,
                kind: "invalid_config".into(),
                message: e.to_string().trim().to_string(),
            };
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    let env_dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    match execute(&config, env_dir.as_deref()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.code as u8)
        }
    }
}
